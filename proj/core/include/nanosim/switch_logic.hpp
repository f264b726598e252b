#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nanosim/netlist.hpp"

namespace nanosim {

enum class LogicLevel { zero, one, z, x };

char logic_char(LogicLevel l);

class SwitchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Transistors as voltage-controlled switches: an N device is closed for a
/// one on its gate, a P device for a zero; an undriven or unknown gate makes
/// the switch state unknown. Rails are recognized by node name: 0/gnd/vss
/// read zero, vdd/vcc read one (case-insensitive).
class SwitchNetwork {
public:
    /// Lowers a transistor-only circuit. Resistors and sources have no
    /// switch representation and raise SwitchError; capacitors are ignored.
    static SwitchNetwork build(const Circuit& c);

    /// Steady-state level of every node given externally driven inputs.
    /// Gate levels resolve topologically; a node is one (zero) when only
    /// closed switches reach that rail and no unknown path reaches the
    /// other, x on contention or uncertainty, z when nothing conducts.
    /// Throws SwitchError when gate dependencies form a cycle.
    std::map<std::string, LogicLevel> evaluate(
        const std::map<std::string, LogicLevel>& inputs) const;

    const std::vector<std::string>& node_names() const { return node_names_; }
    int switch_count() const { return static_cast<int>(switches_.size()); }

private:
    struct Switch {
        int gate, a, b;
        bool is_p;
    };
    std::vector<std::string> node_names_;
    std::map<std::string, int> node_index_;
    std::vector<int> rail_level_;  // -1 none, else LogicLevel ordinal
    std::vector<Switch> switches_;
    std::vector<std::vector<int>> incident_;  // node -> switch ids
};

bool majority(bool a, bool b, bool c);

struct FullAdderBits {
    bool sum;
    bool cout;
};
FullAdderBits full_adder_reference(bool a, bool b, bool cin);

/// How a full-adder cell presents its ports. Complemented outputs carry the
/// inverted value of the ideal signal.
struct AdderPorts {
    std::array<std::string, 3> inputs;  // a, b, carry-in
    std::string sum_node;
    bool sum_complemented = false;
    std::string cout_node;
    bool cout_complemented = false;
};

struct TruthRow {
    std::array<bool, 3> in;
    LogicLevel sum;
    LogicLevel cout;
    bool sum_ok;
    bool cout_ok;
};

struct TruthTableReport {
    bool pass = false;
    std::vector<TruthRow> rows;  // all 8 input combinations, binary order
    std::string text() const;
};

/// Evaluates the cell at switch level over every input combination and
/// compares with the boolean reference; x or z never matches.
TruthTableReport verify_full_adder(const Circuit& cell, const AdderPorts& ports);

}  // namespace nanosim
