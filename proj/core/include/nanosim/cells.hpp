#pragma once

#include <array>
#include <string>

#include "nanosim/netlist.hpp"
#include "nanosim/switch_logic.hpp"

namespace nanosim {

enum class CellVariant { core24, buffered };

struct CellConfig {
    double vdd = 0.9;       // V
    double temp_C = 27.0;
    Chirality n_chirality{19, 0};
    Chirality p_chirality{19, 0};
    int tubes_n = 3;
    int tubes_p = 3;
    double load_cap = 2e-15;  // F, per output in the test bench
    CellVariant variant = CellVariant::buffered;

    void validate() const;  // throws std::invalid_argument
};

/// Binary-counter input pattern: C toggles every half period T, B at T,
/// A at 2T, so each 4T window walks all 8 combinations in binary order.
struct Stimulus {
    double base_period = 800e-12;  // T, seconds
    double transition = 10e-12;    // rise and fall, seconds

    void validate() const;  // transition <= T/10
};

struct CellOutput {
    std::string node;
    bool complemented = false;  // node carries the inverted signal
};

struct GeneratedCell {
    Circuit circuit;
    std::array<std::string, 3> inputs;  // a, b, c (carry-in)
    CellOutput sum;
    CellOutput cout;
    int device_count = 0;

    AdderPorts ports() const {
        return {inputs, sum.node, sum.complemented, cout.node, cout.complemented};
    }
};

/// Two-stage mirror full adder, 24 transistors: stage 1 (5 N + 5 P) forms
/// the carry complement from a*b + (a+b)*c, stage 2 (7 N + 7 P) forms the
/// sum complement from a*b*c + (a+b+c)*carry_complement. The buffered
/// variant appends two inverters for true-polarity outputs (28 devices).
GeneratedCell generate_proposed_fa(const CellConfig& cfg = {});

/// Reference cell built around an explicit majority stage: the same mirror
/// carry stage (its output is the inverted majority) plus the sum stage,
/// buffered to true polarity. Serves as the sweep comparison baseline.
GeneratedCell generate_majority_fa(const CellConfig& cfg = {});

struct Testbench {
    Circuit circuit;
    double vdd = 0.0;
    double window_start = 0.0;  // measurement window, second 4T window
    double window_stop = 0.0;
    std::string vdd_source;               // supply name, "VDD"
    std::string power_measure;            // deck measurement names
    std::vector<DelayMeasure> delay_probes;  // input c to each output
};

/// Wraps a cell with a VDD supply, counter-pattern pulse sources on a/b/c,
/// a load capacitor on each output, a transient directive over two 4T
/// windows at step transition/10, and power/delay measurements.
Testbench generate_testbench(const GeneratedCell& cell, const CellConfig& cfg,
                             const Stimulus& stim = {});

}  // namespace nanosim
