#pragma once

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "nanosim/device.hpp"

namespace nanosim {

// ---------------------------------------------------------------------------
// Circuit data model
// ---------------------------------------------------------------------------

inline constexpr const char* kGroundNode = "0";

struct CntfetDevice {
    Polarity polarity = Polarity::N;
    Chirality chirality{};
    int tubes = 1;
    friend bool operator==(const CntfetDevice&, const CntfetDevice&) = default;
};

struct ResistorDevice {
    double ohms = 0.0;
    friend bool operator==(const ResistorDevice&, const ResistorDevice&) = default;
};

struct CapacitorDevice {
    double farads = 0.0;
    std::optional<double> initial_volts;
    friend bool operator==(const CapacitorDevice&, const CapacitorDevice&) = default;
};

/// One element line. Terminal order: cntfet (drain, gate, source),
/// resistor/capacitor (plus, minus). The name keeps its kind prefix letter.
struct Device {
    std::string name;
    std::vector<std::string> terminals;
    std::variant<CntfetDevice, ResistorDevice, CapacitorDevice> params;

    bool is_cntfet() const { return std::holds_alternative<CntfetDevice>(params); }
    const CntfetDevice& cntfet() const { return std::get<CntfetDevice>(params); }
    const ResistorDevice& resistor() const { return std::get<ResistorDevice>(params); }
    const CapacitorDevice& capacitor() const { return std::get<CapacitorDevice>(params); }

    friend bool operator==(const Device&, const Device&) = default;
};

struct DcShape {
    double volts = 0.0;
    friend bool operator==(const DcShape&, const DcShape&) = default;
};

struct PulseShape {
    double v_low = 0.0;
    double v_high = 0.0;
    double delay_s = 0.0;
    double rise_s = 0.0;
    double fall_s = 0.0;
    double width_s = 0.0;
    double period_s = 0.0;
    friend bool operator==(const PulseShape&, const PulseShape&) = default;
};

struct Source {
    std::string name;
    std::string node_plus;
    std::string node_minus;
    std::variant<DcShape, PulseShape> shape;

    friend bool operator==(const Source&, const Source&) = default;
};

/// Source value at time t; DC sources are constant, pulse sources follow the
/// classic trapezoidal pulse train.
double source_value(const Source& s, double t);

struct TranAnalysis {
    double step_s = 0.0;
    double stop_s = 0.0;
    friend bool operator==(const TranAnalysis&, const TranAnalysis&) = default;
};
struct OpAnalysis {
    friend bool operator==(const OpAnalysis&, const OpAnalysis&) = default;
};
using Analysis = std::variant<TranAnalysis, OpAnalysis>;

struct AvgPowerMeasure {
    std::string name;
    std::string source_name;
    friend bool operator==(const AvgPowerMeasure&, const AvgPowerMeasure&) = default;
};
struct DelayMeasure {
    std::string name;
    std::string in_node;
    std::string out_node;
    double fraction = 0.5;
    friend bool operator==(const DelayMeasure&, const DelayMeasure&) = default;
};
struct PdpMeasure {
    std::string name;
    friend bool operator==(const PdpMeasure&, const PdpMeasure&) = default;
};
using MeasureSpec = std::variant<AvgPowerMeasure, DelayMeasure, PdpMeasure>;

struct Circuit {
    std::string title;
    double temp_C = 27.0;
    std::vector<Device> devices;
    std::vector<Source> sources;
    std::vector<Analysis> analyses;
    std::vector<MeasureSpec> measures;

    /// All node names referenced by element terminals, in first-use order.
    std::vector<std::string> nodes() const;

    const Device* find_device(const std::string& name) const;
    const Source* find_source(const std::string& name) const;

    friend bool operator==(const Circuit&, const Circuit&) = default;
};

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

class ParseError : public std::runtime_error {
public:
    ParseError(int line, int column, const std::string& message);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Parses netlist source into a Circuit. Keywords are case-insensitive, node
/// names keep their case. Lines starting with `*` are comments, lines
/// starting with `+` continue the previous line, and the deck must end with
/// `.end`. Throws ParseError with a line/column position on any defect.
Circuit parse(const std::string& text);

/// Emits the canonical form of a circuit; parse(serialize(c)) == c.
std::string serialize(const Circuit& c);

/// Parses one numeric token with engineering suffixes
/// (f p n u m k meg g, exact decimal scaling). Throws ParseError on junk.
double parse_spice_number(const std::string& token);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Severity { warning, error };

struct Diagnostic {
    Severity severity = Severity::error;
    std::string message;
};

/// Structural checks on an already-built circuit: ground present and
/// reachable from every node, element values sane, at least one analysis
/// (warning), capacitor-only nodes without an initial condition (warning).
/// Empty result means the circuit is clean; simulation requires no errors.
std::vector<Diagnostic> validate(const Circuit& c);

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Severity::error) return true;
    return false;
}

}  // namespace nanosim
