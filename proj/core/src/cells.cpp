#include "nanosim/cells.hpp"

#include <algorithm>
#include <stdexcept>

namespace nanosim {

namespace {

void add_fet(Circuit& c, const std::string& name, const std::string& d,
             const std::string& g, const std::string& s, Polarity pol,
             const CellConfig& cfg) {
    Device dev;
    dev.name = name;
    dev.terminals = {d, g, s};
    CntfetDevice f;
    f.polarity = pol;
    f.chirality = pol == Polarity::N ? cfg.n_chirality : cfg.p_chirality;
    f.tubes = pol == Polarity::N ? cfg.tubes_n : cfg.tubes_p;
    dev.params = f;
    c.devices.push_back(std::move(dev));
}

// Mirror carry stage: pull-down a*b + (a+b)*c between carry_b and ground,
// its dual pull-up between vdd and carry_b. 5 N + 5 P devices.
void build_carry_stage(Circuit& c, const CellConfig& cfg) {
    add_fet(c, "MN01", "cout_b", "a", "x1", Polarity::N, cfg);
    add_fet(c, "MN02", "x1", "b", "0", Polarity::N, cfg);
    add_fet(c, "MN03", "cout_b", "c", "x2", Polarity::N, cfg);
    add_fet(c, "MN04", "x2", "a", "0", Polarity::N, cfg);
    add_fet(c, "MN05", "x2", "b", "0", Polarity::N, cfg);
    add_fet(c, "MP01", "x3", "a", "vdd", Polarity::P, cfg);
    add_fet(c, "MP02", "x3", "b", "vdd", Polarity::P, cfg);
    add_fet(c, "MP03", "cout_b", "c", "x3", Polarity::P, cfg);
    add_fet(c, "MP04", "x4", "a", "x3", Polarity::P, cfg);
    add_fet(c, "MP05", "cout_b", "b", "x4", Polarity::P, cfg);
}

// Sum stage: pull-down a*b*c + (a+b+c)*cout_b between sum_b and ground,
// dual pull-up. 7 N + 7 P devices.
void build_sum_stage(Circuit& c, const CellConfig& cfg) {
    add_fet(c, "MN06", "sum_b", "a", "y1", Polarity::N, cfg);
    add_fet(c, "MN07", "y1", "b", "y2", Polarity::N, cfg);
    add_fet(c, "MN08", "y2", "c", "0", Polarity::N, cfg);
    add_fet(c, "MN09", "sum_b", "cout_b", "y3", Polarity::N, cfg);
    add_fet(c, "MN10", "y3", "a", "0", Polarity::N, cfg);
    add_fet(c, "MN11", "y3", "b", "0", Polarity::N, cfg);
    add_fet(c, "MN12", "y3", "c", "0", Polarity::N, cfg);
    add_fet(c, "MP06", "y4", "a", "vdd", Polarity::P, cfg);
    add_fet(c, "MP07", "y4", "b", "vdd", Polarity::P, cfg);
    add_fet(c, "MP08", "y4", "c", "vdd", Polarity::P, cfg);
    add_fet(c, "MP09", "sum_b", "cout_b", "y4", Polarity::P, cfg);
    add_fet(c, "MP10", "y5", "a", "y4", Polarity::P, cfg);
    add_fet(c, "MP11", "y6", "b", "y5", Polarity::P, cfg);
    add_fet(c, "MP12", "sum_b", "c", "y6", Polarity::P, cfg);
}

void build_inverter(Circuit& c, const std::string& suffix,
                    const std::string& in, const std::string& out,
                    const CellConfig& cfg) {
    add_fet(c, "MP" + suffix, out, in, "vdd", Polarity::P, cfg);
    add_fet(c, "MN" + suffix, out, in, "0", Polarity::N, cfg);
}

GeneratedCell build_adder(const CellConfig& cfg, const std::string& title) {
    cfg.validate();
    GeneratedCell cell;
    cell.circuit.title = title;
    cell.circuit.temp_C = cfg.temp_C;
    build_carry_stage(cell.circuit, cfg);
    build_sum_stage(cell.circuit, cfg);
    cell.inputs = {"a", "b", "c"};
    if (cfg.variant == CellVariant::core24) {
        cell.sum = {"sum_b", true};
        cell.cout = {"cout_b", true};
    } else {
        build_inverter(cell.circuit, "13", "sum_b", "sum", cfg);
        build_inverter(cell.circuit, "14", "cout_b", "cout", cfg);
        cell.sum = {"sum", false};
        cell.cout = {"cout", false};
    }
    cell.device_count = static_cast<int>(cell.circuit.devices.size());
    return cell;
}

}  // namespace

void CellConfig::validate() const {
    if (!(vdd > 0)) throw std::invalid_argument("vdd must be > 0");
    if (temp_C <= -273.15)
        throw std::invalid_argument("temperature below absolute zero");
    if (!is_semiconducting(n_chirality) || !is_semiconducting(p_chirality))
        throw std::invalid_argument("cell chirality must be semiconducting");
    if (tubes_n < 1 || tubes_p < 1)
        throw std::invalid_argument("tube counts must be >= 1");
    if (!(load_cap > 0)) throw std::invalid_argument("load_cap must be > 0");
}

void Stimulus::validate() const {
    if (!(base_period > 0)) throw std::invalid_argument("base period must be > 0");
    if (!(transition > 0)) throw std::invalid_argument("transition must be > 0");
    if (transition > base_period / 10)
        throw std::invalid_argument("transition must be <= base period / 10");
}

GeneratedCell generate_proposed_fa(const CellConfig& cfg) {
    return build_adder(cfg, cfg.variant == CellVariant::core24
                                ? "proposed-fa-core24"
                                : "proposed-fa-buffered");
}

GeneratedCell generate_majority_fa(const CellConfig& cfg) {
    // The carry stage is itself the (inverted) majority gate, so the
    // canonical majority-based adder shares the mirror structure; true
    // polarity keeps it comparable in benches.
    CellConfig ref = cfg;
    ref.variant = CellVariant::buffered;
    return build_adder(ref, "majority-fa");
}

Testbench generate_testbench(const GeneratedCell& cell, const CellConfig& cfg,
                             const Stimulus& stim) {
    cfg.validate();
    stim.validate();

    std::vector<std::string> nodes = cell.circuit.nodes();
    auto has_node = [&](const std::string& n) {
        return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
    };
    for (const auto& in : cell.inputs)
        if (!has_node(in))
            throw std::invalid_argument("cell is missing input node '" + in + "'");
    if (!has_node("vdd"))
        throw std::invalid_argument("cell is missing the vdd rail");

    Testbench tb;
    tb.circuit = cell.circuit;
    tb.circuit.title = cell.circuit.title + "-bench";
    tb.circuit.temp_C = cfg.temp_C;
    tb.vdd = cfg.vdd;
    tb.vdd_source = "VDD";
    tb.power_measure = "power";

    const double T = stim.base_period;
    const double tt = stim.transition;
    tb.window_start = 4 * T;
    tb.window_stop = 8 * T;

    auto add_load = [&](const CellOutput& out, const std::string& name) {
        Device d;
        d.name = name;
        d.terminals = {out.node, kGroundNode};
        d.params = CapacitorDevice{cfg.load_cap, std::nullopt};
        tb.circuit.devices.push_back(std::move(d));
    };
    add_load(cell.sum, "Cload_sum");
    add_load(cell.cout, "Cload_cout");

    tb.circuit.sources.push_back(
        {"VDD", "vdd", kGroundNode, DcShape{cfg.vdd}});
    // Counter phases: a flips every 2T, b every T, c every T/2, so slot k of
    // a 4T window holds the input combination with bits (a b c) = k.
    auto pulse = [&](double period, double delay) {
        return PulseShape{0.0, cfg.vdd, delay, tt, tt, period / 2 - tt, period};
    };
    tb.circuit.sources.push_back({"VA", "a", kGroundNode, pulse(4 * T, 2 * T)});
    tb.circuit.sources.push_back({"VB", "b", kGroundNode, pulse(2 * T, T)});
    tb.circuit.sources.push_back({"VC", "c", kGroundNode, pulse(T, T / 2)});

    tb.circuit.analyses.push_back(TranAnalysis{tt / 10, 8 * T});

    tb.circuit.measures.push_back(AvgPowerMeasure{"power", "VDD"});
    DelayMeasure ds{"delay_sum", "c", cell.sum.node, 0.5};
    DelayMeasure dc{"delay_cout", "c", cell.cout.node, 0.5};
    tb.circuit.measures.push_back(ds);
    tb.circuit.measures.push_back(dc);
    tb.circuit.measures.push_back(PdpMeasure{"pdp"});
    tb.delay_probes = {ds, dc};
    return tb;
}

}  // namespace nanosim
