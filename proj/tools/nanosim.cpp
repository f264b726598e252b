#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nanosim/cells.hpp"
#include "nanosim/device.hpp"
#include "nanosim/measure.hpp"
#include "nanosim/netlist.hpp"
#include "nanosim/solver.hpp"
#include "nanosim/switch_logic.hpp"

namespace {

using namespace nanosim;

// Exit codes: 0 success, 1 failed check or simulation, 2 usage/parse error.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

double snap_axis(double v) { return std::nearbyint(v * 1e9) / 1e9; }

// `start:stop:step` inclusive of stop within half a step; a bare number is a
// one-point axis.
std::vector<double> parse_range(const std::string& text, const char* what) {
    auto parts = split(text, ':');
    try {
        if (parts.size() == 1) return {parse_spice_number(parts[0])};
        if (parts.size() != 3) throw UsageError("");
        double start = parse_spice_number(parts[0]);
        double stop = parse_spice_number(parts[1]);
        double step = parse_spice_number(parts[2]);
        if (step <= 0 || stop < start) throw UsageError("");
        std::vector<double> out;
        for (int k = 0;; ++k) {
            double v = start + k * step;
            if (v > stop + step / 2 + 1e-12 * std::abs(stop)) break;
            out.push_back(snap_axis(v));
        }
        return out;
    } catch (const ParseError&) {
    } catch (const UsageError&) {
    }
    throw UsageError(std::string(what) +
                     " range must be <start>:<stop>:<step> or a single value, got '" +
                     text + "'");
}

ModelConfig load_model_config(const std::string& path) {
    ModelConfig cfg;
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto strip = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            size_t b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(line_no) +
                             ": expected key=value");
        std::string key = strip(line.substr(0, eq));
        std::string value = strip(line.substr(eq + 1));
        auto number = [&]() {
            try {
                return parse_spice_number(value);
            } catch (const ParseError& e) {
                throw UsageError("config line " + std::to_string(line_no) + ": " +
                                 e.what());
            }
        };
        if (key == "lattice_const_a") cfg.lattice_const_a = number();
        else if (key == "vth_numerator") cfg.vth_numerator = number();
        else if (key == "k_per_tube") cfg.k_per_tube = number();
        else if (key == "lambda") cfg.lambda = number();
        else if (key == "i_off_300K") cfg.i_off_300K = number();
        else if (key == "subthreshold_swing_300K")
            cfg.subthreshold_swing_300K = number();
        else if (key == "mobility_temp_exponent")
            cfg.mobility_temp_exponent = number();
        else if (key == "cap_per_tube") cfg.cap_per_tube = number();
        else if (key == "diameter_formula") {
            if (value == "simplified") cfg.diameter_formula = DiameterFormula::simplified;
            else if (value == "standard") cfg.diameter_formula = DiameterFormula::standard;
            else
                throw UsageError("config line " + std::to_string(line_no) +
                                 ": diameter_formula must be simplified or standard");
        } else {
            throw UsageError("config line " + std::to_string(line_no) +
                             ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

struct CellFlags {
    double vdd = 0.9;
    double temp_C = 27.0;
    std::string chirality = "19,0";
    int tubes = 3;
    std::string load = "2f";
    std::string period = "800p";
    std::string transition = "10p";
};

// The sweep owns --vdd/--temp as axis ranges; its cells take the operating
// point from the grid instead of these flags.
void add_cell_flags(CLI::App* cmd, CellFlags& f, bool operating_point = true) {
    if (operating_point) {
        cmd->add_option("--vdd", f.vdd, "Supply voltage, V");
        cmd->add_option("--temp", f.temp_C, "Temperature, Celsius");
    }
    cmd->add_option("--chirality", f.chirality, "Tube index pair n,m");
    cmd->add_option("--tubes", f.tubes, "Parallel tubes per device");
    cmd->add_option("--load", f.load, "Output load capacitance, F");
    cmd->add_option("--period", f.period, "Stimulus base period T, s");
    cmd->add_option("--transition", f.transition, "Input rise/fall time, s");
}

CellConfig cell_config(const CellFlags& f) {
    CellConfig cfg;
    cfg.vdd = f.vdd;
    cfg.temp_C = f.temp_C;
    auto nm = split(f.chirality, ',');
    try {
        if (nm.size() != 2) throw std::invalid_argument("expected n,m");
        Chirality ch(std::stoi(nm[0]), std::stoi(nm[1]));
        cfg.n_chirality = ch;
        cfg.p_chirality = ch;
        cfg.tubes_n = f.tubes;
        cfg.tubes_p = f.tubes;
        cfg.load_cap = parse_spice_number(f.load);
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad cell flags: ") + e.what());
    }
    return cfg;
}

Stimulus stimulus(const CellFlags& f) {
    Stimulus s;
    try {
        s.base_period = parse_spice_number(f.period);
        s.transition = parse_spice_number(f.transition);
        s.validate();
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad stimulus flags: ") + e.what());
    }
    return s;
}

CellFactory factory_for(const std::string& style) {
    if (style == "proposed24")
        return [](const CellConfig& cfg) {
            CellConfig c = cfg;
            c.variant = CellVariant::core24;
            return generate_proposed_fa(c);
        };
    if (style == "proposed-buffered")
        return [](const CellConfig& cfg) {
            CellConfig c = cfg;
            c.variant = CellVariant::buffered;
            return generate_proposed_fa(c);
        };
    if (style == "majority-ref")
        return [](const CellConfig& cfg) { return generate_majority_fa(cfg); };
    throw UsageError("unknown style '" + style +
                     "' (expected proposed24, proposed-buffered, majority-ref)");
}

void print_validation(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        std::cerr << (d.severity == Severity::error ? "error: " : "warning: ")
                  << d.message << "\n";
}

Circuit parse_deck(const std::string& path) {
    Circuit c = parse(read_file(path));
    auto diags = validate(c);
    if (has_errors(diags)) {
        print_validation(diags);
        throw UsageError("deck '" + path + "' failed validation");
    }
    return c;
}

int cmd_gen(const std::string& style, const CellFlags& flags,
            const std::string& out_path, bool to_stdout) {
    CellFactory factory = factory_for(style);
    CellConfig cfg;
    try {
        cfg = cell_config(flags);
        GeneratedCell cell = factory(cfg);
        std::string text = serialize(cell.circuit);
        if (!to_stdout && out_path.empty())
            throw UsageError("gen needs -o <file> or --stdout");
        if (to_stdout) std::cout << text;
        if (!out_path.empty()) write_file(out_path, text);
        return 0;
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

int cmd_verify(const std::string& deck_path, const std::string& inputs_flag,
               const std::string& oracle) {
    Circuit c = parse_deck(deck_path);
    auto inputs = split(inputs_flag, ',');
    if (inputs.size() != 3)
        throw UsageError("--inputs needs three comma-separated nodes");

    auto nodes = c.nodes();
    auto pick = [&](const char* plain, const char* inverted,
                    std::string& node, bool& complemented) {
        if (std::find(nodes.begin(), nodes.end(), plain) != nodes.end()) {
            node = plain;
            complemented = false;
        } else if (std::find(nodes.begin(), nodes.end(), inverted) != nodes.end()) {
            node = inverted;
            complemented = true;
        } else {
            throw UsageError(std::string("deck has neither node '") + plain +
                             "' nor '" + inverted + "'");
        }
    };

    if (oracle == "full-adder") {
        AdderPorts ports;
        ports.inputs = {inputs[0], inputs[1], inputs[2]};
        pick("sum", "sum_b", ports.sum_node, ports.sum_complemented);
        pick("cout", "cout_b", ports.cout_node, ports.cout_complemented);
        TruthTableReport report = verify_full_adder(c, ports);
        std::cout << report.text();
        if (report.pass) return 0;
        for (const auto& r : report.rows)
            if (!r.sum_ok || !r.cout_ok) {
                std::cout << "first mismatch at a=" << r.in[0] << " b=" << r.in[1]
                          << " c=" << r.in[2] << ": "
                          << (!r.sum_ok ? "sum" : "cout") << " reads "
                          << logic_char(!r.sum_ok ? r.sum : r.cout) << "\n";
                break;
            }
        return 1;
    }
    if (oracle == "majority") {
        std::string node;
        bool complemented = false;
        pick("cout", "cout_b", node, complemented);
        SwitchNetwork net = SwitchNetwork::build(c);
        bool pass = true;
        std::cout << "a b c | " << node << "\n";
        for (int combo = 0; combo < 8; ++combo) {
            bool a = combo & 4, b = combo & 2, cin = combo & 1;
            std::map<std::string, LogicLevel> in;
            in[inputs[0]] = a ? LogicLevel::one : LogicLevel::zero;
            in[inputs[1]] = b ? LogicLevel::one : LogicLevel::zero;
            in[inputs[2]] = cin ? LogicLevel::one : LogicLevel::zero;
            LogicLevel got = net.evaluate(in).at(node);
            bool want = majority(a, b, cin) != complemented;
            bool ok = got == (want ? LogicLevel::one : LogicLevel::zero);
            if (!ok) pass = false;
            std::cout << a << ' ' << b << ' ' << cin << " | " << logic_char(got)
                      << (ok ? "" : " !") << "\n";
        }
        std::cout << (pass ? "PASS" : "FAIL") << "\n";
        return pass ? 0 : 1;
    }
    throw UsageError("unknown oracle '" + oracle +
                     "' (expected full-adder or majority)");
}

double deck_vdd(const Circuit& c) {
    for (const auto& s : c.sources) {
        std::string lower_name = s.name;
        for (auto& ch : lower_name) ch = std::tolower(static_cast<unsigned char>(ch));
        if (lower_name == "vdd")
            if (const auto* dc = std::get_if<DcShape>(&s.shape)) return dc->volts;
    }
    throw MeasureError("delay measurement needs a DC source named VDD");
}

// Operating-point display rounding: six significant digits, enough to read a
// bias point while hiding the gmin leak (1e-12 S) in the last digits. CSV and
// measure outputs keep full round-trip precision.
std::string display_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

int cmd_run(const std::string& deck_path, const std::string& csv_path,
            const ModelConfig& model) {
    Circuit c = parse_deck(deck_path);
    if (c.analyses.empty()) throw UsageError("deck has no analysis directive");
    SolverOptions opts;
    opts.model = model;

    const Waveform* have_tran = nullptr;
    Waveform w;
    for (const auto& a : c.analyses) {
        if (std::holds_alternative<OpAnalysis>(a)) {
            DcResult r = dc_operating_point(c, opts);
            for (const auto& n : r.layout.node_names)
                std::cout << "v(" << n << ")=" << display_double(r.node_voltage(n))
                          << "\n";
            for (const auto& s : r.layout.source_names)
                std::cout << "i(" << s << ")=" << display_double(r.source_current(s))
                          << "\n";
        } else {
            const auto& tr = std::get<TranAnalysis>(a);
            w = run_transient(c, tr.step_s, tr.stop_s, opts);
            have_tran = &w;
            std::string csv = waveform_csv(w);
            if (!csv_path.empty()) write_file(csv_path, csv);
            else std::cout << csv;
        }
    }

    if (!c.measures.empty()) {
        if (!have_tran)
            throw MeasureError("deck has .measure directives but no .tran");
        double first_power = -1.0, worst_delay = -1.0;
        std::vector<std::pair<std::string, double>> results;
        for (const auto& m : c.measures) {
            if (const auto* ap = std::get_if<AvgPowerMeasure>(&m)) {
                double p = average_power(w, ap->source_name, w.time.front(),
                                         w.time.back());
                if (first_power < 0) first_power = p;
                results.emplace_back(ap->name, p);
            } else if (const auto* dl = std::get_if<DelayMeasure>(&m)) {
                double d = propagation_delay(w, dl->in_node, dl->out_node,
                                             deck_vdd(c), dl->fraction);
                worst_delay = std::max(worst_delay, d);
                results.emplace_back(dl->name, d);
            }
        }
        for (const auto& m : c.measures)
            if (const auto* pm = std::get_if<PdpMeasure>(&m)) {
                if (first_power < 0 || worst_delay < 0)
                    throw MeasureError(
                        "PDP measurement needs AVG power and DELAY results");
                results.emplace_back(pm->name, pdp(first_power, worst_delay));
            }
        for (const auto& [name, value] : results)
            std::cout << name << "=" << format_double(value) << "\n";
    }
    return 0;
}

size_t closest_index(const std::vector<double>& axis, double want) {
    size_t best = 0;
    for (size_t i = 1; i < axis.size(); ++i)
        if (std::abs(axis[i] - want) < std::abs(axis[best] - want)) best = i;
    return best;
}

int cmd_sweep(const std::string& style, const CellFlags& flags,
              const std::string& vdd_range, const std::string& temp_range,
              const std::string& csv_path, const std::string& fixture_path,
              bool check_trends, const ModelConfig& model, int verbosity) {
    CellFactory factory = factory_for(style);
    CellConfig base = cell_config(flags);
    Stimulus stim = stimulus(flags);
    std::vector<double> vdd_axis = parse_range(vdd_range, "--vdd");
    std::vector<double> temp_axis = parse_range(temp_range, "--temp");
    SolverOptions opts;
    opts.model = model;

    if (verbosity > 0)
        std::cerr << "sweep: " << vdd_axis.size() << " x " << temp_axis.size()
                  << " cells\n";
    SweepTable table = run_sweep(factory, base, stim, vdd_axis, temp_axis, opts);

    std::string csv = sweep_csv(table);
    if (!csv_path.empty()) write_file(csv_path, csv);
    else std::cout << csv;

    bool all_checks_pass = true;

    size_t it27 = closest_index(temp_axis, 27.0);
    size_t iv09 = closest_index(vdd_axis, 0.9);
    auto column = [&](size_t it, auto get) {
        std::vector<double> v;
        for (size_t iv = 0; iv < vdd_axis.size(); ++iv)
            v.push_back(get(table.cells[iv][it]));
        return v;
    };
    std::vector<double> power_col =
        column(it27, [](const Measurements& m) { return m.power_W; });
    std::vector<double> delay_col =
        column(it27, [](const Measurements& m) { return m.delay_s; });
    std::vector<double> power_row;
    for (size_t it = 0; it < temp_axis.size(); ++it)
        power_row.push_back(table.cells[iv09][it].power_W);

    auto ordered = [](const std::vector<double>& v, bool increasing) {
        int ok = 0;
        for (size_t i = 0; i + 1 < v.size(); ++i)
            if (increasing ? v[i] < v[i + 1] : v[i] > v[i + 1]) ++ok;
        return ok;
    };
    auto spread = [](const std::vector<double>& v) {
        double lo = *std::min_element(v.begin(), v.end());
        double hi = *std::max_element(v.begin(), v.end());
        double mean = 0;
        for (double x : v) mean += x;
        mean /= v.size();
        return mean > 0 ? (hi - lo) / mean : 0.0;
    };

    int n_pairs = static_cast<int>(vdd_axis.size()) - 1;
    int p_ok = ordered(power_col, true);
    int d_ok = ordered(delay_col, false);
    bool p_pass = p_ok == n_pairs;
    bool d_pass = d_ok == n_pairs;
    std::cout << "trend power_vs_vdd at " << format_double(temp_axis[it27])
              << "C: increasing " << p_ok << "/" << n_pairs << " "
              << (p_pass ? "PASS" : "FAIL") << "\n";
    std::cout << "trend delay_vs_vdd at " << format_double(temp_axis[it27])
              << "C: decreasing " << d_ok << "/" << n_pairs << " "
              << (d_pass ? "PASS" : "FAIL") << "\n";
    double temp_spread = spread(power_row);
    double vdd_spread = spread(power_col);
    bool flat_pass = temp_axis.size() < 2 || vdd_axis.size() < 2 ||
                     temp_spread < vdd_spread;
    std::cout << "trend power_temp_flatness at "
              << format_double(vdd_axis[iv09]) << "V: spread "
              << format_double(temp_spread) << " vs vdd spread "
              << format_double(vdd_spread) << " "
              << (flat_pass ? "PASS" : "FAIL") << "\n";
    if (check_trends && !(p_pass && d_pass && flat_pass)) all_checks_pass = false;

    if (!fixture_path.empty()) {
        FixtureTables fixture = load_fixture_tables(fixture_path);
        double err = max_pdp_cross_error(fixture);
        bool fix_pass = err <= 1e-3;
        std::cout << "fixture pdp_cross_check: max relative error "
                  << format_double(err) << " " << (fix_pass ? "PASS" : "FAIL")
                  << "\n";
        if (!fix_pass) all_checks_pass = false;
    }
    return all_checks_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CNTFET full-adder studio: generate, verify, simulate, sweep"};
    app.require_subcommand(1);

    std::string config_path;
    int verbose = 0;
    bool quiet = false;
    app.add_option("--config", config_path,
                   "Model config file (key=value lines)");
    app.add_flag("-v", verbose, "More progress output");
    app.add_flag("-q", quiet, "Less output");

    auto* gen = app.add_subcommand("gen", "Generate a cell netlist");
    std::string gen_style;
    std::string gen_out;
    bool gen_stdout = false;
    CellFlags gen_flags;
    gen->add_option("style", gen_style,
                    "proposed24 | proposed-buffered | majority-ref")
        ->required();
    gen->add_option("-o,--output", gen_out, "Output netlist path");
    gen->add_flag("--stdout", gen_stdout, "Write the netlist to stdout");
    add_cell_flags(gen, gen_flags);

    auto* verify = app.add_subcommand("verify", "Switch-level truth-table check");
    std::string verify_deck, verify_inputs = "a,b,c", verify_oracle = "full-adder";
    verify->add_option("deck", verify_deck, "Netlist file")->required();
    verify->add_option("--inputs", verify_inputs, "Input nodes a,b,c");
    verify->add_option("--oracle", verify_oracle, "full-adder | majority");

    auto* run = app.add_subcommand("run", "Run a deck's analyses");
    std::string run_deck, run_csv;
    run->add_option("deck", run_deck, "Netlist file")->required();
    run->add_option("-o,--csv", run_csv, "Waveform CSV output path");

    auto* sweep = app.add_subcommand("sweep", "VDD x temperature sweep");
    std::string sweep_style = "proposed-buffered";
    std::string sweep_vdd = "0.7:1.2:0.1", sweep_temp = "0:54:9";
    std::string sweep_csv_path, sweep_fixture;
    bool sweep_check_trends = false;
    CellFlags sweep_flags;
    sweep->add_option("style", sweep_style,
                      "proposed24 | proposed-buffered | majority-ref");
    sweep->add_option("--vdd", sweep_vdd, "VDD axis start:stop:step, V");
    sweep->add_option("--temp", sweep_temp, "Temperature axis start:stop:step, C");
    sweep->add_option("-o,--csv", sweep_csv_path, "Sweep CSV output path");
    sweep->add_option("--check-fixture", sweep_fixture,
                      "Reference tables CSV for the PDP cross check");
    sweep->add_flag("--check-trends", sweep_check_trends,
                    "Fail unless monotonicity and flatness checks pass");
    add_cell_flags(sweep, sweep_flags, /*operating_point=*/false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        ModelConfig model;
        if (!config_path.empty()) model = load_model_config(config_path);
        int verbosity = quiet ? 0 : verbose + 1;
        if (gen->parsed()) return cmd_gen(gen_style, gen_flags, gen_out, gen_stdout);
        if (verify->parsed())
            return cmd_verify(verify_deck, verify_inputs, verify_oracle);
        if (run->parsed()) return cmd_run(run_deck, run_csv, model);
        if (sweep->parsed())
            return cmd_sweep(sweep_style, sweep_flags, sweep_vdd, sweep_temp,
                             sweep_csv_path, sweep_fixture, sweep_check_trends,
                             model, verbosity - 1);
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
