#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nanosim/measure.hpp"
#include "nanosim/netlist.hpp"
#include "nanosim/solver.hpp"

using namespace nanosim;

namespace {

const std::string kFixtures = NANOSIM_FIXTURES;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), {}};
}

// Hand-built waveform over a two-node divider layout; node "in" doubles as
// the supply + terminal so source power is v(in) * -I(V1).
Waveform synthetic_wave(const std::vector<double>& time,
                        const std::vector<double>& v_in,
                        const std::vector<double>& v_out,
                        const std::vector<double>& i_src) {
    static const Circuit c = parse(
        ".title synthetic\n"
        ".temp 27\n"
        "V1 in 0 DC 1\n"
        "R1 in out 1k\n"
        "R2 out 0 1k\n"
        ".op\n"
        ".end\n");
    Waveform w;
    w.layout = MnaLayout::build(c);
    for (size_t k = 0; k < time.size(); ++k) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(w.layout.unknown_count());
        x[w.layout.node_row("in")] = v_in[k];
        x[w.layout.node_row("out")] = v_out[k];
        x[w.layout.source_row("V1")] = i_src[k];
        w.samples.push_back(x);
    }
    w.time = time;
    return w;
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

std::string temp_file(const char* name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path.string();
}

}  // namespace

TEST_CASE("average power of a constant draw is exact") {
    std::vector<double> t{0.0, 0.5, 1.0};
    Waveform w = synthetic_wave(t, {0.9, 0.9, 0.9}, {0, 0, 0},
                                {-1e-6, -1e-6, -1e-6});
    CHECK(average_power(w, "V1", 0.0, 1.0) ==
          doctest::Approx(0.9e-6).epsilon(1e-12));
}

TEST_CASE("average power interpolates window endpoints over a ramp") {
    std::vector<double> t{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> vin(5, 1.0), vout(5, 0.0), isrc(5);
    for (int k = 0; k < 5; ++k) isrc[k] = -1e-6 * t[k];  // p(t) = 1e-6 * t
    Waveform w = synthetic_wave(t, vin, vout, isrc);
    CHECK(average_power(w, "V1", 0.0, 1.0) ==
          doctest::Approx(0.5e-6).epsilon(1e-12));
    CHECK(average_power(w, "V1", 0.0, 0.5) ==
          doctest::Approx(0.25e-6).epsilon(1e-12));
    CHECK(average_power(w, "V1", 0.25, 0.75) ==
          doctest::Approx(0.5e-6).epsilon(1e-12));
    CHECK(average_power(w, "V1", 0.1, 0.9) ==
          doctest::Approx(0.5e-6).epsilon(1e-12));
}

TEST_CASE("average power window and source validation") {
    std::vector<double> t{0.0, 1.0};
    Waveform w = synthetic_wave(t, {1, 1}, {0, 0}, {-1e-6, -1e-6});
    CHECK_THROWS_AS(average_power(w, "VX", 0.0, 1.0), MeasureError);
    CHECK_THROWS_AS(average_power(w, "V1", 0.5, 0.5), MeasureError);
    CHECK_THROWS_AS(average_power(w, "V1", 1.0, 0.0), MeasureError);
    CHECK_THROWS_AS(average_power(w, "V1", -0.5, 1.0), MeasureError);
    CHECK_THROWS_AS(average_power(w, "V1", 0.0, 1.5), MeasureError);
    CHECK(message_of([&] { average_power(w, "VX", 0.0, 1.0); })
              .find("unknown source") != std::string::npos);

    Waveform single = synthetic_wave({0.0}, {1}, {0}, {0});
    CHECK(message_of([&] { average_power(single, "V1", 0.0, 1.0); })
              .find("fewer than 2 points") != std::string::npos);
}

TEST_CASE("propagation delay pairs each input event with a settled response") {
    std::vector<double> t;
    for (int k = 0; k <= 10; ++k) t.push_back(k);
    std::vector<double> in{0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0};
    std::vector<double> out{0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0};
    std::vector<double> zero(11, 0.0);
    Waveform w = synthetic_wave(t, in, out, zero);
    // rising: event 1.5 -> response 4.5; falling: event 6.5 -> response 9.5
    CHECK(propagation_delay(w, "in", "out", 1.0, 0.5) == doctest::Approx(3.0));
    // a window keeps only the falling event; its response may lie past it
    CHECK(propagation_delay(w, "in", "out", 1.0, 0.5, 6.0, 10.0) ==
          doctest::Approx(3.0));
    CHECK(propagation_delay(w, "in", "out", 1.0, 0.5, 0.0, 4.0) ==
          doctest::Approx(3.0));
    // a node measured against itself responds instantly
    CHECK(propagation_delay(w, "in", "in", 1.0, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("unsettled output glitches are skipped") {
    std::vector<double> t;
    for (int k = 0; k <= 10; ++k) t.push_back(k);
    std::vector<double> in{0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1};
    // chatter inside (0.1, 0.9) never settles; the real edge lands at 5.75
    std::vector<double> out{0, 0, 0.6, 0.2, 0.6, 0.2, 0.6, 1, 1, 1, 1};
    std::vector<double> zero(11, 0.0);
    Waveform w = synthetic_wave(t, in, out, zero);
    CHECK(propagation_delay(w, "in", "out", 1.0, 0.5) == doctest::Approx(4.25));
}

TEST_CASE("delay measurement failure modes") {
    std::vector<double> t;
    for (int k = 0; k <= 10; ++k) t.push_back(k);
    std::vector<double> in{0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1};
    std::vector<double> flat(11, 0.0);
    std::vector<double> glitchy{0, 0, 0.6, 0.4, 0.6, 0.4, 0.6, 0.4, 0.6, 0.4, 0.6};
    Waveform w_flat = synthetic_wave(t, in, flat, flat);
    Waveform w_glitch = synthetic_wave(t, in, glitchy, flat);

    CHECK_THROWS_AS(propagation_delay(w_flat, "in", "out", 1.0, 0.5),
                    MeasureError);
    CHECK(message_of([&] { propagation_delay(w_glitch, "in", "out", 1.0, 0.5); })
              .find("never settles after the input event at t=") !=
          std::string::npos);
    // input that never crosses the threshold
    Waveform w_quiet = synthetic_wave(t, flat, in, flat);
    CHECK(message_of([&] { propagation_delay(w_quiet, "in", "out", 1.0, 0.5); })
              .find("never crosses") != std::string::npos);
    // bad fraction and vdd
    CHECK_THROWS_AS(propagation_delay(w_flat, "in", "in", 1.0, 0.0),
                    MeasureError);
    CHECK_THROWS_AS(propagation_delay(w_flat, "in", "in", 1.0, 1.0),
                    MeasureError);
    CHECK_THROWS_AS(propagation_delay(w_flat, "in", "in", 0.0, 0.5),
                    MeasureError);
    CHECK_THROWS_AS(propagation_delay(w_flat, "in", "bogus", 1.0, 0.5),
                    MeasureError);
}

TEST_CASE("rc charge gives the textbook half-vdd delay") {
    Circuit c = parse(read_file(kFixtures + "/decks/rc_step.ckt"));
    Waveform w = run_transient(c);
    // tau = 10k * 10f = 100 ps; ln(2) tau = 69.31 ps
    double d = propagation_delay(w, "in", "out", 1.0, 0.5);
    CHECK(d == doctest::Approx(std::log(2.0) * 100e-12).epsilon(0.02));
}

TEST_CASE("rc source energy matches C V^2 over the run") {
    Circuit c = parse(read_file(kFixtures + "/decks/rc_step.ckt"));
    Waveform w = run_transient(c);
    double span = w.time.back() - w.time.front();
    double p = average_power(w, "V1", w.time.front(), w.time.back());
    // the source delivers C*V^2 total: half stored, half burned in R
    CHECK(p * span == doctest::Approx(1e-14).epsilon(0.02));
}

TEST_CASE("measurements are stable under step refinement") {
    Circuit c = parse(read_file(kFixtures + "/decks/rc_step.ckt"));
    Waveform coarse = run_transient(c, 1e-12, 1e-9);
    Waveform fine = run_transient(c, 0.5e-12, 1e-9);
    double p0 = average_power(coarse, "V1", 0.0, 1e-9);
    double p1 = average_power(fine, "V1", 0.0, 1e-9);
    CHECK(p0 == doctest::Approx(p1).epsilon(0.01));
    double d0 = propagation_delay(coarse, "in", "out", 1.0, 0.5);
    double d1 = propagation_delay(fine, "in", "out", 1.0, 0.5);
    CHECK(d0 == doctest::Approx(d1).epsilon(0.01));
}

TEST_CASE("pdp multiplies and rejects nonsense") {
    CHECK(pdp(2e-9, 3e-10) == doctest::Approx(6e-19).epsilon(1e-15));
    CHECK(pdp(0.0, 1.0) == 0.0);
    CHECK_THROWS_AS(pdp(-1e-9, 1e-10), std::invalid_argument);
    CHECK_THROWS_AS(pdp(1e-9, -1e-10), std::invalid_argument);
    CHECK_THROWS_AS(pdp(std::nan(""), 1e-10), std::invalid_argument);
    CHECK_THROWS_AS(pdp(1e-9, HUGE_VAL), std::invalid_argument);
}

TEST_CASE("reference tables load complete and consistent") {
    FixtureTables t = load_fixture_tables(kFixtures + "/reference_tables.csv");
    REQUIRE(t.vdd_axis.size() == 6);
    REQUIRE(t.temp_axis.size() == 7);
    CHECK(t.vdd_axis.front() == 0.7);
    CHECK(t.vdd_axis.back() == 1.2);
    CHECK(t.temp_axis.front() == 0.0);
    CHECK(t.temp_axis.back() == 54.0);

    // spot values straight out of the file
    CHECK(t.power[0][0] == doctest::Approx(2.6936e-9).epsilon(1e-12));
    CHECK(t.delay[0][0] == doctest::Approx(1.3229e-10).epsilon(1e-12));
    CHECK(t.pdp[0][0] == doctest::Approx(3.5634e-19).epsilon(1e-12));
    CHECK(t.power[0][3] == doctest::Approx(2.6864e-9).epsilon(1e-12));
    CHECK(t.delay[0][3] == doctest::Approx(1.3077e-10).epsilon(1e-12));
    CHECK(t.pdp[0][3] == doctest::Approx(3.5130e-19).epsilon(1e-12));
    CHECK(t.delay[5][6] == doctest::Approx(1.0671e-10).epsilon(1e-12));
    CHECK(t.pdp[2][0] == doctest::Approx(6.9956e-19).epsilon(1e-12));

    // every pdp cell is the product of its power and delay cells
    double worst = max_pdp_cross_error(t);
    CHECK(worst <= 1e-3);
    CHECK(worst > 0.0);  // four-digit rounding leaves a nonzero residue

    // the quoted anchor reproduces the product to the table's precision
    CHECK(pdp(t.power[0][0], t.delay[0][0]) ==
          doctest::Approx(3.5634e-19).epsilon(1e-3));
    CHECK(pdp(2.6936e-9, 1.3229e-10) ==
          doctest::Approx(3.5634e-19).epsilon(1e-3));
}

TEST_CASE("malformed fixture files are rejected") {
    std::string good = read_file(kFixtures + "/reference_tables.csv");

    std::string bad_header = temp_file("nanosim_bad_header.csv",
                                       "vdd,temp,value\npower,0.7,0,1\n");
    CHECK(message_of([&] { load_fixture_tables(bad_header); })
              .find("bad fixture header") != std::string::npos);

    std::string bad_table = temp_file(
        "nanosim_bad_table.csv",
        "table,vdd_V,temp_C,value\nenergy,0.7,0,1e-9\n");
    CHECK(message_of([&] { load_fixture_tables(bad_table); })
              .find("unknown table") != std::string::npos);

    std::string bad_number = temp_file(
        "nanosim_bad_number.csv",
        "table,vdd_V,temp_C,value\npower,0.7,zero,1e-9\n");
    CHECK(message_of([&] { load_fixture_tables(bad_number); })
              .find("bad number") != std::string::npos);

    // drop one line: the grids no longer tile the axes
    size_t cut = good.find("delay,0.7,27");
    REQUIRE(cut != std::string::npos);
    size_t eol = good.find('\n', cut);
    std::string incomplete_text = good.substr(0, cut) + good.substr(eol + 1);
    std::string incomplete =
        temp_file("nanosim_incomplete.csv", incomplete_text);
    CHECK(message_of([&] { load_fixture_tables(incomplete); })
              .find("incomplete") != std::string::npos);

    std::string duplicate = temp_file(
        "nanosim_duplicate.csv",
        "table,vdd_V,temp_C,value\npower,0.7,0,1e-9\npower,0.7,0,2e-9\n");
    CHECK(message_of([&] { load_fixture_tables(duplicate); })
              .find("duplicate") != std::string::npos);

    CHECK_THROWS_AS(load_fixture_tables(kFixtures + "/does_not_exist.csv"),
                    MeasureError);
}

TEST_CASE("sweep axis validation happens before any simulation") {
    CellConfig cfg;
    Stimulus stim;
    CHECK_THROWS_AS(
        run_sweep(generate_proposed_fa, cfg, stim, {}, {27.0}), MeasureError);
    CHECK_THROWS_AS(
        run_sweep(generate_proposed_fa, cfg, stim, {0.9}, {}), MeasureError);
    CHECK_THROWS_AS(
        run_sweep(generate_proposed_fa, cfg, stim, {0.9, 0.8}, {27.0}),
        MeasureError);
    CHECK_THROWS_AS(
        run_sweep(generate_proposed_fa, cfg, stim, {0.9}, {27.0, 27.0}),
        MeasureError);
}

TEST_CASE("degenerate sweep equals a directly measured bench run") {
    CellConfig cfg;
    Stimulus stim;
    SolverOptions opts;
    SweepTable table =
        run_sweep(generate_proposed_fa, cfg, stim, {0.9}, {27.0}, opts);
    REQUIRE(table.cells.size() == 1);
    REQUIRE(table.cells[0].size() == 1);
    const Measurements& m = table.cells[0][0];

    GeneratedCell cell = generate_proposed_fa(cfg);
    Testbench tb = generate_testbench(cell, cfg, stim);
    Waveform w = run_transient(tb.circuit, opts);
    double p =
        average_power(w, tb.vdd_source, tb.window_start, tb.window_stop);
    double d = 0.0;
    for (const DelayMeasure& probe : tb.delay_probes)
        d = std::max(d, propagation_delay(w, probe.in_node, probe.out_node,
                                          cfg.vdd, probe.fraction,
                                          tb.window_start, tb.window_stop));
    CHECK(m.power_W == p);  // bit-identical: same deterministic pipeline
    CHECK(m.delay_s == d);
    CHECK(m.pdp_J == pdp(p, d));

    // sanity: the numbers live in physically plausible decades
    CHECK(p > 1e-12);
    CHECK(p < 1e-3);
    CHECK(d > 1e-13);
    CHECK(d < 1e-9);

    std::string csv = sweep_csv(table);
    CHECK(csv.rfind("vdd_V,temp_C,power_W,delay_s,pdp_J\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.find("0.90000000000000002,27,") != std::string::npos);
}

TEST_CASE("sweep csv is row-major with the vdd axis outermost") {
    SweepTable t;
    t.vdd_axis = {0.7, 0.8};
    t.temp_axis = {0.0, 9.0};
    t.cells = {{{1e-9, 1e-10, 1e-19}, {2e-9, 2e-10, 4e-19}},
               {{3e-9, 3e-10, 9e-19}, {4e-9, 4e-10, 1.6e-18}}};
    std::string csv = sweep_csv(t);
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos < csv.size()) {
        size_t nl = csv.find('\n', pos);
        lines.push_back(csv.substr(pos, nl - pos));
        pos = nl + 1;
    }
    REQUIRE(lines.size() == 5);
    CHECK(lines[1].rfind("0.69999999999999996,0,", 0) == 0);
    CHECK(lines[2].rfind("0.69999999999999996,9,", 0) == 0);
    CHECK(lines[3].rfind("0.80000000000000004,0,", 0) == 0);
    CHECK(lines[4].rfind("0.80000000000000004,9,", 0) == 0);
    CHECK(lines[1].find("1.0000000000000001e-09,") != std::string::npos);
}
