#include <cmath>
#include <random>

#include "doctest.h"
#include "nanosim/device.hpp"
#include "nanosim/measure.hpp"
#include "nanosim/netlist.hpp"
#include "nanosim/solver.hpp"

using namespace nanosim;

namespace {

const std::string kDivider =
    "V1 1 0 DC 1\n"
    "R1 1 2 1k\n"
    "R2 2 0 1k\n"
    ".op\n"
    ".end\n";

const std::string kInverter =
    "VDD vdd 0 DC 0.9\n"
    "VIN in 0 DC 0\n"
    "MP1 out in vdd pfet n=19 m=0 tubes=3\n"
    "MN1 out in 0 nfet n=19 m=0 tubes=3\n"
    ".op\n"
    ".end\n";

const std::string kRc =
    "V1 in 0 PULSE(0 1 0 1p 1p 1 2)\n"
    "R1 in out 10k\n"
    "C1 out 0 10f\n"
    ".tran 1p 1n\n"
    ".end\n";

Circuit inverter_at(double vin) {
    Circuit c = parse(kInverter);
    for (auto& s : c.sources)
        if (s.name == "VIN") s.shape = DcShape{vin};
    return c;
}

}  // namespace

TEST_CASE("mna layout orders unknowns by first use") {
    Circuit c = parse(kDivider);
    MnaLayout layout = MnaLayout::build(c);
    REQUIRE(layout.node_names == std::vector<std::string>{"1", "2"});
    REQUIRE(layout.source_names == std::vector<std::string>{"V1"});
    CHECK(layout.unknown_count() == 3);
    CHECK(layout.node_row("0") == -1);
    CHECK(layout.node_row("1") == 0);
    CHECK(layout.node_row("2") == 1);
    CHECK(layout.source_row("V1") == 2);
    CHECK_THROWS(layout.node_row("nope"));
}

TEST_CASE("resistive divider solves exactly") {
    DcResult r = dc_operating_point(parse(kDivider));
    CHECK(std::fabs(r.node_voltage("1") - 1.0) <= 1e-9);
    CHECK(std::fabs(r.node_voltage("2") - 0.5) <= 1e-9);
    // supply delivers 0.5 mA; the stored branch current reads negative
    CHECK(r.source_current("V1") == doctest::Approx(-0.5e-3).epsilon(1e-6));
    CHECK(r.node_voltage("0") == 0.0);
}

TEST_CASE("linear circuits converge in exactly one newton iteration") {
    DcResult r = dc_operating_point(parse(kDivider));
    CHECK(r.newton_iterations == 1);
}

TEST_CASE("zero sources leave every node at zero") {
    Circuit c = parse(
        "V1 a 0 DC 0\n"
        "R1 a b 1k\n"
        "R2 b 0 2k\n"
        ".op\n"
        ".end\n");
    DcResult r = dc_operating_point(c);
    CHECK(r.node_voltage("a") == 0.0);
    CHECK(r.node_voltage("b") == 0.0);
}

TEST_CASE("single resistor stamps a 1x1 conductance") {
    Circuit c = parse("R1 1 0 10k\nV2 2 0 DC 0\nR2 2 0 1k\n.op\n.end\n");
    MnaLayout layout = MnaLayout::build(c);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.unknown_count());
    SystemMatrices sys = assemble_dc_system(c, layout, x);
    CHECK(sys.J(0, 0) == doctest::Approx(1.0 / 10e3).epsilon(1e-6));
    // off-diagonal coupling to the unrelated node is zero
    CHECK(sys.J(0, 1) == 0.0);
}

TEST_CASE("residual vanishes at the exact solution") {
    Circuit c = parse(kDivider);
    MnaLayout layout = MnaLayout::build(c);
    Eigen::VectorXd x(layout.unknown_count());
    x[layout.node_row("1")] = 1.0;
    x[layout.node_row("2")] = 0.5;
    x[layout.source_row("V1")] = -0.5e-3;
    SystemMatrices sys = assemble_dc_system(c, layout, x);
    for (int i = 0; i < sys.f.size(); ++i)
        CHECK(std::fabs(sys.f[i]) <= 1e-9);
}

TEST_CASE("capacitor-only node is reported as singular") {
    Circuit c = parse("C1 1 0 1p\nV2 2 0 DC 1\nR2 2 0 1k\n.op\n.end\n");
    CHECK_THROWS_AS(dc_operating_point(c), SolverError);
    try {
        dc_operating_point(c);
    } catch (const SolverError& e) {
        CHECK(std::string(e.what()).find("no dc path") != std::string::npos);
    }
}

TEST_CASE("cntfet inverter pins its static levels") {
    DcResult low_in = dc_operating_point(inverter_at(0.0));
    CHECK(low_in.node_voltage("out") >= 0.9 - 1e-3);
    CHECK(low_in.node_voltage("out") <= 0.9 + 1e-9);

    DcResult high_in = dc_operating_point(inverter_at(0.9));
    CHECK(high_in.node_voltage("out") <= 1e-3);
    CHECK(high_in.node_voltage("out") >= -1e-9);

    // mid-rail input keeps the output between the rails
    DcResult mid = dc_operating_point(inverter_at(0.45));
    CHECK(mid.node_voltage("out") > 0.0);
    CHECK(mid.node_voltage("out") < 0.9);
}

TEST_CASE("jacobian matches finite differences on a nonlinear circuit") {
    Circuit c = parse(
        "VDD vdd 0 DC 0.9\n"
        "VIN in 0 DC 0.45\n"
        "MP1 out in vdd pfet n=19 m=0 tubes=3\n"
        "MN1 out in 0 nfet n=19 m=0 tubes=3\n"
        "MN2 out2 out 0 nfet n=19 m=0 tubes=1\n"
        "R1 out2 vdd 100k\n"
        ".op\n"
        ".end\n");
    MnaLayout layout = MnaLayout::build(c);
    int n = layout.unknown_count();

    std::mt19937 rng(31);
    std::uniform_real_distribution<double> volt(-1.2, 1.2);
    const double h = 1e-6;
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = volt(rng);
        SystemMatrices sys = assemble_dc_system(c, layout, x);
        for (int j = 0; j < n; ++j) {
            Eigen::VectorXd xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            Eigen::VectorXd fp = assemble_dc_system(c, layout, xp).f;
            Eigen::VectorXd fm = assemble_dc_system(c, layout, xm).f;
            for (int i = 0; i < n; ++i) {
                double fd = (fp[i] - fm[i]) / (2 * h);
                double an = sys.J(i, j);
                CAPTURE(trial);
                CAPTURE(i);
                CAPTURE(j);
                CHECK(std::fabs(fd - an) <=
                      1e-4 * std::max(std::fabs(fd), std::fabs(an)) +
                          4 * 120e-6 * h);
            }
        }
    }
}

TEST_CASE("rc step response tracks the analytic charge curve") {
    Waveform w = run_transient(parse(kRc));
    REQUIRE(w.size() >= 1000);
    CHECK(w.time.front() == 0.0);
    const double tau = 100e-12;
    for (size_t k = 0; k < w.size(); ++k) {
        double t = w.time[k];
        double expected = 1.0 - std::exp(-t / tau);
        CHECK(std::fabs(w.node_at(k, "out") - expected) <= 0.01);
    }
    // final value within 1% of the source
    CHECK(w.node_at(w.size() - 1, "out") ==
          doctest::Approx(1.0 - std::exp(-10.0)).epsilon(0.01));
}

TEST_CASE("trapezoidal integration beats backward euler on the rc oracle") {
    Circuit c = parse(kRc);
    SolverOptions trap;
    SolverOptions be;
    be.integration = Integration::backward_euler;
    Waveform wt = run_transient(c, trap);
    Waveform wb = run_transient(c, be);
    const double tau = 100e-12;
    double errt = 0.0, errb = 0.0;
    for (size_t k = 0; k < wt.size(); ++k) {
        double expected = 1.0 - std::exp(-wt.time[k] / tau);
        errt = std::max(errt, std::fabs(wt.node_at(k, "out") - expected));
        errb = std::max(errb, std::fabs(wb.node_at(k, "out") - expected));
    }
    CHECK(errt < errb);
}

TEST_CASE("zero-amplitude stimulus keeps the waveform identically zero") {
    Circuit c = parse(
        "V1 in 0 PULSE(0 0 0 1p 1p 500p 2n)\n"
        "R1 in out 10k\n"
        "C1 out 0 10f\n"
        ".tran 10p 1n\n"
        ".end\n");
    Waveform w = run_transient(c);
    for (size_t k = 0; k < w.size(); ++k) {
        CHECK(w.node_at(k, "in") == 0.0);
        CHECK(w.node_at(k, "out") == 0.0);
        CHECK(w.source_current_at(k, "V1") == 0.0);
    }
}

TEST_CASE("initial conditions pin the t=0 solve only") {
    Circuit c = parse(
        "C1 a 0 10f ic=0.7\n"
        "R1 a 0 10k\n"
        ".tran 1p 1n\n"
        ".end\n");
    Waveform w = run_transient(c);
    CHECK(w.node_at(0, "a") == doctest::Approx(0.7).epsilon(1e-9));
    const double tau = 100e-12;
    for (size_t k = 0; k < w.size(); ++k) {
        double expected = 0.7 * std::exp(-w.time[k] / tau);
        CHECK(std::fabs(w.node_at(k, "a") - expected) <= 0.007);
    }
}

TEST_CASE("transient requires a tran directive and sane steps") {
    Circuit c = parse(kDivider);
    CHECK_THROWS_AS(run_transient(c), SolverError);
    Circuit rc = parse(kRc);
    CHECK_THROWS_AS(run_transient(rc, 0.0, 1e-9), SolverError);
    CHECK_THROWS_AS(run_transient(rc, 1e-12, 1e-13), SolverError);
}

TEST_CASE("step count lands on the stop time without overshoot") {
    Circuit c = parse(
        "V1 a 0 DC 1\n"
        "R1 a b 1k\n"
        "C1 b 0 1f\n"
        ".tran 1p 1n\n"
        ".end\n");
    Waveform w = run_transient(c);
    CHECK(w.size() == 1001);
    CHECK(w.time.back() == doctest::Approx(1e-9).epsilon(1e-12));
    Waveform w2 = run_transient(c, 3e-12, 1e-9);
    CHECK(w2.time.back() <= 1e-9 * (1 + 1e-9));
    CHECK(w2.time.back() > 1e-9 - 3.0000001e-12);
}

TEST_CASE("identical runs produce bit-identical waveforms") {
    Circuit c = parse(
        "VDD vdd 0 DC 0.9\n"
        "VIN in 0 PULSE(0 0.9 100p 10p 10p 900p 2n)\n"
        "MP1 out in vdd pfet n=19 m=0 tubes=3\n"
        "MN1 out in 0 nfet n=19 m=0 tubes=3\n"
        "CL out 0 2f\n"
        ".tran 1p 500p\n"
        ".end\n");
    Waveform a = run_transient(c);
    Waveform b = run_transient(c);
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) {
        CHECK(a.time[k] == b.time[k]);
        for (int i = 0; i < a.samples[k].size(); ++i)
            CHECK(a.samples[k][i] == b.samples[k][i]);
    }
}

TEST_CASE("energy is conserved through an inverter switching event") {
    Circuit c = parse(
        "VDD vdd 0 DC 0.9\n"
        "VIN in 0 PULSE(0 0.9 100p 10p 10p 900p 2n)\n"
        "MP1 out in vdd pfet n=19 m=0 tubes=3\n"
        "MN1 out in 0 nfet n=19 m=0 tubes=3\n"
        "CL out 0 2f\n"
        ".tran 1p 2n\n"
        ".end\n");
    Waveform w = run_transient(c);
    double span = w.time.back() - w.time.front();

    double e_source = 0.0;
    for (const char* src : {"VDD", "VIN"})
        e_source += average_power(w, src, w.time.front(), w.time.back()) * span;

    // dissipated in the two transistors, integrated by trapezoid
    ModelConfig cfg;
    CntfetParams pn = make_cntfet_params(Polarity::N, Chirality(19, 0), 3, cfg);
    CntfetParams pp = make_cntfet_params(Polarity::P, Chirality(19, 0), 3, cfg);
    double temp_K = 27.0 + 273.15;
    auto fet_power = [&](size_t k) {
        double vin = w.node_at(k, "in");
        double vout = w.node_at(k, "out");
        double vdd = w.node_at(k, "vdd");
        double in_ = drain_current(pn, vin, vout, temp_K, cfg) * vout;
        double ip = drain_current(pp, vin - vdd, vout - vdd, temp_K, cfg) *
                    (vout - vdd);
        return in_ + ip;
    };
    double e_fets = 0.0;
    for (size_t k = 0; k + 1 < w.size(); ++k)
        e_fets += (w.time[k + 1] - w.time[k]) *
                  (fet_power(k) + fet_power(k + 1)) / 2;

    // stored energy: explicit load plus the per-device gate split caps
    double gate_half = pn.gate_cap / 2;
    auto stored = [&](size_t k) {
        double vin = w.node_at(k, "in");
        double vout = w.node_at(k, "out");
        double vdd = w.node_at(k, "vdd");
        double e = 0.5 * 2e-15 * vout * vout;
        for (double dv : {vin - vout, vin - 0.0})  // N gate caps
            e += 0.5 * gate_half * dv * dv;
        for (double dv : {vin - vout, vin - vdd})  // P gate caps
            e += 0.5 * gate_half * dv * dv;
        return e;
    };
    double delta_stored = stored(w.size() - 1) - stored(0);

    double balance = e_source - e_fets - delta_stored;
    CHECK(std::fabs(balance) <= 0.02 * std::max(e_source, 1e-18));
}

TEST_CASE("waveform csv carries full precision and the layout header") {
    Circuit c = parse(kRc);
    Waveform w = run_transient(c, 1e-12, 5e-12);
    std::string csv = waveform_csv(w);
    CHECK(csv.rfind("time,in,out,I(V1)", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}
