#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nanosim/cells.hpp"
#include "nanosim/solver.hpp"

namespace nanosim {

class MeasureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mean power delivered by a source over [t0, t1]: trapezoidal quadrature of
/// v_src * i_delivered on the waveform samples, window endpoints
/// interpolated. i_delivered flows out of the + terminal into the circuit.
double average_power(const Waveform& w, const std::string& source,
                     double t0, double t1);

/// Worst-case input-to-output interval: every crossing of fraction*vdd on
/// the input inside [t0, t1] pairs with the next output crossing of the same
/// threshold that settles (reaches within 10% of the destination rail before
/// recrossing); returns the maximum interval. An event preempted by the next
/// input crossing before any settled response is skipped (the output was not
/// asked to move); if no event at all gets a response, throws MeasureError.
double propagation_delay(const Waveform& w, const std::string& in_node,
                         const std::string& out_node, double vdd,
                         double fraction, double t0, double t1);

/// Window-free overload covering the whole waveform span.
double propagation_delay(const Waveform& w, const std::string& in_node,
                         const std::string& out_node, double vdd,
                         double fraction = 0.5);

/// Power-delay product; both factors must be finite and non-negative.
double pdp(double power_W, double delay_s);

struct Measurements {
    double power_W = 0.0;
    double delay_s = 0.0;
    double pdp_J = 0.0;
};

struct SweepTable {
    std::vector<double> vdd_axis;   // V, strictly increasing
    std::vector<double> temp_axis;  // Celsius, strictly increasing
    std::vector<std::vector<Measurements>> cells;  // [vdd][temp]
};

using CellFactory = std::function<GeneratedCell(const CellConfig&)>;

/// Simulates the factory's cell test bench at every (vdd, temp) grid point
/// and extracts power over the second stimulus window, worst-case delay over
/// both outputs, and their product. Cells run in parallel (capped by the
/// NANOSIM_THREADS environment variable) with placement fixed by grid index.
/// A failing cell aborts the sweep with its grid coordinates.
SweepTable run_sweep(const CellFactory& factory, const CellConfig& base,
                     const Stimulus& stim, const std::vector<double>& vdd_axis,
                     const std::vector<double>& temp_axis,
                     const SolverOptions& opts = {});

/// Header `vdd_V,temp_C,power_W,delay_s,pdp_J`; row-major, VDD outer.
std::string sweep_csv(const SweepTable& table);

/// Reference measurement grids, SI units, axes strictly increasing.
struct FixtureTables {
    std::vector<double> vdd_axis;
    std::vector<double> temp_axis;
    std::vector<std::vector<double>> power;  // [vdd][temp], W
    std::vector<std::vector<double>> delay;  // s
    std::vector<std::vector<double>> pdp;    // J
};

/// Reads a fixture CSV with columns `table,vdd_V,temp_C,value` (table one of
/// power/delay/pdp, values SI); all three grids must come back complete.
FixtureTables load_fixture_tables(const std::string& path);

/// Largest |pdp - power*delay| / pdp over the fixture grid.
double max_pdp_cross_error(const FixtureTables& tables);

}  // namespace nanosim
