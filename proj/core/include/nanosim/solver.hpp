#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nanosim/netlist.hpp"

namespace nanosim {

enum class Integration { trapezoidal, backward_euler };

struct SolverOptions {
    double abstol = 1e-12;  // A, absolute residual floor per KCL row
    double reltol = 1e-6;   // scales with the largest incident branch current
    double vntol = 1e-9;    // V, source constraint rows
    double gmin = 1e-12;    // S, every node to ground
    int max_newton_iters = 100;
    double max_step_V = 0.3;  // Newton update clamp, nonlinear circuits only
    int source_steps = 10;    // ramp length for the source-stepping fallback
    Integration integration = Integration::trapezoidal;
    ModelConfig model{};
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unknown ordering: non-ground node voltages in first-use order, then one
/// branch current per voltage source. Ground is row -1.
struct MnaLayout {
    std::vector<std::string> node_names;
    std::vector<std::string> source_names;
    // Terminal pair (+, -) of each source, aligned with source_names.
    std::vector<std::pair<std::string, std::string>> source_nodes;

    static MnaLayout build(const Circuit& c);

    int unknown_count() const {
        return static_cast<int>(node_names.size() + source_names.size());
    }
    /// Row of a node voltage; -1 for ground. Throws for unknown names.
    int node_row(const std::string& name) const;
    /// Row of a source branch current. Throws for unknown names.
    int source_row(const std::string& name) const;

private:
    std::unordered_map<std::string, int> node_index_;
    std::unordered_map<std::string, int> source_index_;
};

/// Jacobian and residual of the circuit equations at state x, sources held at
/// their t=0 values and capacitors open. f(x) = 0 at a dc solution.
struct SystemMatrices {
    Eigen::MatrixXd J;
    Eigen::VectorXd f;
};
SystemMatrices assemble_dc_system(const Circuit& c, const MnaLayout& layout,
                                  const Eigen::VectorXd& x,
                                  const SolverOptions& opts = {});

struct DcResult {
    MnaLayout layout;
    Eigen::VectorXd x;
    int newton_iterations = 0;  // linear solves performed

    double node_voltage(const std::string& name) const;
    /// Stored branch current: flows into the + terminal and through the
    /// source, so a supply delivering power reads negative.
    double source_current(const std::string& name) const;
};

/// Solves f(x) = 0 by damped Newton from zero, falling back to a gmin ladder
/// and then source stepping. Throws SolverError when the system is singular
/// or no strategy converges.
DcResult dc_operating_point(const Circuit& c, const SolverOptions& opts = {});

struct Waveform {
    MnaLayout layout;
    std::vector<double> time;
    std::vector<Eigen::VectorXd> samples;  // one state vector per time point

    size_t size() const { return time.size(); }
    double node_at(size_t step, const std::string& name) const;
    double source_current_at(size_t step, const std::string& name) const;
    std::vector<double> node_series(const std::string& name) const;
};

/// Fixed-step transient: trapezoidal integration with a backward-Euler first
/// step, time points t_k = k * step_s through stop_s. The initial point is a
/// dc solve with `ic=` capacitors held at their given voltages.
Waveform run_transient(const Circuit& c, double step_s, double stop_s,
                       const SolverOptions& opts = {});

/// Convenience: uses the circuit's transient analysis directive.
Waveform run_transient(const Circuit& c, const SolverOptions& opts = {});

/// Header `time,<node>,...,I(<source>),...`; one row per time point.
std::string waveform_csv(const Waveform& w);

}  // namespace nanosim
