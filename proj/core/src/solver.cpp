#include "nanosim/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>

namespace nanosim {

namespace {

// Circuit lowered to MNA rows. Node index -1 is ground.
struct ResEntry {
    int a, b;
    double g;  // S
};
struct CapEntry {
    int a, b;
    double c;  // F
    std::optional<double> ic;
};
struct FetEntry {
    int d, g, s;
    CntfetParams p;
};
struct SrcEntry {
    int p, m, row;
    const Source* src;
};

struct Compiled {
    std::vector<ResEntry> res;
    std::vector<CapEntry> caps;       // explicit capacitors
    std::vector<CapEntry> gate_caps;  // transistor gate halves, transient only
    std::vector<FetEntry> fets;
    std::vector<SrcEntry> srcs;
    int n_nodes = 0;
    int n_unknowns = 0;
    double temp_K = 300.15;
    ModelConfig model{};
};

Compiled compile(const Circuit& c, const MnaLayout& layout,
                 const SolverOptions& opts) {
    Compiled cc;
    cc.n_nodes = static_cast<int>(layout.node_names.size());
    cc.n_unknowns = layout.unknown_count();
    cc.temp_K = c.temp_C + 273.15;
    cc.model = opts.model;
    for (const auto& d : c.devices) {
        if (d.is_cntfet()) {
            const auto& f = d.cntfet();
            CntfetParams p;
            try {
                p = make_cntfet_params(f.polarity, f.chirality, f.tubes, cc.model);
            } catch (const std::exception& e) {
                throw SolverError("device '" + d.name + "': " + e.what());
            }
            int nd = layout.node_row(d.terminals[0]);
            int ng = layout.node_row(d.terminals[1]);
            int ns = layout.node_row(d.terminals[2]);
            cc.fets.push_back({nd, ng, ns, p});
            cc.gate_caps.push_back({ng, nd, p.gate_cap / 2, std::nullopt});
            cc.gate_caps.push_back({ng, ns, p.gate_cap / 2, std::nullopt});
        } else if (const auto* r = std::get_if<ResistorDevice>(&d.params)) {
            if (r->ohms <= 0)
                throw SolverError("device '" + d.name + "': resistance must be > 0");
            cc.res.push_back({layout.node_row(d.terminals[0]),
                              layout.node_row(d.terminals[1]), 1.0 / r->ohms});
        } else {
            const auto& cap = d.capacitor();
            if (cap.farads <= 0)
                throw SolverError("device '" + d.name +
                                  "': capacitance must be > 0");
            cc.caps.push_back({layout.node_row(d.terminals[0]),
                               layout.node_row(d.terminals[1]), cap.farads,
                               cap.initial_volts});
        }
    }
    for (size_t i = 0; i < c.sources.size(); ++i) {
        const Source& s = c.sources[i];
        cc.srcs.push_back({layout.node_row(s.node_plus),
                           layout.node_row(s.node_minus),
                           cc.n_nodes + static_cast<int>(i), &s});
    }
    return cc;
}

// Extra equality rows v_a - v_b = volts appended after the source rows.
struct Constraint {
    int a, b;
    double volts;
};

// Companion state of one capacitor between steps.
struct CapState {
    double g = 0.0;     // S
    double i_eq = 0.0;  // A
    double v_prev = 0.0;
    double i_prev = 0.0;
};

struct AssembleInput {
    double gmin = 1e-12;
    double alpha = 1.0;  // source scale
    double time = 0.0;
    bool with_caps = false;  // stamp capacitor companions
    const std::vector<CapState>* cap_states = nullptr;  // explicit then gate
    const std::vector<Constraint>* extra = nullptr;
};

struct Assembled {
    Eigen::MatrixXd J;
    Eigen::VectorXd f;
    Eigen::VectorXd scale;  // per node row, largest incident |current|
};

void assemble(const Compiled& cc, const AssembleInput& in,
              const Eigen::VectorXd& x, Assembled& out) {
    int extra = in.extra ? static_cast<int>(in.extra->size()) : 0;
    int n = cc.n_unknowns + extra;
    out.J.setZero(n, n);
    out.f.setZero(n);
    out.scale.setZero(cc.n_nodes);

    auto v_of = [&](int node) { return node < 0 ? 0.0 : x[node]; };
    auto bump_scale = [&](int node, double i) {
        if (node >= 0) out.scale[node] = std::max(out.scale[node], std::abs(i));
    };
    auto add_f = [&](int node, double i) {
        if (node >= 0) out.f[node] += i;
    };
    auto add_j = [&](int row, int col, double g) {
        if (row >= 0 && col >= 0) out.J(row, col) += g;
    };
    auto stamp_conductance = [&](int a, int b, double g, double i) {
        add_f(a, i);
        add_f(b, -i);
        add_j(a, a, g);
        add_j(b, b, g);
        add_j(a, b, -g);
        add_j(b, a, -g);
        bump_scale(a, i);
        bump_scale(b, i);
    };

    for (int i = 0; i < cc.n_nodes; ++i) {
        out.f[i] += in.gmin * x[i];
        out.J(i, i) += in.gmin;
    }
    for (const auto& r : cc.res) {
        double i = r.g * (v_of(r.a) - v_of(r.b));
        stamp_conductance(r.a, r.b, r.g, i);
    }
    if (in.with_caps) {
        auto stamp_cap = [&](const CapEntry& ce, const CapState& st) {
            double i = st.g * (v_of(ce.a) - v_of(ce.b)) - st.i_eq;
            stamp_conductance(ce.a, ce.b, st.g, i);
        };
        size_t k = 0;
        for (const auto& ce : cc.caps) stamp_cap(ce, (*in.cap_states)[k++]);
        for (const auto& ce : cc.gate_caps) stamp_cap(ce, (*in.cap_states)[k++]);
    }
    for (const auto& fe : cc.fets) {
        double vgs = v_of(fe.g) - v_of(fe.s);
        double vds = v_of(fe.d) - v_of(fe.s);
        DeviceEval ev = eval_cntfet(fe.p, vgs, vds, cc.temp_K, cc.model);
        add_f(fe.d, ev.id);
        add_f(fe.s, -ev.id);
        add_j(fe.d, fe.d, ev.g_ds);
        add_j(fe.d, fe.g, ev.g_m);
        add_j(fe.d, fe.s, -(ev.g_m + ev.g_ds));
        add_j(fe.s, fe.d, -ev.g_ds);
        add_j(fe.s, fe.g, -ev.g_m);
        add_j(fe.s, fe.s, ev.g_m + ev.g_ds);
        bump_scale(fe.d, ev.id);
        bump_scale(fe.s, ev.id);
    }
    for (const auto& se : cc.srcs) {
        double value = in.alpha * source_value(*se.src, in.time);
        double i = x[se.row];
        add_f(se.p, i);
        add_f(se.m, -i);
        add_j(se.p, se.row, 1.0);
        add_j(se.m, se.row, -1.0);
        out.f[se.row] = v_of(se.p) - v_of(se.m) - value;
        add_j(se.row, se.p, 1.0);
        add_j(se.row, se.m, -1.0);
        bump_scale(se.p, i);
        bump_scale(se.m, i);
    }
    if (in.extra) {
        for (int k = 0; k < extra; ++k) {
            const Constraint& ct = (*in.extra)[k];
            int row = cc.n_unknowns + k;
            double i = x[row];
            add_f(ct.a, i);
            add_f(ct.b, -i);
            add_j(ct.a, row, 1.0);
            add_j(ct.b, row, -1.0);
            out.f[row] = v_of(ct.a) - v_of(ct.b) - in.alpha * ct.volts;
            add_j(row, ct.a, 1.0);
            add_j(row, ct.b, -1.0);
            bump_scale(ct.a, i);
            bump_scale(ct.b, i);
        }
    }
}

bool converged(const Compiled& cc, const SolverOptions& opts,
               const Assembled& a) {
    int n = static_cast<int>(a.f.size());
    for (int i = 0; i < cc.n_nodes; ++i)
        if (std::abs(a.f[i]) > opts.abstol + opts.reltol * a.scale[i])
            return false;
    for (int i = cc.n_nodes; i < n; ++i)
        if (std::abs(a.f[i]) > opts.vntol) return false;
    return true;
}

// One Newton run; x carries the start point in and the solution out.
// Returns the number of linear solves, or -1 on no convergence.
int newton(const Compiled& cc, const SolverOptions& opts,
           const AssembleInput& in, Eigen::VectorXd& x) {
    Assembled a;
    bool clamp = !cc.fets.empty();
    for (int iter = 0; iter <= opts.max_newton_iters; ++iter) {
        assemble(cc, in, x, a);
        if (converged(cc, opts, a)) return iter;
        if (iter == opts.max_newton_iters) break;
        if (!a.J.allFinite() || !a.f.allFinite())
            throw SolverError("singular system: non-finite circuit equations");
        Eigen::VectorXd dx = a.J.partialPivLu().solve(-a.f);
        if (!dx.allFinite())
            throw SolverError("singular system: matrix factorization failed");
        if (clamp)
            for (int i = 0; i < cc.n_nodes; ++i)
                dx[i] = std::clamp(dx[i], -opts.max_step_V, opts.max_step_V);
        x += dx;
    }
    return -1;
}

// Every node needs a dc conduction path to ground: resistors, sources, and
// transistor drain-source channels conduct, capacitor plates do not (gates
// neither). Constraint rows count as conducting.
void check_dc_paths(const MnaLayout& layout, const Compiled& cc,
                    const std::vector<Constraint>* extra) {
    int n = cc.n_nodes;
    std::vector<std::vector<int>> adj(n);
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    auto edge = [&](int a, int b) {
        if (a < 0 && b < 0) return;
        if (a < 0 || b < 0) {
            int other = a < 0 ? b : a;
            if (!seen[other]) {
                seen[other] = 1;
                q.push(other);
            }
            return;
        }
        adj[a].push_back(b);
        adj[b].push_back(a);
    };
    for (const auto& r : cc.res) edge(r.a, r.b);
    for (const auto& s : cc.srcs) edge(s.p, s.m);
    for (const auto& fe : cc.fets) edge(fe.d, fe.s);
    if (extra)
        for (const auto& ct : *extra) edge(ct.a, ct.b);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                q.push(v);
            }
    }
    for (int i = 0; i < n; ++i)
        if (!seen[i])
            throw SolverError("singular system: node '" + layout.node_names[i] +
                              "' has no dc path to ground");
}

// Plain Newton, then a gmin ladder, then source stepping.
Eigen::VectorXd solve_dc(const Compiled& cc, const SolverOptions& opts,
                         const std::vector<Constraint>* extra, int& iters_out) {
    AssembleInput in;
    in.gmin = opts.gmin;
    in.extra = extra;
    int extra_n = extra ? static_cast<int>(extra->size()) : 0;
    int n = cc.n_unknowns + extra_n;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    int it = newton(cc, opts, in, x);
    if (it >= 0) {
        iters_out = it;
        return x;
    }

    x.setZero();
    int total = 0;
    bool ok = true;
    for (double g = 1e-3; g > opts.gmin * 1.000001; g /= 10) {
        AssembleInput step = in;
        step.gmin = g;
        it = newton(cc, opts, step, x);
        if (it < 0) {
            ok = false;
            break;
        }
        total += it;
    }
    if (ok) {
        it = newton(cc, opts, in, x);
        if (it >= 0) {
            iters_out = total + it;
            return x;
        }
    }

    x.setZero();
    total = 0;
    for (int k = 1; k <= opts.source_steps; ++k) {
        AssembleInput step = in;
        step.alpha = static_cast<double>(k) / opts.source_steps;
        it = newton(cc, opts, step, x);
        if (it < 0) throw SolverError("dc operating point did not converge");
        total += it;
    }
    iters_out = total;
    return x;
}

int lookup(const std::unordered_map<std::string, int>& map,
           const std::string& name, const char* kind) {
    auto it = map.find(name);
    if (it == map.end())
        throw std::out_of_range(std::string("unknown ") + kind + " '" + name +
                                "'");
    return it->second;
}

}  // namespace

MnaLayout MnaLayout::build(const Circuit& c) {
    MnaLayout l;
    for (const auto& n : c.nodes()) {
        if (n == kGroundNode) continue;
        l.node_index_.emplace(n, static_cast<int>(l.node_names.size()));
        l.node_names.push_back(n);
    }
    for (const auto& s : c.sources) {
        l.source_index_.emplace(
            s.name, static_cast<int>(l.node_names.size() + l.source_names.size()));
        l.source_names.push_back(s.name);
        l.source_nodes.emplace_back(s.node_plus, s.node_minus);
    }
    return l;
}

int MnaLayout::node_row(const std::string& name) const {
    if (name == kGroundNode) return -1;
    return lookup(node_index_, name, "node");
}

int MnaLayout::source_row(const std::string& name) const {
    return lookup(source_index_, name, "source");
}

SystemMatrices assemble_dc_system(const Circuit& c, const MnaLayout& layout,
                                  const Eigen::VectorXd& x,
                                  const SolverOptions& opts) {
    Compiled cc = compile(c, layout, opts);
    if (x.size() != cc.n_unknowns)
        throw std::invalid_argument("state vector has wrong size");
    AssembleInput in;
    in.gmin = opts.gmin;
    Assembled a;
    assemble(cc, in, x, a);
    return {std::move(a.J), std::move(a.f)};
}

double DcResult::node_voltage(const std::string& name) const {
    int row = layout.node_row(name);
    return row < 0 ? 0.0 : x[row];
}

double DcResult::source_current(const std::string& name) const {
    return x[layout.source_row(name)];
}

DcResult dc_operating_point(const Circuit& c, const SolverOptions& opts) {
    MnaLayout layout = MnaLayout::build(c);
    Compiled cc = compile(c, layout, opts);
    check_dc_paths(layout, cc, nullptr);
    DcResult r;
    r.layout = std::move(layout);
    r.x = solve_dc(cc, opts, nullptr, r.newton_iterations);
    return r;
}

double Waveform::node_at(size_t step, const std::string& name) const {
    int row = layout.node_row(name);
    return row < 0 ? 0.0 : samples.at(step)[row];
}

double Waveform::source_current_at(size_t step, const std::string& name) const {
    return samples.at(step)[layout.source_row(name)];
}

std::vector<double> Waveform::node_series(const std::string& name) const {
    int row = layout.node_row(name);
    std::vector<double> out(samples.size());
    for (size_t i = 0; i < samples.size(); ++i)
        out[i] = row < 0 ? 0.0 : samples[i][row];
    return out;
}

Waveform run_transient(const Circuit& c, double step_s, double stop_s,
                       const SolverOptions& opts) {
    if (step_s <= 0) throw SolverError("transient time step must be > 0");
    if (stop_s < step_s)
        throw SolverError("transient stop time shorter than one step");
    MnaLayout layout = MnaLayout::build(c);
    Compiled cc = compile(c, layout, opts);

    std::vector<Constraint> ic_rows;
    for (const auto& ce : cc.caps)
        if (ce.ic) ic_rows.push_back({ce.a, ce.b, *ce.ic});
    check_dc_paths(layout, cc, &ic_rows);

    int iters = 0;
    Eigen::VectorXd x0 =
        solve_dc(cc, opts, ic_rows.empty() ? nullptr : &ic_rows, iters);

    Waveform w;
    w.layout = layout;
    Eigen::VectorXd x = x0.head(cc.n_unknowns);
    w.time.push_back(0.0);
    w.samples.push_back(x);

    auto v_of = [&](int node) { return node < 0 ? 0.0 : x[node]; };
    std::vector<CapState> states;
    auto init_state = [&](const CapEntry& ce) {
        CapState st;
        st.v_prev = v_of(ce.a) - v_of(ce.b);
        states.push_back(st);
    };
    for (const auto& ce : cc.caps) init_state(ce);
    for (const auto& ce : cc.gate_caps) init_state(ce);

    // Last point stays at or before stop_s; the slack absorbs binary
    // representation of decimal steps.
    long long steps =
        static_cast<long long>(std::floor(stop_s / step_s * (1 + 1e-12) + 1e-9));

    for (long long k = 1; k <= steps; ++k) {
        double t = static_cast<double>(k) * step_s;
        // Backward Euler opens the transient, trapezoidal after that.
        bool be = (k == 1) || opts.integration == Integration::backward_euler;
        size_t idx = 0;
        auto prep = [&](const CapEntry& ce) {
            CapState& st = states[idx++];
            st.g = (be ? 1.0 : 2.0) * ce.c / step_s;
            st.i_eq = st.g * st.v_prev + (be ? 0.0 : st.i_prev);
        };
        for (const auto& ce : cc.caps) prep(ce);
        for (const auto& ce : cc.gate_caps) prep(ce);

        AssembleInput in;
        in.gmin = opts.gmin;
        in.time = t;
        in.with_caps = true;
        in.cap_states = &states;
        int it = newton(cc, opts, in, x);
        if (it < 0)
            throw SolverError("transient did not converge at t=" +
                              format_double(t));

        idx = 0;
        auto accept = [&](const CapEntry& ce) {
            CapState& st = states[idx++];
            double v = v_of(ce.a) - v_of(ce.b);
            st.i_prev = st.g * v - st.i_eq;
            st.v_prev = v;
        };
        for (const auto& ce : cc.caps) accept(ce);
        for (const auto& ce : cc.gate_caps) accept(ce);

        w.time.push_back(t);
        w.samples.push_back(x);
    }
    return w;
}

Waveform run_transient(const Circuit& c, const SolverOptions& opts) {
    for (const auto& a : c.analyses)
        if (const auto* tr = std::get_if<TranAnalysis>(&a))
            return run_transient(c, tr->step_s, tr->stop_s, opts);
    throw SolverError("circuit has no transient analysis");
}

std::string waveform_csv(const Waveform& w) {
    std::ostringstream out;
    out << "time";
    for (const auto& n : w.layout.node_names) out << ',' << n;
    for (const auto& s : w.layout.source_names) out << ",I(" << s << ')';
    out << '\n';
    char buf[40];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (size_t k = 0; k < w.time.size(); ++k) {
        emit(w.time[k]);
        for (int i = 0; i < w.samples[k].size(); ++i) {
            out << ',';
            emit(w.samples[k][i]);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace nanosim
