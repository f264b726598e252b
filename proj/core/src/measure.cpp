#include "nanosim/measure.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace nanosim {

namespace {

void check_window(const Waveform& w, double t0, double t1) {
    if (w.time.size() < 2) throw MeasureError("waveform has fewer than 2 points");
    if (!(t1 > t0)) throw MeasureError("degenerate measurement window");
    double span = w.time.back() - w.time.front();
    double slack = 1e-9 * std::max(span, 1e-30);
    if (t0 < w.time.front() - slack || t1 > w.time.back() + slack)
        throw MeasureError("measurement window outside waveform span");
}

double lerp_at(const std::vector<double>& time, const std::vector<double>& v,
               size_t k, double t) {
    double t0 = time[k], t1 = time[k + 1];
    if (t1 == t0) return v[k];
    double u = (t - t0) / (t1 - t0);
    return v[k] + (v[k + 1] - v[k]) * u;
}

struct Crossing {
    double t;
    bool rising;
};

// Half-open threshold convention so a sample landing exactly on the
// threshold produces one crossing, not two.
std::vector<Crossing> find_crossings(const std::vector<double>& time,
                                     const std::vector<double>& v, double th) {
    std::vector<Crossing> out;
    for (size_t k = 0; k + 1 < v.size(); ++k) {
        bool rising = v[k] < th && v[k + 1] >= th;
        bool falling = v[k] > th && v[k + 1] <= th;
        if (!rising && !falling) continue;
        double t = time[k];
        if (v[k + 1] != v[k])
            t += (th - v[k]) / (v[k + 1] - v[k]) * (time[k + 1] - time[k]);
        out.push_back({t, rising});
    }
    return out;
}

}  // namespace

double average_power(const Waveform& w, const std::string& source, double t0,
                     double t1) {
    check_window(w, t0, t1);
    size_t idx = 0;
    for (; idx < w.layout.source_names.size(); ++idx)
        if (w.layout.source_names[idx] == source) break;
    if (idx == w.layout.source_names.size())
        throw MeasureError("unknown source '" + source + "'");
    int i_row = w.layout.source_row(source);
    int p_row = w.layout.node_row(w.layout.source_nodes[idx].first);
    int m_row = w.layout.node_row(w.layout.source_nodes[idx].second);

    std::vector<double> p(w.size());
    for (size_t k = 0; k < w.size(); ++k) {
        const auto& x = w.samples[k];
        double v = (p_row < 0 ? 0.0 : x[p_row]) - (m_row < 0 ? 0.0 : x[m_row]);
        p[k] = v * -x[i_row];  // stored current enters the + terminal
    }

    double energy = 0.0;
    for (size_t k = 0; k + 1 < w.size(); ++k) {
        double lo = std::max(w.time[k], t0);
        double hi = std::min(w.time[k + 1], t1);
        if (hi <= lo) continue;
        double p_lo = lerp_at(w.time, p, k, lo);
        double p_hi = lerp_at(w.time, p, k, hi);
        energy += (hi - lo) * (p_lo + p_hi) / 2;
    }
    return energy / (t1 - t0);
}

double propagation_delay(const Waveform& w, const std::string& in_node,
                         const std::string& out_node, double vdd,
                         double fraction, double t0, double t1) {
    check_window(w, t0, t1);
    if (!(vdd > 0)) throw MeasureError("vdd must be > 0");
    if (!(fraction > 0 && fraction < 1))
        throw MeasureError("fraction must lie in (0, 1)");
    std::vector<double> in_v, out_v;
    try {
        in_v = w.node_series(in_node);
        out_v = w.node_series(out_node);
    } catch (const std::out_of_range& e) {
        throw MeasureError(e.what());
    }

    double th = fraction * vdd;
    double band = 0.1 * vdd;

    std::vector<Crossing> all_events = find_crossings(w.time, in_v, th);
    std::vector<size_t> events;  // indices of crossings inside the window
    for (size_t i = 0; i < all_events.size(); ++i)
        if (all_events[i].t >= t0 && all_events[i].t <= t1) events.push_back(i);
    if (events.empty())
        throw MeasureError("input '" + in_node + "' never crosses " +
                           format_double(th) + " V in the window");

    // A crossing settles when the output reaches within 10% of the rail it
    // is heading to before coming back over the threshold.
    std::vector<Crossing> responses = find_crossings(w.time, out_v, th);
    std::vector<char> settled(responses.size(), 0);
    for (size_t j = 0; j < responses.size(); ++j) {
        double target = responses[j].rising ? vdd - band : band;
        for (size_t k = 0; k + 1 < w.time.size(); ++k) {
            if (w.time[k + 1] <= responses[j].t) continue;
            double v = out_v[k + 1];
            if (responses[j].rising ? v >= target : v <= target) {
                settled[j] = 1;
                break;
            }
            if (responses[j].rising ? v < th : v > th) break;
        }
    }

    // An event whose response has not arrived by the time the input moves
    // again is preempted: the output was not asked to change, or the later
    // event owns the transition. Only a total absence of responses is an
    // error.
    double worst = -1.0;
    double first_orphan = 0.0;
    bool have_orphan = false;
    for (size_t ei : events) {
        const Crossing& e = all_events[ei];
        double next_event = ei + 1 < all_events.size()
                                ? all_events[ei + 1].t
                                : std::numeric_limits<double>::infinity();
        double matched = -1.0;
        for (size_t j = 0; j < responses.size(); ++j) {
            if (!settled[j] || responses[j].t < e.t) continue;
            if (responses[j].t < next_event) matched = responses[j].t - e.t;
            break;
        }
        if (matched < 0) {
            if (!have_orphan) {
                first_orphan = e.t;
                have_orphan = true;
            }
            continue;
        }
        worst = std::max(worst, matched);
    }
    if (worst < 0)
        throw MeasureError("output '" + out_node +
                           "' never settles after the input event at t=" +
                           format_double(first_orphan));
    return worst;
}

double propagation_delay(const Waveform& w, const std::string& in_node,
                         const std::string& out_node, double vdd,
                         double fraction) {
    return propagation_delay(w, in_node, out_node, vdd, fraction,
                             w.time.front(), w.time.back());
}

double pdp(double power_W, double delay_s) {
    if (!std::isfinite(power_W) || !std::isfinite(delay_s) || power_W < 0 ||
        delay_s < 0)
        throw std::invalid_argument("pdp needs finite non-negative inputs");
    return power_W * delay_s;
}

SweepTable run_sweep(const CellFactory& factory, const CellConfig& base,
                     const Stimulus& stim, const std::vector<double>& vdd_axis,
                     const std::vector<double>& temp_axis,
                     const SolverOptions& opts) {
    auto check_axis = [](const std::vector<double>& a, const char* name) {
        if (a.empty()) throw MeasureError(std::string(name) + " axis is empty");
        for (size_t i = 0; i + 1 < a.size(); ++i)
            if (!(a[i] < a[i + 1]))
                throw MeasureError(std::string(name) +
                                   " axis must be strictly increasing");
    };
    check_axis(vdd_axis, "vdd");
    check_axis(temp_axis, "temp");

    SweepTable table;
    table.vdd_axis = vdd_axis;
    table.temp_axis = temp_axis;
    table.cells.assign(vdd_axis.size(),
                       std::vector<Measurements>(temp_axis.size()));

    size_t tasks = vdd_axis.size() * temp_axis.size();
    unsigned threads = std::thread::hardware_concurrency();
    if (threads == 0) threads = 1;
    if (const char* env = std::getenv("NANOSIM_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) threads = std::min<unsigned>(threads, cap);
    }
    threads = std::min<unsigned>(threads, tasks);

    std::atomic<size_t> next{0};
    std::mutex err_mutex;
    std::string first_error;
    std::atomic<bool> failed{false};

    auto worker = [&]() {
        for (;;) {
            size_t k = next.fetch_add(1);
            if (k >= tasks || failed.load()) return;
            size_t iv = k / temp_axis.size();
            size_t it = k % temp_axis.size();
            try {
                CellConfig cfg = base;
                cfg.vdd = vdd_axis[iv];
                cfg.temp_C = temp_axis[it];
                GeneratedCell cell = factory(cfg);
                Testbench tb = generate_testbench(cell, cfg, stim);
                Waveform w = run_transient(tb.circuit, opts);
                double p = average_power(w, tb.vdd_source, tb.window_start,
                                         tb.window_stop);
                double d = 0.0;
                for (const DelayMeasure& probe : tb.delay_probes)
                    d = std::max(d, propagation_delay(
                                        w, probe.in_node, probe.out_node,
                                        cfg.vdd, probe.fraction,
                                        tb.window_start, tb.window_stop));
                table.cells[iv][it] = {p, d, pdp(p, d)};
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (first_error.empty())
                    first_error = "sweep cell vdd=" + format_double(vdd_axis[iv]) +
                                  " temp=" + format_double(temp_axis[it]) + ": " +
                                  e.what();
                failed.store(true);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failed.load()) throw MeasureError(first_error);
    return table;
}

std::string sweep_csv(const SweepTable& table) {
    std::ostringstream out;
    out << "vdd_V,temp_C,power_W,delay_s,pdp_J\n";
    char buf[40];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (size_t iv = 0; iv < table.vdd_axis.size(); ++iv)
        for (size_t it = 0; it < table.temp_axis.size(); ++it) {
            const Measurements& m = table.cells[iv][it];
            emit(table.vdd_axis[iv]);
            out << ',';
            emit(table.temp_axis[it]);
            out << ',';
            emit(m.power_W);
            out << ',';
            emit(m.delay_s);
            out << ',';
            emit(m.pdp_J);
            out << '\n';
        }
    return out.str();
}

FixtureTables load_fixture_tables(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeasureError("cannot open fixture file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw MeasureError("empty fixture file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "table,vdd_V,temp_C,value")
        throw MeasureError("bad fixture header: '" + line + "'");

    struct Row {
        int which;
        double vdd, temp, value;
    };
    std::vector<Row> rows;
    std::set<double> vdds, temps;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string name, f1, f2, f3;
        if (!std::getline(ls, name, ',') || !std::getline(ls, f1, ',') ||
            !std::getline(ls, f2, ',') || !std::getline(ls, f3))
            throw MeasureError("fixture line " + std::to_string(line_no) +
                               ": expected 4 fields");
        int which = name == "power" ? 0 : name == "delay" ? 1
                                      : name == "pdp"     ? 2
                                                          : -1;
        if (which < 0)
            throw MeasureError("fixture line " + std::to_string(line_no) +
                               ": unknown table '" + name + "'");
        auto num = [&](const std::string& s) {
            char* end = nullptr;
            double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
                throw MeasureError("fixture line " + std::to_string(line_no) +
                                   ": bad number '" + s + "'");
            return v;
        };
        Row r{which, num(f1), num(f2), num(f3)};
        rows.push_back(r);
        vdds.insert(r.vdd);
        temps.insert(r.temp);
    }

    FixtureTables t;
    t.vdd_axis.assign(vdds.begin(), vdds.end());
    t.temp_axis.assign(temps.begin(), temps.end());
    size_t nv = t.vdd_axis.size(), nt = t.temp_axis.size();
    auto blank = std::vector<std::vector<double>>(
        nv, std::vector<double>(nt, std::nan("")));
    t.power = blank;
    t.delay = blank;
    t.pdp = blank;
    auto index_of = [](const std::vector<double>& axis, double v) {
        return std::lower_bound(axis.begin(), axis.end(), v) - axis.begin();
    };
    for (const Row& r : rows) {
        auto& grid = r.which == 0 ? t.power : r.which == 1 ? t.delay : t.pdp;
        double& cell = grid[index_of(t.vdd_axis, r.vdd)][index_of(t.temp_axis, r.temp)];
        if (!std::isnan(cell))
            throw MeasureError("duplicate fixture cell vdd=" +
                               format_double(r.vdd) + " temp=" +
                               format_double(r.temp));
        cell = r.value;
    }
    for (const auto* grid : {&t.power, &t.delay, &t.pdp})
        for (const auto& row : *grid)
            for (double v : row)
                if (std::isnan(v))
                    throw MeasureError("fixture grid is incomplete");
    return t;
}

double max_pdp_cross_error(const FixtureTables& tables) {
    double worst = 0.0;
    for (size_t iv = 0; iv < tables.vdd_axis.size(); ++iv)
        for (size_t it = 0; it < tables.temp_axis.size(); ++it) {
            double want = tables.pdp[iv][it];
            double got = tables.power[iv][it] * tables.delay[iv][it];
            worst = std::max(worst, std::abs(want - got) / want);
        }
    return worst;
}

}  // namespace nanosim
