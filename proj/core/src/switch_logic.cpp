#include "nanosim/switch_logic.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <queue>
#include <sstream>

namespace nanosim {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

int rail_of(const std::string& name) {
    std::string n = lower(name);
    if (n == "0" || n == "gnd" || n == "vss")
        return static_cast<int>(LogicLevel::zero);
    if (n == "vdd" || n == "vcc") return static_cast<int>(LogicLevel::one);
    return -1;
}

enum class SwitchState { open, closed, maybe };

SwitchState state_of(bool is_p, LogicLevel gate) {
    switch (gate) {
        case LogicLevel::zero:
            return is_p ? SwitchState::closed : SwitchState::open;
        case LogicLevel::one:
            return is_p ? SwitchState::open : SwitchState::closed;
        default:
            return SwitchState::maybe;
    }
}

}  // namespace

char logic_char(LogicLevel l) {
    switch (l) {
        case LogicLevel::zero: return '0';
        case LogicLevel::one: return '1';
        case LogicLevel::z: return 'Z';
        default: return 'X';
    }
}

SwitchNetwork SwitchNetwork::build(const Circuit& c) {
    SwitchNetwork net;
    auto intern = [&](const std::string& name) {
        auto it = net.node_index_.find(name);
        if (it != net.node_index_.end()) return it->second;
        int id = static_cast<int>(net.node_names_.size());
        net.node_index_.emplace(name, id);
        net.node_names_.push_back(name);
        net.rail_level_.push_back(rail_of(name));
        return id;
    };
    for (const auto& d : c.devices) {
        if (std::holds_alternative<CapacitorDevice>(d.params)) continue;
        if (std::holds_alternative<ResistorDevice>(d.params))
            throw SwitchError("element '" + d.name +
                              "' has no switch representation (resistor)");
        const auto& f = d.cntfet();
        Switch sw;
        sw.a = intern(d.terminals[0]);
        sw.gate = intern(d.terminals[1]);
        sw.b = intern(d.terminals[2]);
        sw.is_p = f.polarity == Polarity::P;
        net.switches_.push_back(sw);
    }
    if (!c.sources.empty())
        throw SwitchError("source '" + c.sources.front().name +
                          "' has no switch representation; drive inputs "
                          "through evaluate()");
    net.incident_.resize(net.node_names_.size());
    for (size_t i = 0; i < net.switches_.size(); ++i) {
        net.incident_[net.switches_[i].a].push_back(static_cast<int>(i));
        net.incident_[net.switches_[i].b].push_back(static_cast<int>(i));
    }
    return net;
}

std::map<std::string, LogicLevel> SwitchNetwork::evaluate(
    const std::map<std::string, LogicLevel>& inputs) const {
    int n = static_cast<int>(node_names_.size());
    std::vector<std::optional<LogicLevel>> level(n);
    std::vector<char> driven(n, 0);

    for (int i = 0; i < n; ++i)
        if (rail_level_[i] >= 0) {
            level[i] = static_cast<LogicLevel>(rail_level_[i]);
            driven[i] = 1;
        }
    for (const auto& [name, lv] : inputs) {
        auto it = node_index_.find(name);
        if (it == node_index_.end())
            throw SwitchError("input '" + name + "' is not a circuit node");
        if (rail_level_[it->second] >= 0)
            throw SwitchError("input '" + name + "' is a supply rail");
        level[it->second] = lv;
        driven[it->second] = 1;
    }

    // Region walk from `start` over switches that might conduct. Returns
    // false when a gate on the region boundary is still unresolved.
    auto resolve = [&](int start, LogicLevel& out) {
        bool def1 = false, def0 = false, defx = false;
        bool pos1 = false, pos0 = false, posx = false;
        for (int pass = 0; pass < 2; ++pass) {
            bool definite_only = (pass == 0);
            std::vector<char> seen(n, 0);
            std::queue<int> q;
            q.push(start);
            seen[start] = 1;
            while (!q.empty()) {
                int u = q.front();
                q.pop();
                for (int si : incident_[u]) {
                    const Switch& sw = switches_[si];
                    if (!level[sw.gate].has_value()) return false;
                    SwitchState st = state_of(sw.is_p, *level[sw.gate]);
                    if (st == SwitchState::open) continue;
                    if (definite_only && st != SwitchState::closed) continue;
                    int other = sw.a == u ? sw.b : sw.a;
                    if (seen[other]) continue;
                    seen[other] = 1;
                    if (driven[other]) {
                        LogicLevel dl = *level[other];
                        if (definite_only) {
                            if (dl == LogicLevel::one) def1 = true;
                            if (dl == LogicLevel::zero) def0 = true;
                            if (dl == LogicLevel::x) defx = true;
                        } else {
                            if (dl == LogicLevel::one) pos1 = true;
                            if (dl == LogicLevel::zero) pos0 = true;
                            if (dl == LogicLevel::x) posx = true;
                        }
                        continue;  // conduction stops at a driver
                    }
                    q.push(other);
                }
            }
        }
        if (defx || (def1 && def0))
            out = LogicLevel::x;
        else if (def1)
            out = (pos0 || posx) ? LogicLevel::x : LogicLevel::one;
        else if (def0)
            out = (pos1 || posx) ? LogicLevel::x : LogicLevel::zero;
        else if (pos1 || pos0 || posx)
            out = LogicLevel::x;
        else
            out = LogicLevel::z;
        return true;
    };

    bool progress = true;
    while (progress) {
        progress = false;
        bool open_nodes = false;
        for (int i = 0; i < n; ++i) {
            if (level[i].has_value()) continue;
            open_nodes = true;
            LogicLevel out;
            if (resolve(i, out)) {
                level[i] = out;
                progress = true;
            }
        }
        if (!open_nodes) break;
        if (!progress)
            throw SwitchError(
                "gate dependencies form a cycle; levels are unresolvable");
    }

    std::map<std::string, LogicLevel> result;
    for (int i = 0; i < n; ++i) result[node_names_[i]] = *level[i];
    return result;
}

bool majority(bool a, bool b, bool c) { return (a && b) || (c && (a || b)); }

FullAdderBits full_adder_reference(bool a, bool b, bool cin) {
    return {(a != b) != cin, majority(a, b, cin)};
}

std::string TruthTableReport::text() const {
    std::ostringstream out;
    out << "a b c | sum cout\n";
    for (const auto& r : rows) {
        out << (r.in[0] ? '1' : '0') << ' ' << (r.in[1] ? '1' : '0') << ' '
            << (r.in[2] ? '1' : '0') << " | " << logic_char(r.sum)
            << (r.sum_ok ? "   " : " ! ") << logic_char(r.cout)
            << (r.cout_ok ? "" : " !") << '\n';
    }
    out << (pass ? "PASS" : "FAIL") << '\n';
    return out.str();
}

TruthTableReport verify_full_adder(const Circuit& cell, const AdderPorts& ports) {
    SwitchNetwork net = SwitchNetwork::build(cell);
    TruthTableReport report;
    report.pass = true;
    for (int combo = 0; combo < 8; ++combo) {
        bool a = combo & 4, b = combo & 2, cin = combo & 1;
        std::map<std::string, LogicLevel> in;
        in[ports.inputs[0]] = a ? LogicLevel::one : LogicLevel::zero;
        in[ports.inputs[1]] = b ? LogicLevel::one : LogicLevel::zero;
        in[ports.inputs[2]] = cin ? LogicLevel::one : LogicLevel::zero;
        auto levels = net.evaluate(in);

        FullAdderBits want = full_adder_reference(a, b, cin);
        auto expect = [&](bool ideal, bool complemented) {
            return (ideal != complemented) ? LogicLevel::one : LogicLevel::zero;
        };
        TruthRow row;
        row.in = {a, b, cin};
        row.sum = levels.at(ports.sum_node);
        row.cout = levels.at(ports.cout_node);
        row.sum_ok = row.sum == expect(want.sum, ports.sum_complemented);
        row.cout_ok = row.cout == expect(want.cout, ports.cout_complemented);
        if (!row.sum_ok || !row.cout_ok) report.pass = false;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace nanosim
