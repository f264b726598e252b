#include "nanosim/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <queue>
#include <sstream>

namespace nanosim {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool is_node_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool valid_node_name(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), is_node_char);
}

struct Token {
    std::string text;
    int line = 0;
    int col = 0;  // 1-based
};

struct LogicalLine {
    std::vector<Token> tokens;
    int line = 0;
};

void tokenize_into(const std::string& text, int line_no, int col_offset,
                   std::vector<Token>& out) {
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' ||
            c == ',') {
            ++i;
            continue;
        }
        size_t start = i;
        while (i < text.size()) {
            char d = text[i];
            if (std::isspace(static_cast<unsigned char>(d)) || d == '(' || d == ')' ||
                d == ',')
                break;
            ++i;
        }
        out.push_back({text.substr(start, i - start), line_no,
                       col_offset + static_cast<int>(start) + 1});
    }
}

// Number scanner shared by the public helper and the parser. Returns false
// with a message instead of throwing so callers can attach a position.
bool scan_number(const std::string& tok, double& out, std::string& err) {
    size_t i = 0;
    if (i < tok.size() && (tok[i] == '+' || tok[i] == '-')) ++i;
    size_t digits = 0;
    while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) {
        ++i;
        ++digits;
    }
    if (i < tok.size() && tok[i] == '.') {
        ++i;
        while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) {
            ++i;
            ++digits;
        }
    }
    if (digits == 0) {
        err = "expected a number, got '" + tok + "'";
        return false;
    }
    std::string mantissa = tok.substr(0, i);
    long exp10 = 0;
    if (i + 1 < tok.size() && (tok[i] == 'e' || tok[i] == 'E')) {
        size_t j = i + 1;
        if (j < tok.size() && (tok[j] == '+' || tok[j] == '-')) ++j;
        size_t exp_digits = j;
        while (j < tok.size() && std::isdigit(static_cast<unsigned char>(tok[j]))) ++j;
        if (j > exp_digits) {
            exp10 = std::strtol(tok.c_str() + i + 1, nullptr, 10);
            i = j;
        }
    }
    std::string suffix = lower(tok.substr(i));
    if (!suffix.empty()) {
        static const std::map<std::string, int> kSuffix = {
            {"f", -15}, {"p", -12}, {"n", -9}, {"u", -6},
            {"m", -3},  {"k", 3},   {"meg", 6}, {"g", 9}};
        auto it = kSuffix.find(suffix);
        if (it == kSuffix.end()) {
            err = "unknown suffix '" + suffix + "' in '" + tok + "'";
            return false;
        }
        exp10 += it->second;
    }
    // Scaling happens in the decimal text so "2f" lands on the same double
    // as the literal 2e-15.
    std::string rebuilt = mantissa + "e" + std::to_string(exp10);
    char* end = nullptr;
    double v = std::strtod(rebuilt.c_str(), &end);
    if (end == rebuilt.c_str() || *end != '\0' || !std::isfinite(v)) {
        err = "number out of range: '" + tok + "'";
        return false;
    }
    out = v;
    return true;
}

bool scan_int(const std::string& tok, int& out) {
    if (tok.empty()) return false;
    size_t i = (tok[0] == '+' || tok[0] == '-') ? 1 : 0;
    if (i == tok.size()) return false;
    for (size_t j = i; j < tok.size(); ++j)
        if (!std::isdigit(static_cast<unsigned char>(tok[j]))) return false;
    out = std::atoi(tok.c_str());
    return true;
}

// Walks one logical line's tokens with positioned errors.
class Cursor {
public:
    Cursor(const LogicalLine& l) : line_(l) {}

    bool done() const { return pos_ >= line_.tokens.size(); }
    size_t remaining() const { return line_.tokens.size() - pos_; }

    const Token& next(const char* what) {
        if (done())
            throw ParseError(end_line(), end_col(),
                             std::string("missing ") + what);
        return line_.tokens[pos_++];
    }

    double number(const char* what) {
        const Token& t = next(what);
        double v = 0.0;
        std::string err;
        if (!scan_number(t.text, v, err)) throw ParseError(t.line, t.col, err);
        return v;
    }

    int integer(const char* what) {
        const Token& t = next(what);
        int v = 0;
        if (!scan_int(t.text, v))
            throw ParseError(t.line, t.col,
                             std::string("expected an integer for ") + what);
        return v;
    }

    std::string node(const char* what) {
        const Token& t = next(what);
        if (!valid_node_name(t.text))
            throw ParseError(t.line, t.col, "bad node name '" + t.text + "'");
        return t.text;
    }

    void finish() const {
        if (!done()) {
            const Token& t = line_.tokens[pos_];
            throw ParseError(t.line, t.col, "unexpected token '" + t.text + "'");
        }
    }

    int end_line() const {
        return line_.tokens.empty() ? line_.line : line_.tokens.back().line;
    }
    int end_col() const {
        if (line_.tokens.empty()) return 1;
        const Token& t = line_.tokens.back();
        return t.col + static_cast<int>(t.text.size());
    }

private:
    const LogicalLine& line_;
    size_t pos_ = 0;
};

// Splits "key=value"; returns false if '=' is absent.
bool split_kv(const std::string& tok, std::string& key, std::string& value) {
    auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) return false;
    key = lower(tok.substr(0, eq));
    value = tok.substr(eq + 1);
    return true;
}

double kv_number(const Token& t, const std::string& value) {
    double v = 0.0;
    std::string err;
    if (!scan_number(value, v, err)) throw ParseError(t.line, t.col, err);
    return v;
}

int kv_int(const Token& t, const std::string& key, const std::string& value) {
    int v = 0;
    if (!scan_int(value, v))
        throw ParseError(t.line, t.col, "expected an integer for " + key);
    return v;
}

std::vector<LogicalLine> assemble_lines(const std::string& text) {
    std::vector<LogicalLine> lines;
    int line_no = 0;
    std::istringstream in(text);
    std::string raw;
    bool open = false;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        size_t first = raw.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (raw[first] == '*') continue;
        if (raw[first] == '+') {
            if (!open)
                throw ParseError(line_no, static_cast<int>(first) + 1,
                                 "continuation line with nothing to continue");
            tokenize_into(raw.substr(first + 1), line_no,
                          static_cast<int>(first) + 1, lines.back().tokens);
            continue;
        }
        lines.push_back({{}, line_no});
        tokenize_into(raw, line_no, 0, lines.back().tokens);
        open = true;
    }
    return lines;
}

void check_pulse(const PulseShape& p, int line, int col) {
    if (p.delay_s < 0) throw ParseError(line, col, "pulse delay must be >= 0");
    if (p.rise_s <= 0 || p.fall_s <= 0)
        throw ParseError(line, col, "pulse rise and fall must be > 0");
    if (p.width_s <= 0) throw ParseError(line, col, "pulse width must be > 0");
    if (p.period_s < p.rise_s + p.width_s + p.fall_s)
        throw ParseError(line, col,
                         "pulse period shorter than rise + width + fall");
}

}  // namespace

ParseError::ParseError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ":" +
                         std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

double parse_spice_number(const std::string& token) {
    double v = 0.0;
    std::string err;
    if (!scan_number(token, v, err)) throw ParseError(0, 0, err);
    return v;
}

double source_value(const Source& s, double t) {
    if (const auto* dc = std::get_if<DcShape>(&s.shape)) return dc->volts;
    const auto& p = std::get<PulseShape>(s.shape);
    if (t < p.delay_s) return p.v_low;
    double tm = std::fmod(t - p.delay_s, p.period_s);
    if (tm < p.rise_s) return p.v_low + (p.v_high - p.v_low) * tm / p.rise_s;
    tm -= p.rise_s;
    if (tm < p.width_s) return p.v_high;
    tm -= p.width_s;
    if (tm < p.fall_s) return p.v_high + (p.v_low - p.v_high) * tm / p.fall_s;
    return p.v_low;
}

std::vector<std::string> Circuit::nodes() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    auto add = [&](const std::string& n) {
        if (seen.insert(n).second) out.push_back(n);
    };
    for (const auto& d : devices)
        for (const auto& t : d.terminals) add(t);
    for (const auto& s : sources) {
        add(s.node_plus);
        add(s.node_minus);
    }
    return out;
}

const Device* Circuit::find_device(const std::string& name) const {
    std::string want = lower(name);
    for (const auto& d : devices)
        if (lower(d.name) == want) return &d;
    return nullptr;
}

const Source* Circuit::find_source(const std::string& name) const {
    std::string want = lower(name);
    for (const auto& s : sources)
        if (lower(s.name) == want) return &s;
    return nullptr;
}

Circuit parse(const std::string& text) {
    std::vector<LogicalLine> lines = assemble_lines(text);
    Circuit c;
    std::set<std::string> names;
    bool seen_end = false;
    bool first = true;
    int end_line = 0;

    auto claim_name = [&](const Token& t) {
        if (!names.insert(lower(t.text)).second)
            throw ParseError(t.line, t.col, "duplicate element name '" + t.text + "'");
    };

    for (const auto& ll : lines) {
        if (ll.tokens.empty()) continue;
        if (seen_end) {
            const Token& t = ll.tokens.front();
            throw ParseError(t.line, t.col, "content after .end");
        }
        Cursor cur(ll);
        const Token& head = cur.next("statement");
        std::string kw = lower(head.text);
        bool was_first = first;
        first = false;

        if (kw[0] == '.') {
            if (kw == ".title") {
                if (!was_first)
                    throw ParseError(head.line, head.col,
                                     ".title must be the first line");
                std::string title;
                while (!cur.done()) {
                    if (!title.empty()) title += ' ';
                    title += cur.next("title text").text;
                }
                c.title = title;
            } else if (kw == ".temp") {
                c.temp_C = cur.number("temperature");
                if (c.temp_C <= -273.15)
                    throw ParseError(head.line, head.col,
                                     "temperature below absolute zero");
                cur.finish();
            } else if (kw == ".tran") {
                TranAnalysis tr;
                tr.step_s = cur.number("time step");
                tr.stop_s = cur.number("stop time");
                if (tr.step_s <= 0)
                    throw ParseError(head.line, head.col, "time step must be > 0");
                if (tr.stop_s < tr.step_s)
                    throw ParseError(head.line, head.col,
                                     "stop time shorter than one step");
                cur.finish();
                c.analyses.push_back(tr);
            } else if (kw == ".op") {
                cur.finish();
                c.analyses.push_back(OpAnalysis{});
            } else if (kw == ".measure") {
                const Token& scope = cur.next("analysis scope");
                if (lower(scope.text) != "tran")
                    throw ParseError(scope.line, scope.col,
                                     "only 'tran' measurements are supported");
                const Token& mname = cur.next("measurement name");
                const Token& kind = cur.next("measurement kind");
                std::string mk = lower(kind.text);
                if (mk == "avg") {
                    const Token& what = cur.next("quantity");
                    if (lower(what.text) != "power")
                        throw ParseError(what.line, what.col,
                                         "AVG supports only 'power'");
                    AvgPowerMeasure m;
                    m.name = mname.text;
                    const Token& kv = cur.next("src=");
                    std::string key, value;
                    if (!split_kv(kv.text, key, value) || key != "src")
                        throw ParseError(kv.line, kv.col, "expected src=<source>");
                    m.source_name = value;
                    cur.finish();
                    c.measures.push_back(m);
                } else if (mk == "delay") {
                    DelayMeasure m;
                    m.name = mname.text;
                    bool has_in = false, has_out = false;
                    while (!cur.done()) {
                        const Token& kv = cur.next("key=value");
                        std::string key, value;
                        if (!split_kv(kv.text, key, value))
                            throw ParseError(kv.line, kv.col,
                                             "expected key=value, got '" + kv.text + "'");
                        if (key == "in") {
                            m.in_node = value;
                            has_in = true;
                        } else if (key == "out") {
                            m.out_node = value;
                            has_out = true;
                        } else if (key == "frac") {
                            m.fraction = kv_number(kv, value);
                            if (!(m.fraction > 0.0 && m.fraction < 1.0))
                                throw ParseError(kv.line, kv.col,
                                                 "frac must lie in (0, 1)");
                        } else {
                            throw ParseError(kv.line, kv.col,
                                             "unknown DELAY parameter '" + key + "'");
                        }
                    }
                    if (!has_in || !has_out)
                        throw ParseError(kind.line, kind.col,
                                         "DELAY needs in= and out=");
                    c.measures.push_back(m);
                } else if (mk == "pdp") {
                    cur.finish();
                    c.measures.push_back(PdpMeasure{mname.text});
                } else {
                    throw ParseError(kind.line, kind.col,
                                     "unknown measurement kind '" + kind.text + "'");
                }
            } else if (kw == ".end") {
                cur.finish();
                seen_end = true;
                end_line = head.line;
            } else {
                throw ParseError(head.line, head.col,
                                 "unknown directive '" + head.text + "'");
            }
            continue;
        }

        char k = kw[0];
        if (k == 'm') {
            claim_name(head);
            Device d;
            d.name = head.text;
            d.terminals = {cur.node("drain node"), cur.node("gate node"),
                           cur.node("source node")};
            const Token& type = cur.next("device type");
            std::string ty = lower(type.text);
            CntfetDevice fet;
            if (ty == "nfet")
                fet.polarity = Polarity::N;
            else if (ty == "pfet")
                fet.polarity = Polarity::P;
            else
                throw ParseError(type.line, type.col,
                                 "expected nfet or pfet, got '" + type.text + "'");
            int n = -1, m = -1;
            while (!cur.done()) {
                const Token& kv = cur.next("key=value");
                std::string key, value;
                if (!split_kv(kv.text, key, value))
                    throw ParseError(kv.line, kv.col,
                                     "expected key=value, got '" + kv.text + "'");
                if (key == "n")
                    n = kv_int(kv, key, value);
                else if (key == "m")
                    m = kv_int(kv, key, value);
                else if (key == "tubes")
                    fet.tubes = kv_int(kv, key, value);
                else
                    throw ParseError(kv.line, kv.col,
                                     "unknown transistor parameter '" + key + "'");
            }
            if (n < 0 || m < 0)
                throw ParseError(head.line, head.col, "transistor needs n= and m=");
            try {
                fet.chirality = Chirality(n, m);
            } catch (const std::invalid_argument& e) {
                throw ParseError(head.line, head.col, e.what());
            }
            if (!is_semiconducting(fet.chirality))
                throw ParseError(head.line, head.col,
                                 "metallic chirality (" + std::to_string(n) + "," +
                                     std::to_string(m) + "): n-m divisible by 3");
            if (fet.tubes < 1)
                throw ParseError(head.line, head.col, "tubes must be >= 1");
            d.params = fet;
            c.devices.push_back(std::move(d));
        } else if (k == 'r') {
            claim_name(head);
            Device d;
            d.name = head.text;
            d.terminals = {cur.node("first node"), cur.node("second node")};
            ResistorDevice r;
            r.ohms = cur.number("resistance");
            if (r.ohms <= 0)
                throw ParseError(head.line, head.col, "resistance must be > 0");
            cur.finish();
            d.params = r;
            c.devices.push_back(std::move(d));
        } else if (k == 'c') {
            claim_name(head);
            Device d;
            d.name = head.text;
            d.terminals = {cur.node("first node"), cur.node("second node")};
            CapacitorDevice cap;
            cap.farads = cur.number("capacitance");
            if (cap.farads <= 0)
                throw ParseError(head.line, head.col, "capacitance must be > 0");
            if (!cur.done()) {
                const Token& kv = cur.next("ic=");
                std::string key, value;
                if (!split_kv(kv.text, key, value) || key != "ic")
                    throw ParseError(kv.line, kv.col, "expected ic=<volts>");
                cap.initial_volts = kv_number(kv, value);
                cur.finish();
            }
            d.params = cap;
            c.devices.push_back(std::move(d));
        } else if (k == 'v') {
            claim_name(head);
            Source s;
            s.name = head.text;
            s.node_plus = cur.node("positive node");
            s.node_minus = cur.node("negative node");
            const Token& shape = cur.next("DC or PULSE");
            std::string sh = lower(shape.text);
            if (sh == "dc") {
                s.shape = DcShape{cur.number("voltage")};
                cur.finish();
            } else if (sh == "pulse") {
                PulseShape p;
                p.v_low = cur.number("initial value");
                p.v_high = cur.number("pulsed value");
                p.delay_s = cur.number("delay");
                p.rise_s = cur.number("rise time");
                p.fall_s = cur.number("fall time");
                p.width_s = cur.number("pulse width");
                p.period_s = cur.number("period");
                cur.finish();
                check_pulse(p, shape.line, shape.col);
                s.shape = p;
            } else {
                throw ParseError(shape.line, shape.col,
                                 "expected DC or PULSE, got '" + shape.text + "'");
            }
            c.sources.push_back(std::move(s));
        } else {
            throw ParseError(head.line, head.col,
                             "unknown element kind '" + head.text + "'");
        }
    }

    if (!seen_end) {
        int last = lines.empty() ? 1 : lines.back().line;
        throw ParseError(last, 1, "missing .end");
    }
    std::vector<std::string> nodes = c.nodes();
    if (std::find(nodes.begin(), nodes.end(), kGroundNode) == nodes.end())
        throw ParseError(end_line, 1, "no ground node ('0') in circuit");
    return c;
}

std::vector<Diagnostic> validate(const Circuit& c) {
    std::vector<Diagnostic> out;
    auto error = [&](std::string msg) {
        out.push_back({Severity::error, std::move(msg)});
    };
    auto warning = [&](std::string msg) {
        out.push_back({Severity::warning, std::move(msg)});
    };

    std::set<std::string> names;
    auto claim = [&](const std::string& n) {
        if (!names.insert(lower(n)).second)
            error("duplicate element name '" + n + "'");
    };

    if (c.temp_C <= -273.15) error("temperature below absolute zero");

    for (const auto& d : c.devices) {
        claim(d.name);
        size_t want = d.is_cntfet() ? 3 : 2;
        if (d.terminals.size() != want)
            error("element '" + d.name + "' has " +
                  std::to_string(d.terminals.size()) + " terminals, expected " +
                  std::to_string(want));
        for (const auto& t : d.terminals)
            if (!valid_node_name(t)) error("bad node name '" + t + "'");
        if (d.is_cntfet()) {
            const auto& f = d.cntfet();
            if (!is_semiconducting(f.chirality))
                error("element '" + d.name + "': metallic chirality");
            if (f.tubes < 1) error("element '" + d.name + "': tubes must be >= 1");
        } else if (const auto* r = std::get_if<ResistorDevice>(&d.params)) {
            if (r->ohms <= 0) error("element '" + d.name + "': resistance must be > 0");
        } else if (const auto* cap = std::get_if<CapacitorDevice>(&d.params)) {
            if (cap->farads <= 0)
                error("element '" + d.name + "': capacitance must be > 0");
        }
    }
    for (const auto& s : c.sources) {
        claim(s.name);
        if (!valid_node_name(s.node_plus)) error("bad node name '" + s.node_plus + "'");
        if (!valid_node_name(s.node_minus))
            error("bad node name '" + s.node_minus + "'");
        if (const auto* p = std::get_if<PulseShape>(&s.shape)) {
            try {
                check_pulse(*p, 0, 0);
            } catch (const ParseError& e) {
                error("source '" + s.name + "': " + e.what());
            }
        }
    }

    for (const auto& a : c.analyses) {
        if (const auto* tr = std::get_if<TranAnalysis>(&a)) {
            if (tr->step_s <= 0) error("transient time step must be > 0");
            else if (tr->stop_s < tr->step_s)
                error("transient stop time shorter than one step");
        }
    }
    for (const auto& m : c.measures) {
        if (const auto* ap = std::get_if<AvgPowerMeasure>(&m)) {
            if (!c.find_source(ap->source_name))
                error("measurement '" + ap->name + "' references unknown source '" +
                      ap->source_name + "'");
        } else if (const auto* dl = std::get_if<DelayMeasure>(&m)) {
            if (!(dl->fraction > 0.0 && dl->fraction < 1.0))
                error("measurement '" + dl->name + "': frac must lie in (0, 1)");
        }
    }

    std::vector<std::string> nodes = c.nodes();
    std::set<std::string> node_set(nodes.begin(), nodes.end());
    if (!node_set.count(kGroundNode)) {
        error("no ground node ('0') in circuit");
        return out;
    }
    for (const auto& m : c.measures) {
        if (const auto* dl = std::get_if<DelayMeasure>(&m)) {
            if (!node_set.count(dl->in_node))
                error("measurement '" + dl->name + "' references unknown node '" +
                      dl->in_node + "'");
            if (!node_set.count(dl->out_node))
                error("measurement '" + dl->name + "' references unknown node '" +
                      dl->out_node + "'");
        }
    }

    // Reachability over element adjacency: every element couples all of its
    // terminals for this purpose, capacitors included.
    std::map<std::string, std::vector<std::string>> adj;
    auto link = [&](const std::vector<std::string>& ts) {
        for (size_t i = 0; i < ts.size(); ++i)
            for (size_t j = i + 1; j < ts.size(); ++j) {
                adj[ts[i]].push_back(ts[j]);
                adj[ts[j]].push_back(ts[i]);
            }
    };
    for (const auto& d : c.devices) link(d.terminals);
    for (const auto& s : c.sources) link({s.node_plus, s.node_minus});
    std::set<std::string> reached;
    std::queue<std::string> q;
    q.push(kGroundNode);
    reached.insert(kGroundNode);
    while (!q.empty()) {
        std::string n = q.front();
        q.pop();
        for (const auto& nb : adj[n])
            if (reached.insert(nb).second) q.push(nb);
    }
    for (const auto& n : nodes)
        if (!reached.count(n)) error("node '" + n + "' is not connected to ground");

    if (c.analyses.empty()) warning("no analysis directive");

    // A node touched only by capacitor plates has no DC path anywhere.
    std::map<std::string, std::pair<int, int>> touch;  // caps, others
    for (const auto& d : c.devices) {
        bool is_cap = std::holds_alternative<CapacitorDevice>(d.params);
        for (const auto& t : d.terminals)
            (is_cap ? touch[t].first : touch[t].second)++;
    }
    for (const auto& s : c.sources) {
        touch[s.node_plus].second++;
        touch[s.node_minus].second++;
    }
    for (const auto& [n, counts] : touch)
        if (n != kGroundNode && counts.second == 0)
            warning("node '" + n + "' connects only capacitor terminals");

    return out;
}

}  // namespace nanosim
