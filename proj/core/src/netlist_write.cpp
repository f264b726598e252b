#include "nanosim/netlist.hpp"

#include <cctype>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace nanosim {

namespace {

void require_prefix(const std::string& name, char letter, const char* kind) {
    if (name.empty() ||
        std::tolower(static_cast<unsigned char>(name[0])) != letter)
        throw std::invalid_argument(std::string(kind) + " name '" + name +
                                    "' must start with '" + letter + "'");
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string serialize(const Circuit& c) {
    std::ostringstream out;
    if (!c.title.empty()) out << ".title " << c.title << "\n";
    out << ".temp " << format_double(c.temp_C) << "\n";

    for (const auto& d : c.devices) {
        if (d.is_cntfet()) {
            require_prefix(d.name, 'm', "transistor");
            if (d.terminals.size() != 3)
                throw std::invalid_argument("transistor '" + d.name +
                                            "' needs 3 terminals");
            const auto& f = d.cntfet();
            out << d.name << ' ' << d.terminals[0] << ' ' << d.terminals[1] << ' '
                << d.terminals[2] << ' '
                << (f.polarity == Polarity::N ? "nfet" : "pfet")
                << " n=" << f.chirality.n << " m=" << f.chirality.m
                << " tubes=" << f.tubes << "\n";
        } else if (const auto* r = std::get_if<ResistorDevice>(&d.params)) {
            require_prefix(d.name, 'r', "resistor");
            if (d.terminals.size() != 2)
                throw std::invalid_argument("resistor '" + d.name +
                                            "' needs 2 terminals");
            out << d.name << ' ' << d.terminals[0] << ' ' << d.terminals[1] << ' '
                << format_double(r->ohms) << "\n";
        } else {
            require_prefix(d.name, 'c', "capacitor");
            if (d.terminals.size() != 2)
                throw std::invalid_argument("capacitor '" + d.name +
                                            "' needs 2 terminals");
            const auto& cap = d.capacitor();
            out << d.name << ' ' << d.terminals[0] << ' ' << d.terminals[1] << ' '
                << format_double(cap.farads);
            if (cap.initial_volts) out << " ic=" << format_double(*cap.initial_volts);
            out << "\n";
        }
    }

    for (const auto& s : c.sources) {
        require_prefix(s.name, 'v', "source");
        out << s.name << ' ' << s.node_plus << ' ' << s.node_minus << ' ';
        if (const auto* dc = std::get_if<DcShape>(&s.shape)) {
            out << "DC " << format_double(dc->volts) << "\n";
        } else {
            const auto& p = std::get<PulseShape>(s.shape);
            out << "PULSE(" << format_double(p.v_low) << ' '
                << format_double(p.v_high) << ' ' << format_double(p.delay_s) << ' '
                << format_double(p.rise_s) << ' ' << format_double(p.fall_s) << ' '
                << format_double(p.width_s) << ' ' << format_double(p.period_s)
                << ")\n";
        }
    }

    for (const auto& a : c.analyses) {
        if (const auto* tr = std::get_if<TranAnalysis>(&a))
            out << ".tran " << format_double(tr->step_s) << ' '
                << format_double(tr->stop_s) << "\n";
        else
            out << ".op\n";
    }

    for (const auto& m : c.measures) {
        if (const auto* ap = std::get_if<AvgPowerMeasure>(&m)) {
            out << ".measure tran " << ap->name << " AVG power src="
                << ap->source_name << "\n";
        } else if (const auto* dl = std::get_if<DelayMeasure>(&m)) {
            out << ".measure tran " << dl->name << " DELAY in=" << dl->in_node
                << " out=" << dl->out_node << " frac=" << format_double(dl->fraction)
                << "\n";
        } else {
            out << ".measure tran " << std::get<PdpMeasure>(m).name << " PDP\n";
        }
    }

    out << ".end\n";
    return out.str();
}

}  // namespace nanosim
