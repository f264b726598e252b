#include "nanosim/device.hpp"

#include <cmath>

namespace nanosim {

namespace {

// Width of the C1 transition windows at the region joints, volts.
constexpr double kSmoothWindow = 10e-3;

// Cubic smoothstep on [0, w]: 0 at 0, 1 at w, zero slope at both ends.
double smoothstep(double x, double w) {
    if (x <= 0.0) return 0.0;
    if (x >= w) return 1.0;
    const double u = x / w;
    return u * u * (3.0 - 2.0 * u);
}

double smoothstep_deriv(double x, double w) {
    if (x <= 0.0 || x >= w) return 0.0;
    const double u = x / w;
    return 6.0 * u * (1.0 - u) / w;
}

// C1 Hermite approximation of min(v, 0) over [-w/2, w/2]: identity below the
// window, zero above it, slope tapering 1 -> 0 across it.
struct SoftMin0 {
    double value;
    double deriv;
};

SoftMin0 soft_min0(double v, double w) {
    if (v <= -0.5 * w) return {v, 1.0};
    if (v >= 0.5 * w) return {0.0, 0.0};
    const double u = (v + 0.5 * w) / w;
    return {-0.5 * w + w * (u - 0.5 * u * u), 1.0 - u};
}

// N-type law for v_ds >= 0. Square-law drift plus exponential leakage; the
// drift piecewise joints are C1 by algebra, the leakage exponent and its
// v_ds shape are C1 by the Hermite windows above.
DeviceEval eval_forward(double v_gs, double v_ds, double vth, int tubes, double k_eff,
                        double temp_K, const ModelConfig& cfg) {
    DeviceEval out;
    const double v_ov = v_gs - vth;
    const double k_t = k_eff * std::pow(300.0 / temp_K, cfg.mobility_temp_exponent);
    const double lam = cfg.lambda;

    if (v_ov > 0.0) {
        if (v_ds < v_ov) {
            const double clm = 1.0 + lam * v_ds;
            out.id = k_t * (v_ov * v_ds - 0.5 * v_ds * v_ds) * clm;
            out.g_m = k_t * v_ds * clm;
            out.g_ds = k_t * (v_ov - v_ds) * clm + k_t * (v_ov * v_ds - 0.5 * v_ds * v_ds) * lam;
        } else {
            const double clm = 1.0 + lam * v_ds;
            out.id = 0.5 * k_t * v_ov * v_ov * clm;
            out.g_m = k_t * v_ov * clm;
            out.g_ds = 0.5 * k_t * v_ov * v_ov * lam;
        }
    }

    const double swing = cfg.subthreshold_swing_300K * (temp_K / 300.0);
    const auto [v_eff, dv_eff] = soft_min0(v_ov, kSmoothWindow);
    const double i_leak = tubes * cfg.i_off_300K * std::pow(10.0, v_eff / swing);
    const double shape = smoothstep(v_ds, kSmoothWindow);
    constexpr double kLn10 = 2.302585092994046;
    out.id += i_leak * shape;
    out.g_m += i_leak * (kLn10 / swing) * dv_eff * shape;
    out.g_ds += i_leak * smoothstep_deriv(v_ds, kSmoothWindow);
    return out;
}

// Full N-type law: the reverse quadrant exchanges source and drain.
DeviceEval eval_ntype(double v_gs, double v_ds, double vth, int tubes, double k_eff,
                      double temp_K, const ModelConfig& cfg) {
    if (v_ds >= 0.0)
        return eval_forward(v_gs, v_ds, vth, tubes, k_eff, temp_K, cfg);
    const DeviceEval f = eval_forward(v_gs - v_ds, -v_ds, vth, tubes, k_eff, temp_K, cfg);
    return {-f.id, -f.g_m, f.g_m + f.g_ds};
}

}  // namespace

void ModelConfig::validate() const {
    if (!(lattice_const_a > 0.0) || !(vth_numerator > 0.0) || !(k_per_tube > 0.0) ||
        !(i_off_300K > 0.0) || !(subthreshold_swing_300K > 0.0) ||
        !(mobility_temp_exponent > 0.0) || !(cap_per_tube > 0.0))
        throw std::invalid_argument("model config: physical parameters must be strictly positive");
    if (!(lambda >= 0.0))
        throw std::invalid_argument("model config: lambda must be >= 0");
}

double diameter(const Chirality& c, const ModelConfig& cfg) {
    const double n = c.n;
    const double m = c.m;
    const double cross = cfg.diameter_formula == DiameterFormula::standard ? n * m : 0.0;
    return cfg.lattice_const_a * std::sqrt(n * n + cross + m * m) / M_PI;
}

double threshold_voltage(double d_nm, const ModelConfig& cfg) {
    if (!(d_nm > 0.0))
        throw std::domain_error("threshold_voltage: diameter must be positive");
    return cfg.vth_numerator / d_nm;
}

bool is_semiconducting(const Chirality& c) {
    return (c.n - c.m) % 3 != 0;
}

CntfetParams make_cntfet_params(Polarity pol, const Chirality& c, int tubes,
                                const ModelConfig& cfg) {
    cfg.validate();
    if (tubes < 1)
        throw std::invalid_argument("cntfet: tube count must be >= 1");
    if (!is_semiconducting(c))
        throw std::invalid_argument("cntfet: metallic chirality (n - m divisible by 3)");
    CntfetParams p;
    p.polarity = pol;
    p.chirality = c;
    p.tubes = tubes;
    p.diameter_nm = diameter(c, cfg);
    const double vth_mag = threshold_voltage(p.diameter_nm, cfg);
    p.vth = pol == Polarity::N ? vth_mag : -vth_mag;
    p.k_eff = tubes * cfg.k_per_tube;
    p.gate_cap = tubes * cfg.cap_per_tube;
    return p;
}

DeviceEval eval_cntfet(const CntfetParams& p, double v_gs, double v_ds, double temp_K,
                       const ModelConfig& cfg) {
    if (!std::isfinite(v_gs) || !std::isfinite(v_ds))
        throw std::domain_error("drain_current: non-finite terminal voltage");
    if (!(temp_K > 0.0))
        throw std::domain_error("drain_current: temperature must be positive kelvin");
    if (p.polarity == Polarity::N)
        return eval_ntype(v_gs, v_ds, p.vth, p.tubes, p.k_eff, temp_K, cfg);
    // P device: mirror both biases, use |vth|, negate the current.
    const DeviceEval n = eval_ntype(-v_gs, -v_ds, std::fabs(p.vth), p.tubes, p.k_eff, temp_K, cfg);
    return {-n.id, n.g_m, n.g_ds};
}

double drain_current(const CntfetParams& p, double v_gs, double v_ds, double temp_K,
                     const ModelConfig& cfg) {
    return eval_cntfet(p, v_gs, v_ds, temp_K, cfg).id;
}

Conductances conductances(const CntfetParams& p, double v_gs, double v_ds, double temp_K,
                          const ModelConfig& cfg) {
    const DeviceEval e = eval_cntfet(p, v_gs, v_ds, temp_K, cfg);
    return {e.g_m, e.g_ds};
}

}  // namespace nanosim
