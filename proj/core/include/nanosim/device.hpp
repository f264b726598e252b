#pragma once

#include <stdexcept>

namespace nanosim {

/// Tube index pair (n, m). Fixes the tube diameter and whether the tube
/// conducts as a metal or a semiconductor.
struct Chirality {
    int n = 19;
    int m = 0;

    Chirality() = default;
    Chirality(int n_, int m_) : n(n_), m(m_) {
        if (n < 0 || m < 0 || n < m || (n == 0 && m == 0))
            throw std::invalid_argument("chirality requires n >= m >= 0 and (n, m) != (0, 0)");
    }

    friend bool operator==(const Chirality&, const Chirality&) = default;
};

enum class DiameterFormula {
    simplified,  // a * sqrt(n^2 + m^2) / pi, no cross term
    standard     // a * sqrt(n^2 + n*m + m^2) / pi
};

/// Per-run electrical model settings shared by every CNTFET in a circuit.
/// Defaults are calibration knobs for a generic low-voltage digital process,
/// not measured constants.
struct ModelConfig {
    double lattice_const_a = 0.249;            // graphene lattice constant, nm
    double vth_numerator = 0.42;               // V*nm, threshold = this / diameter
    double k_per_tube = 40e-6;                 // A/V^2 per parallel tube
    double lambda = 0.05;                      // channel-length modulation, 1/V
    double i_off_300K = 1e-12;                 // off-state leakage per tube at 300 K, A
    double subthreshold_swing_300K = 0.075;    // V/decade at 300 K
    double mobility_temp_exponent = 1.5;       // k scales as (300/T)^exponent
    double cap_per_tube = 4e-18;               // lumped gate capacitance per tube, F
    DiameterFormula diameter_formula = DiameterFormula::simplified;

    void validate() const;
};

enum class Polarity { N, P };

/// Electrical parameters of one CNTFET instance. `vth` is signed: negative
/// for P devices. Use make_cntfet_params() to derive the dependent fields
/// from a chirality under a ModelConfig.
struct CntfetParams {
    Polarity polarity = Polarity::N;
    Chirality chirality{};
    int tubes = 1;
    double diameter_nm = 0.0;
    double vth = 0.0;      // V, sign matches polarity
    double k_eff = 0.0;    // A/V^2, tubes * k_per_tube
    double gate_cap = 0.0; // F, tubes * cap_per_tube
};

/// Tube diameter in nm for a chirality under the configured formula.
double diameter(const Chirality& c, const ModelConfig& cfg = {});

/// Threshold magnitude in volts for a tube of diameter d (nm). Decreases
/// as the tube gets wider.
double threshold_voltage(double d_nm, const ModelConfig& cfg = {});

/// True when (n - m) mod 3 != 0, i.e. the tube has a bandgap and can be
/// used as a FET channel.
bool is_semiconducting(const Chirality& c);

/// Derives diameter, signed threshold, k_eff and gate capacitance.
/// Throws std::invalid_argument for metallic chiralities or tubes < 1.
CntfetParams make_cntfet_params(Polarity pol, const Chirality& c, int tubes,
                                const ModelConfig& cfg = {});

/// Drain current in amperes, positive into the drain terminal.
///
/// N-type law with V_ov = v_gs - vth and k_T = k_eff * (300/T)^mobility_exp:
///   subthreshold  V_ov <= 0:        tubes * i_off * 10^(V_ov / S(T)), shaped
///                                   to vanish at v_ds = 0
///   triode        0 < v_ds < V_ov:  k_T * (V_ov*v_ds - v_ds^2/2) * (1 + lambda*v_ds)
///   saturation    v_ds >= V_ov:     k_T/2 * V_ov^2 * (1 + lambda*v_ds)
/// with S(T) = subthreshold_swing_300K * (T/300). Region joints are C1.
/// v_ds < 0 swaps source and drain; P devices evaluate the N law at
/// (-v_gs, -v_ds) with |vth| and negate.
double drain_current(const CntfetParams& p, double v_gs, double v_ds, double temp_K,
                     const ModelConfig& cfg = {});

struct Conductances {
    double g_m = 0.0;   // dI/dv_gs, A/V
    double g_ds = 0.0;  // dI/dv_ds, A/V
};

/// Analytic partial derivatives of drain_current at the same operating point.
Conductances conductances(const CntfetParams& p, double v_gs, double v_ds, double temp_K,
                          const ModelConfig& cfg = {});

/// One-pass evaluation used by the solver's Newton linearization.
struct DeviceEval {
    double id = 0.0;
    double g_m = 0.0;
    double g_ds = 0.0;
};
DeviceEval eval_cntfet(const CntfetParams& p, double v_gs, double v_ds, double temp_K,
                       const ModelConfig& cfg = {});

}  // namespace nanosim
