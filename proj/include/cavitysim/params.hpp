// Physical parameters and unit conventions shared by every module.
//
// Unit convention: every frequency-valued field is an ordinary frequency nu
// in MHz (omega = 2*pi*nu). Conversion to angular frequency happens exactly
// once, inside solver entry points. Quantum-jump rates are in 1/s, matching
// how they are usually quoted.
#pragma once

#include <string>

namespace cavitysim {

class KeyValueConfig;

constexpr double kTwoPi = 6.283185307179586476925286766559;

// omega in rad/us for nu in MHz (1 MHz = 1/us).
inline double angular_rad_per_us(double freq_mhz) { return kTwoPi * freq_mhz; }

inline double per_s_from_per_ms(double r) { return r * 1e3; }
inline double per_ms_from_per_s(double r) { return r * 1e-3; }

struct SystemParams {
    double g_mhz = 10.0;        // atom-cavity coupling
    double kappa_mhz = 0.4;     // cavity field decay rate (half linewidth)
    double gamma_mhz = 2.6;     // atomic dipole decay rate (half linewidth)
    double delta_ca_mhz = 44.0; // cavity-atom detuning (omega_c - omega_a)/2pi
    double delta_pc_mhz = 0.0;  // probe-cavity detuning (omega_p - omega_c)/2pi
    double n_empty = 0.3;       // empty-cavity on-resonance photon number
    double det_eff = 0.013;     // overall photon detection efficiency
    double bin_ms = 2.0;        // binning time
    int n_atoms = 1;

    // Probe-atom detuning; the cavity is blue of the atom for positive
    // delta_ca, so delta_pa = delta_pc + delta_ca.
    double delta_pa_mhz() const { return delta_pc_mhz + delta_ca_mhz; }

    void validate() const;  // throws ConfigError listing every violation
};

struct JumpRates {
    double r_4to3_per_s = 106.0;  // jump rate F=4 -> F=3 (probe-induced)
    double r_3to4_per_s = 42.0;   // repump rate F=3 -> F=4 (0 = repumper off)

    void validate() const;
};

SystemParams default_params();

// C1 = g^2 / (2 kappa gamma)
double cooperativity(const SystemParams& p);

// Reads fields of SystemParams from a flat key-value file; keys are the field
// names above. Unknown keys are an error. Missing keys keep their defaults.
SystemParams params_from_config(const std::string& path);

// Same, but from an already-parsed config with an optional key prefix
// (e.g. "params."); consumes the keys it reads.
SystemParams params_from_config(KeyValueConfig& cfg, const std::string& prefix);
JumpRates jump_rates_from_config(KeyValueConfig& cfg, const std::string& prefix);

}  // namespace cavitysim
