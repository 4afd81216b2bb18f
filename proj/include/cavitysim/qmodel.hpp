// Driven, dissipative one- or two-atom Tavis-Cummings model.
//
// Rotating frame of the probe: H/hbar = -Dpc a+a
//   + sum_i [ -Dpa s_i+ s_i- + g (a+ s_i- + a s_i+) ] + eta (a + a+),
// dissipators kappa on a and gamma on each s_i- :
//   drho = -i[H,rho] + kappa(2 a rho a+ - {a+a,rho})
//        + gamma sum_i (2 s_i- rho s_i+ - {s_i+ s_i-, rho}).
// kappa and gamma are field/dipole (half-linewidth) rates, so photon number
// and excited population decay at 2*kappa and 2*gamma.
//
// Atoms are two-level systems on the probed transition; an atom in F=3 does
// not couple and is simply absent from the model.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <vector>

#include "cavitysim/params.hpp"

namespace cavitysim {

using Complex = std::complex<double>;
using SparseC = Eigen::SparseMatrix<Complex>;
using MatrixC = Eigen::MatrixXcd;

struct HilbertConfig {
    int n_fock = 6;   // photon-number cutoff (levels 0 .. n_fock-1)
    int n_atoms = 1;

    int dim() const { return n_fock * (1 << n_atoms); }
    void validate(int dim_cap = kDefaultDimCap) const;

    static constexpr int kDefaultDimCap = 4096;
};

struct Liouvillian {
    SparseC matrix;        // dim^2 x dim^2, acts on column-major vec(rho)
    HilbertConfig hilbert;
    SparseC number_op;     // a+a
    std::vector<SparseC> excited_ops;  // s_i+ s_i- per atom
    double eta_rad_per_us = 0.0;
    double kappa_rad_per_us = 0.0;
    double gamma_rad_per_us = 0.0;
};

struct SteadyState {
    MatrixC rho;
    double n_photon = 0.0;                // <a+a>
    std::vector<double> p_excited;        // per-atom <s+s->
    double transmission = 0.0;            // n_photon / empty-cavity on-resonance
    double residual = 0.0;                // ||L vec(rho)||_2
};

struct SpectrumPoint {
    double detuning_mhz = 0.0;  // probe-cavity
    double transmission = 0.0;
    double p_excited = 0.0;     // per atom (atoms are identical here)
    double scattering_per_s = 0.0;
};

// Drive amplitude that yields photon number n_ph in the resonant empty
// cavity: eta = kappa * sqrt(n_ph).
inline double eta_for_photon_number(double n_ph, double kappa_mhz) {
    return kappa_mhz * std::sqrt(n_ph);
}

// Smallest n_fock >= 6 whose top level is negligibly occupied by a coherent
// state of the given photon number.
int adequate_n_fock(double n_photon_max);

// Builds the Lindblad superoperator on vectorized density matrices.
// drive_eta_mhz is an ordinary frequency; conversion to angular units happens
// here. Throws ComputeError("DIM_OVERFLOW") past the dimension cap.
Liouvillian build_liouvillian(const SystemParams& p, const HilbertConfig& h,
                              double drive_eta_mhz,
                              int dim_cap = HilbertConfig::kDefaultDimCap);

// Direct sparse solve of L vec(rho) = 0 with the trace constraint replacing
// one row. Throws ComputeError("NO_CONVERGENCE") when the residual exceeds
// 1e-10 and ComputeError("TRUNCATION") when the top Fock level holds more
// than 1e-6 population.
SteadyState steady_state(const Liouvillian& liouvillian);

// Photon scattering rate 2*gamma*<s+s-> per atom, in 1/s.
std::vector<double> scattering_rate(const SteadyState& s, const SystemParams& p);

// One steady-state solve per probe-cavity detuning. Deterministic.
std::vector<SpectrumPoint> transmission_spectrum(const SystemParams& p,
                                                 const std::vector<double>& detunings_mhz,
                                                 double drive_eta_mhz, int n_fock = 6);

// Weak-excitation closed form (linear response) for N identical atoms.
// All inputs in MHz; the 2*pi factors cancel in every output.
struct WeakDriveResponse {
    double n_photon = 0.0;
    double p_excited = 0.0;    // per atom
    double transmission = 0.0;
};
WeakDriveResponse weak_drive_response(double kappa_mhz, double gamma_mhz,
                                      double delta_pc_mhz, double delta_pa_mhz,
                                      double g_mhz, int n_atoms, double eta_mhz);
WeakDriveResponse weak_drive_response(const SystemParams& p, double eta_mhz);

void write_spectrum_csv(const std::string& path, const std::vector<SpectrumPoint>& points,
                        bool timestamp_header);

}  // namespace cavitysim
