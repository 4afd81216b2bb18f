#include "cavitysim/qmodel.hpp"

#include <Eigen/SparseLU>
#include <cmath>

#include "cavitysim/csvio.hpp"
#include "cavitysim/errors.hpp"

namespace cavitysim {

namespace {

constexpr Complex kI{0.0, 1.0};

// Kronecker product for sparse complex matrices.
SparseC kron(const SparseC& a, const SparseC& b) {
    SparseC out(a.rows() * b.rows(), a.cols() * b.cols());
    std::vector<Eigen::Triplet<Complex>> trips;
    trips.reserve(static_cast<std::size_t>(a.nonZeros()) * b.nonZeros());
    for (int ka = 0; ka < a.outerSize(); ++ka) {
        for (SparseC::InnerIterator ia(a, ka); ia; ++ia) {
            for (int kb = 0; kb < b.outerSize(); ++kb) {
                for (SparseC::InnerIterator ib(b, kb); ib; ++ib) {
                    trips.emplace_back(ia.row() * b.rows() + ib.row(),
                                       ia.col() * b.cols() + ib.col(),
                                       ia.value() * ib.value());
                }
            }
        }
    }
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

SparseC identity(int n) {
    SparseC id(n, n);
    id.setIdentity();
    return id;
}

SparseC fock_annihilation(int n_fock) {
    SparseC a(n_fock, n_fock);
    std::vector<Eigen::Triplet<Complex>> trips;
    for (int n = 1; n < n_fock; ++n) {
        trips.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
    }
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

// Full-space annihilation and per-atom lowering operators. Basis ordering:
// photon index major, atom bits minor (atom 0 is the most significant bit).
struct Operators {
    SparseC a;
    std::vector<SparseC> sigma_minus;
};

Operators build_operators(const HilbertConfig& h) {
    const int atom_dim = 1 << h.n_atoms;
    Operators ops;
    ops.a = kron(fock_annihilation(h.n_fock), identity(atom_dim));

    SparseC lower(2, 2);  // |g><e| with |g>=0, |e>=1
    lower.insert(0, 1) = 1.0;
    lower.makeCompressed();
    for (int i = 0; i < h.n_atoms; ++i) {
        SparseC op = identity(1);
        for (int j = 0; j < h.n_atoms; ++j) {
            op = kron(op, j == i ? lower : identity(2));
        }
        ops.sigma_minus.push_back(kron(identity(h.n_fock), op));
    }
    return ops;
}

// vec(A rho B) = (B^T kron A) vec(rho), column-major stacking.
SparseC left_mult(const SparseC& a, int dim) { return kron(identity(dim), a); }
SparseC right_mult(const SparseC& b, int dim) {
    return kron(SparseC(b.transpose()), identity(dim));
}

SparseC dissipator(const SparseC& l, int dim) {
    const SparseC ldag = l.adjoint();
    const SparseC ldl = ldag * l;
    return 2.0 * kron(SparseC(l.conjugate()), l) - left_mult(ldl, dim) -
           right_mult(ldl, dim);
}

}  // namespace

void HilbertConfig::validate(int dim_cap) const {
    if (n_fock < 2) throw ConfigError("n_fock must be >= 2");
    if (n_atoms != 1 && n_atoms != 2) throw ConfigError("n_atoms must be 1 or 2");
    if (dim() > dim_cap) {
        throw ComputeError("DIM_OVERFLOW", "Hilbert dimension " + std::to_string(dim()) +
                                               " exceeds cap " + std::to_string(dim_cap));
    }
}

int adequate_n_fock(double n_photon_max) {
    int n_fock = 6;
    while (n_fock < 64) {
        // P(X >= n_fock-1) for X ~ Poisson(n_photon_max)
        double term = std::exp(-n_photon_max);
        double cdf = term;
        for (int k = 1; k < n_fock - 1; ++k) {
            term *= n_photon_max / k;
            cdf += term;
        }
        if (1.0 - cdf < 1e-7) break;
        n_fock += 2;
    }
    return n_fock;
}

Liouvillian build_liouvillian(const SystemParams& p, const HilbertConfig& h,
                              double drive_eta_mhz, int dim_cap) {
    p.validate();
    h.validate(dim_cap);
    if (h.n_atoms != p.n_atoms) {
        throw ConfigError("HilbertConfig.n_atoms does not match SystemParams.n_atoms");
    }

    const int dim = h.dim();
    const double g = angular_rad_per_us(p.g_mhz);
    const double kappa = angular_rad_per_us(p.kappa_mhz);
    const double gamma = angular_rad_per_us(p.gamma_mhz);
    const double dpc = angular_rad_per_us(p.delta_pc_mhz);
    const double dpa = angular_rad_per_us(p.delta_pa_mhz());
    const double eta = angular_rad_per_us(drive_eta_mhz);

    const Operators ops = build_operators(h);
    const SparseC adag = ops.a.adjoint();
    const SparseC num = adag * ops.a;

    SparseC ham = -dpc * num + eta * (ops.a + adag);
    for (const SparseC& sm : ops.sigma_minus) {
        const SparseC sp = sm.adjoint();
        ham += -dpa * (sp * sm) + g * (adag * sm + ops.a * sp);
    }

    Liouvillian liou;
    liou.hilbert = h;
    liou.number_op = num;
    liou.eta_rad_per_us = eta;
    liou.kappa_rad_per_us = kappa;
    liou.gamma_rad_per_us = gamma;

    SparseC l = -kI * (left_mult(ham, dim) - right_mult(ham, dim));
    l += kappa * dissipator(ops.a, dim);
    for (const SparseC& sm : ops.sigma_minus) {
        l += gamma * dissipator(sm, dim);
        liou.excited_ops.push_back(SparseC(sm.adjoint() * sm));
    }
    l.makeCompressed();
    liou.matrix = std::move(l);
    return liou;
}

SteadyState steady_state(const Liouvillian& liouvillian) {
    const int dim = liouvillian.hilbert.dim();
    const int dim2 = dim * dim;
    const SparseC& l = liouvillian.matrix;

    // Replace the row of rho(0,0) by the trace functional.
    std::vector<Eigen::Triplet<Complex>> trips;
    trips.reserve(static_cast<std::size_t>(l.nonZeros()) + dim);
    for (int k = 0; k < l.outerSize(); ++k) {
        for (SparseC::InnerIterator it(l, k); it; ++it) {
            if (it.row() != 0) trips.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (int k = 0; k < dim; ++k) trips.emplace_back(0, k * dim + k, 1.0);
    SparseC m(dim2, dim2);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();

    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(dim2);
    rhs[0] = 1.0;

    Eigen::SparseLU<SparseC> solver;
    solver.compute(m);
    if (solver.info() != Eigen::Success) {
        throw ComputeError("NO_CONVERGENCE", "sparse LU factorization failed");
    }
    Eigen::VectorXcd x = solver.solve(rhs);
    for (int refine = 0; refine < 2; ++refine) {
        x += solver.solve(rhs - m * x);
    }

    SteadyState out;
    out.rho = Eigen::Map<const MatrixC>(x.data(), dim, dim);
    out.rho = 0.5 * (out.rho + out.rho.adjoint().eval());
    out.rho /= out.rho.trace().real();
    const Eigen::Map<const Eigen::VectorXcd> vec_rho(out.rho.data(), dim2);
    out.residual = (l * vec_rho).norm();
    if (!(out.residual < 1e-10)) {
        throw ComputeError("NO_CONVERGENCE",
                           "steady-state residual " + std::to_string(out.residual));
    }

    // Truncation-tail check: population of the top Fock level.
    const int atom_dim = 1 << liouvillian.hilbert.n_atoms;
    double tail = 0.0;
    for (int s = 0; s < atom_dim; ++s) {
        const int idx = (liouvillian.hilbert.n_fock - 1) * atom_dim + s;
        tail += out.rho(idx, idx).real();
    }
    if (tail > 1e-6) {
        throw ComputeError("TRUNCATION", "top Fock level population " +
                                             std::to_string(tail) +
                                             " > 1e-6; increase n_fock");
    }

    out.n_photon = (liouvillian.number_op * out.rho).eval().trace().real();
    for (const SparseC& op : liouvillian.excited_ops) {
        out.p_excited.push_back((op * out.rho).eval().trace().real());
    }
    if (liouvillian.eta_rad_per_us > 0.0) {
        const double n_ref = liouvillian.eta_rad_per_us * liouvillian.eta_rad_per_us /
                             (liouvillian.kappa_rad_per_us * liouvillian.kappa_rad_per_us);
        out.transmission = out.n_photon / n_ref;
    }
    return out;
}

std::vector<double> scattering_rate(const SteadyState& s, const SystemParams& p) {
    std::vector<double> rates;
    rates.reserve(s.p_excited.size());
    for (const double pe : s.p_excited) {
        // 2 gamma <s+s->, angular gamma in rad/us -> 1/s
        rates.push_back(2.0 * angular_rad_per_us(p.gamma_mhz) * pe * 1e6);
    }
    return rates;
}

std::vector<SpectrumPoint> transmission_spectrum(const SystemParams& p,
                                                 const std::vector<double>& detunings_mhz,
                                                 double drive_eta_mhz, int n_fock) {
    for (const double d : detunings_mhz) {
        if (!std::isfinite(d)) throw ConfigError("non-finite detuning in spectrum scan");
    }
    HilbertConfig h;
    h.n_fock = n_fock;
    h.n_atoms = p.n_atoms;

    std::vector<SpectrumPoint> points;
    points.reserve(detunings_mhz.size());
    for (const double d : detunings_mhz) {
        SystemParams pd = p;
        pd.delta_pc_mhz = d;
        const SteadyState s = steady_state(build_liouvillian(pd, h, drive_eta_mhz));
        SpectrumPoint pt;
        pt.detuning_mhz = d;
        pt.transmission = s.transmission;
        pt.p_excited = s.p_excited.front();
        pt.scattering_per_s = scattering_rate(s, pd).front();
        points.push_back(pt);
    }
    return points;
}

WeakDriveResponse weak_drive_response(double kappa_mhz, double gamma_mhz,
                                      double delta_pc_mhz, double delta_pa_mhz,
                                      double g_mhz, int n_atoms, double eta_mhz) {
    const Complex cav(kappa_mhz, -delta_pc_mhz);
    const Complex atom(gamma_mhz, -delta_pa_mhz);
    const Complex alpha =
        -kI * eta_mhz * atom / (cav * atom + static_cast<double>(n_atoms) * g_mhz * g_mhz);
    const Complex s = (g_mhz == 0.0) ? Complex(0.0) : -kI * g_mhz * alpha / atom;
    WeakDriveResponse r;
    r.n_photon = std::norm(alpha);
    r.p_excited = std::norm(s);
    r.transmission = (eta_mhz == 0.0)
                         ? 0.0
                         : std::norm(alpha * kappa_mhz / eta_mhz);
    return r;
}

WeakDriveResponse weak_drive_response(const SystemParams& p, double eta_mhz) {
    return weak_drive_response(p.kappa_mhz, p.gamma_mhz, p.delta_pc_mhz, p.delta_pa_mhz(),
                               p.g_mhz, p.n_atoms, eta_mhz);
}

void write_spectrum_csv(const std::string& path, const std::vector<SpectrumPoint>& points,
                        bool timestamp_header) {
    CsvWriter csv(timestamp_header);
    csv.header("detuning_mhz, transmission, p_excited, scattering_rate_per_s");
    for (const auto& pt : points) {
        csv.row({pt.detuning_mhz, pt.transmission, pt.p_excited, pt.scattering_per_s});
    }
    csv.write_atomic(path);
}

}  // namespace cavitysim
