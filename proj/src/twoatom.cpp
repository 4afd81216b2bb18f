#include "cavitysim/twoatom.hpp"

#include <cmath>

#include "cavitysim/csvio.hpp"
#include "cavitysim/errors.hpp"
#include "cavitysim/qmodel.hpp"

namespace cavitysim {

void TwoAtomModel::validate() const {
    if (!(r1_per_s > 0.0) || !(r2_per_s > 0.0)) {
        throw ConfigError("TwoAtomModel rates must be > 0");
    }
    levels.validate();
}

std::array<double, 3> populations(const TwoAtomModel& m, double t_ms) {
    if (!(t_ms >= 0.0)) throw ConfigError("populations: t must be >= 0");
    const double t = t_ms * 1e-3;  // rates are per second
    const double a = 2.0 * m.r2_per_s;
    const double b = m.r1_per_s;
    const double p44 = std::exp(-a * t);
    // p_one = a (e^{-at} - e^{-bt}) / (b - a), stable through
    // phi(x) = (1 - e^{-x})/x so the a -> b limit is exact.
    const double x = (b - a) * t;
    const double phi = (std::fabs(x) < 1e-8) ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
    const double p_one = a * t * p44 * phi;
    return {p44, p_one, 1.0 - p44 - p_one};
}

double expected_transmission(const TwoAtomModel& m, double t_ms) {
    const auto p = populations(m, t_ms);
    return m.levels.rate_low2 * p[0] + m.levels.rate_low * p[1] + m.levels.rate_high * p[2];
}

std::vector<double> constant_rate_curve(double r_per_s, const LevelModel& levels,
                                        const std::vector<double>& times_ms) {
    if (!(r_per_s > 0.0)) throw ConfigError("constant_rate_curve: rate must be > 0");
    TwoAtomModel flat;
    flat.r1_per_s = r_per_s;
    flat.r2_per_s = r_per_s;
    flat.levels = levels;
    std::vector<double> out;
    out.reserve(times_ms.size());
    for (const double t : times_ms) out.push_back(expected_transmission(flat, t));
    return out;
}

double extract_r2_from_levels(double initial_t1, double initial_t2, double r1_per_s) {
    if (!(r1_per_s > 0.0)) throw ConfigError("extract_r2_from_levels: r1 must be > 0");
    if (!(initial_t1 > 0.0) || !(initial_t2 > 0.0)) {
        throw ComputeError("NONPHYSICAL", "transmission levels must be > 0");
    }
    const double ratio = initial_t2 / initial_t1;
    if (!(ratio > 0.0) || ratio > 1.0) {
        throw ComputeError("NONPHYSICAL",
                           "two-atom/one-atom level ratio " + std::to_string(ratio) +
                               " outside (0, 1]");
    }
    return r1_per_s * ratio;
}

double scattering_ratio_two_vs_one(const SystemParams& p) {
    const double eta = eta_for_photon_number(p.n_empty, p.kappa_mhz);
    const int n_fock = adequate_n_fock(p.n_empty);
    double per_atom[2];
    for (int n_atoms : {1, 2}) {
        SystemParams pa = p;
        pa.n_atoms = n_atoms;
        const SteadyState s =
            steady_state(build_liouvillian(pa, HilbertConfig{n_fock, n_atoms}, eta));
        per_atom[n_atoms - 1] = s.p_excited.front();
    }
    if (!(per_atom[1] > 0.0) || !(per_atom[0] > 0.0)) {
        throw ComputeError("NONPHYSICAL", "vanishing per-atom scattering");
    }
    return per_atom[1] / per_atom[0];
}

void write_curves_csv(const std::string& path, const TwoAtomModel& m,
                      const std::vector<double>& times_ms, bool timestamp_header) {
    m.validate();
    const std::vector<double> c1 = constant_rate_curve(m.r1_per_s, m.levels, times_ms);
    const std::vector<double> c2 = constant_rate_curve(m.r2_per_s, m.levels, times_ms);
    CsvWriter csv(timestamp_header);
    csv.header("t_ms, T_coupled, T_const_r1, T_const_r2");
    for (std::size_t i = 0; i < times_ms.size(); ++i) {
        csv.row({times_ms[i], expected_transmission(m, times_ms[i]), c1[i], c2[i]});
    }
    csv.write_atomic(path);
}

}  // namespace cavitysim
