// Closed-form model of the coupled two-atom spin dynamics: a three-state
// chain (4,4) -> one-coupled -> (3,3) with conditional rates, the expected
// transmission curve and the constant-rate comparison curves. No parameter
// is ever fitted to the curve; r1 and r2 are measured or derived elsewhere.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "cavitysim/params.hpp"
#include "cavitysim/telegraph.hpp"

namespace cavitysim {

struct TwoAtomModel {
    double r1_per_s = 68.0;  // jump rate with a single atom coupled
    double r2_per_s = 28.0;  // per-atom jump rate with both coupled
    LevelModel levels;       // rate_low2/rate_low/rate_high as T2/T1/T0

    void validate() const;
};

// (p_44, p_one, p_33) at time t; (4,4) decays at 2*r2, the merged one-coupled
// class at r1, (3,3) is absorbing. The removable singularity at r1 = 2*r2 is
// evaluated through a stable expm1-based form.
std::array<double, 3> populations(const TwoAtomModel& m, double t_ms);

// T(t) = T2 p_44 + T1 p_one + T0 p_33.
double expected_transmission(const TwoAtomModel& m, double t_ms);

// Same chain with an atom-number-independent rate r (exit 2r, then r).
std::vector<double> constant_rate_curve(double r_per_s, const LevelModel& levels,
                                        const std::vector<double>& times_ms);

// Per-atom jump rate with two atoms coupled, from the measured initial
// transmission levels: the jump rate follows the per-atom scattering rate,
// which in the weak-excitation limit is proportional to the intra-cavity
// photon number, so r2 = r1 * T2/T1. Throws NONPHYSICAL unless the ratio is
// in (0, 1].
double extract_r2_from_levels(double initial_t1, double initial_t2, double r1_per_s);

// The same ratio through full steady-state solves with one and two atoms at
// the params' operating point (per-atom <s+s-> ratio).
double scattering_ratio_two_vs_one(const SystemParams& p);

// CSV `t_ms, T_coupled, T_const_r1, T_const_r2`.
void write_curves_csv(const std::string& path, const TwoAtomModel& m,
                      const std::vector<double>& times_ms, bool timestamp_header);

}  // namespace cavitysim
