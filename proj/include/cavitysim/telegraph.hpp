// Forward model of the telegraph measurement: a continuous-time Markov jump
// process over hyperfine configurations plus Poissonian photon counting.
//
// Paths carry the number of atoms coupled to the cavity (atoms in F=4):
// one atom has states {1 (F=4), 0 (F=3)}, two atoms {2, 1, 0} with (3,3)
// absorbing while the repumper is off.
//
// LevelModel rates are photon rates at the cavity output in 1/ms; bin_counts
// thins them by det_eff. background is detector dark counts in 1/ms and is
// not thinned.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavitysim/params.hpp"

namespace cavitysim {

enum class Spin : int { F4 = 0, F3 = 1 };  // CSV encoding: 0=F4, 1=F3

struct LevelModel {
    double rate_high = 0.0;   // no atom coupled (all in F=3)
    double rate_low = 0.0;    // one atom coupled
    double rate_low2 = 0.0;   // two atoms coupled
    double background = 0.0;  // dark counts per ms

    double rate_for(int n_coupled) const;
    void validate() const;  // rate_high > rate_low >= rate_low2 >= 0
};

struct PathEvent {
    double t_ms = 0.0;
    int n_coupled = 0;  // state from t_ms until the next event
};

struct SpinPath {
    double duration_ms = 0.0;
    std::vector<PathEvent> events;  // events.front().t_ms == 0

    int state_at(double t_ms) const;
};

struct TraceMeta {
    std::uint64_t seed = 0;
    int pad_bins_start = 0;
    int pad_bins_end = 0;
};

struct CountTrace {
    double bin_ms = 0.0;
    double t0_ms = 0.0;
    std::vector<std::int64_t> counts;
    TraceMeta meta;
};

// Exact CTMC sample with exponential waiting times; reproducible from seed.
SpinPath sample_spin_path(const JumpRates& rates, double duration_ms, Spin initial,
                          std::uint64_t seed);

// Both atoms start in F=4; exit rate 2*r2 from (4,4), r1 from the merged
// one-coupled configuration, (3,3) absorbing.
SpinPath sample_two_atom_path(double r1_per_s, double r2_per_s, double duration_ms,
                              std::uint64_t seed);

// Poisson counts per bin with mean det_eff * integral(rate along path) +
// background * bin_ms; jumps inside a bin produce intermediate means.
CountTrace bin_counts(const SpinPath& path, const LevelModel& level, double det_eff,
                      double bin_ms, std::uint64_t seed);

// 1 - exp(-rate * window): probability of at least one jump in the window.
double jump_probability(double rate_per_s, double window_ms);

enum class InitialSpin { Stationary, F4, F3 };

struct Ensemble {
    std::vector<CountTrace> traces;
    std::vector<SpinPath> paths;  // generation truth, parallel to traces
    // generation record (for the manifest)
    bool two_atom = false;
    double r_4to3_per_s = 0.0, r_3to4_per_s = 0.0;  // or r1/r2 for two atoms
    LevelModel level;
    double det_eff = 0.0, bin_ms = 0.0, duration_ms = 0.0;
    int n_traces = 0;
    std::uint64_t master_seed = 0;
    int pad_bins_start = 0, pad_bins_end = 0;
};

// Independent per-trace streams: seed_i = derive_seed(master_seed, i) for the
// path and derive_seed(master_seed, i + n_traces) for the counting.
Ensemble simulate_ensemble(const JumpRates& rates, const LevelModel& level, double det_eff,
                           double bin_ms, int n_traces, double duration_ms,
                           std::uint64_t master_seed,
                           InitialSpin initial = InitialSpin::Stationary,
                           int pad_bins_start = 0, int pad_bins_end = 0);

Ensemble simulate_two_atom_ensemble(double r1_per_s, double r2_per_s,
                                    const LevelModel& level, double det_eff, double bin_ms,
                                    int n_traces, double duration_ms,
                                    std::uint64_t master_seed);

std::vector<double> ensemble_mean_counts(const std::vector<CountTrace>& traces);

// Per-bin generation truth against which reconstructions are scored.
struct BinTruth {
    int majority_n_coupled = 0;
    bool has_jump = false;
    int start_n_coupled = 0;
    int end_n_coupled = 0;
};
std::vector<BinTruth> bin_occupancy(const SpinPath& path, double bin_ms, int n_bins);

// Photon rate at the cavity output for a given intra-cavity photon number:
// 2*kappa*n in 1/ms.
double output_rate_per_ms(double n_photon, double kappa_mhz);

// Levels for the configured operating point, via steady-state solves with
// one and two atoms at the params' detunings and drive n_empty.
LevelModel derive_level_model(const SystemParams& p, double background_per_ms = 0.0);

// CSV `t_ms, counts` (t_ms = bin start); manifest JSON with parameters,
// per-trace seeds and the trace file list.
void write_trace_csv(const std::string& path, const CountTrace& trace,
                     bool timestamp_header);
CountTrace read_trace_csv(const std::string& path);
std::vector<std::string> write_ensemble(const std::string& out_dir, const std::string& stem,
                                        const Ensemble& ensemble, bool timestamp_header);
std::vector<CountTrace> read_ensemble(const std::string& manifest_path);

}  // namespace cavitysim
