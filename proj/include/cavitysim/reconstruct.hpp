// State reconstruction from binned count traces: pooled histogram,
// two-Gaussian fit, dual 1%-misclassification thresholds and context
// resolution of the overlap region.
//
// theta_f4 is the upper edge of the F=4 region (1% of the high/F=3 Gaussian
// lies below it); theta_f3 is the lower edge of the F=3 region (1% of the
// low/F=4 Gaussian lies above it). The regions may overlap; a bin claimed by
// both regions (or by neither, for well-separated peaks) is ambiguous and is
// resolved from its neighbors.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavitysim/telegraph.hpp"

namespace cavitysim {

struct HistogramFit {
    double mu_low = 0.0, sigma_low = 0.0, weight_low = 0.0;
    double mu_high = 0.0, sigma_high = 0.0, weight_high = 0.0;
    double theta_f4 = 0.0;  // counts <= theta_f4 claimed by F=4
    double theta_f3 = 0.0;  // counts >= theta_f3 claimed by F=3
};

// Which rule assigned each bin its final state.
enum class ResolutionRule : int {
    Unambiguous = 0,
    Noise = 1,         // equal flanking states, middle value treated as noise
    JumpToPrevious = 2,  // earlier half of an ambiguous run at a jump
    JumpToSubsequent = 3,  // later half (single bins: the whole bin)
    Edge = 4,          // trace endpoint, single unambiguous neighbor
};

struct SpinTrace {
    double bin_ms = 0.0;
    double t0_ms = 0.0;
    std::vector<Spin> states;
    std::vector<ResolutionRule> rules;  // same length as states
};

struct FitHistogramOptions {
    double misclassification = 0.01;  // per-Gaussian threshold mass
    bool empirical_thresholds = false;  // quantiles of the data instead of the fit
    int min_total_bins = 1000;
};

// Least-squares two-Gaussian fit to the pooled integer count histogram
// (bin width 1 count). Errors: UNIMODAL when the fitted peaks fail the
// separation test |mu_high-mu_low| >= 2(sigma_low+sigma_high) or when no two
// smoothed local maxima exist; FIT_DIVERGED from the optimizer.
HistogramFit fit_histogram(const std::vector<CountTrace>& traces,
                           const FitHistogramOptions& options = {});

// Threshold classification plus context resolution. Pure per-trace function;
// throws ALL_AMBIGUOUS when no bin is unambiguous.
SpinTrace classify(const CountTrace& trace, const HistogramFit& fit);

// First and last bin of the coupled segment, bounded by sustained (>= 3 bin)
// high-level segments at both ends. Throws NO_ATOM.
std::pair<int, int> detect_presence(const CountTrace& trace, const HistogramFit& fit);

// CSV `t_ms, state(0=F4,1=F3), rule`; HistogramFit round-trips as JSON.
void write_spin_trace_csv(const std::string& path, const SpinTrace& trace,
                          bool timestamp_header);
SpinTrace read_spin_trace_csv(const std::string& path);
std::string histogram_fit_to_json(const HistogramFit& fit);
HistogramFit histogram_fit_from_json(const std::string& text);

}  // namespace cavitysim
