// Quantum-jump rate extraction from reconstructed spin traces: second-order
// correlation of the binary state signal and, as an independent cross-check,
// direct dwell-time statistics.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavitysim/reconstruct.hpp"

namespace cavitysim {

struct CorrelationCurve {
    std::vector<double> lags_ms;
    std::vector<double> values;       // autocovariance of x (x=1 for F=4)
    std::vector<std::int64_t> n_pairs;
};

struct RateEstimate {
    double r_4to3_per_s = 0.0;
    double r_3to4_per_s = 0.0;
    double stderr_4to3_per_s = 0.0;
    double stderr_3to4_per_s = 0.0;
    std::string method;  // "correlation" | "dwell"
};

// C(tau) = <x(t) x(t+tau)> - <x>^2 with x = 1 for F=4, pooled over all valid
// pairs of every trace; C(0) = p4 (1 - p4) exactly.
CorrelationCurve autocovariance(const std::vector<SpinTrace>& traces, double max_lag_ms);
CorrelationCurve autocovariance(const SpinTrace& trace, double max_lag_ms);

// Pooled F=4 fraction, the stationarity input to fit_rates.
double f4_fraction(const std::vector<SpinTrace>& traces);

// Weighted fit of A exp(-R tau) over lags in (0, 3/R_hat] with one window
// refinement; splits R by stationarity: r_4to3 = (1-p4) R, r_3to4 = p4 R.
// Throws NEGATIVE_DECAY when the fitted R (or the data) gives no decay.
RateEstimate fit_rates(const CorrelationCurve& curve, double p4, std::int64_t n_bins_for_p4);

// 1/mean(complete dwell) per state; censored edge intervals are excluded.
// Requires >= 10 complete dwells per state ("TOO_FEW_DWELLS").
RateEstimate dwell_time_rates(const std::vector<SpinTrace>& traces);
RateEstimate dwell_time_rates(const SpinTrace& trace);

void write_correlation_csv(const std::string& path, const CorrelationCurve& curve,
                           bool timestamp_header);
std::string rate_estimate_to_json(const RateEstimate& estimate);

}  // namespace cavitysim
