#include "cavitysim/rates.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "cavitysim/csvio.hpp"
#include "cavitysim/errors.hpp"
#include "cavitysim/fit.hpp"

namespace cavitysim {

using json = nlohmann::json;

CorrelationCurve autocovariance(const std::vector<SpinTrace>& traces, double max_lag_ms) {
    if (traces.empty()) throw ConfigError("autocovariance: empty ensemble");
    const double bin_ms = traces.front().bin_ms;
    const int max_lag = static_cast<int>(std::floor(max_lag_ms / bin_ms + 1e-9));
    std::int64_t total_bins = 0;
    for (const SpinTrace& tr : traces) {
        if (tr.bin_ms != bin_ms) throw ConfigError("autocovariance: mixed bin widths");
        total_bins += static_cast<std::int64_t>(tr.states.size());
    }
    if (total_bins <= 10 * static_cast<std::int64_t>(max_lag)) {
        throw ConfigError("autocovariance: need > 10 * max_lag bins");
    }

    std::int64_t sum_x = 0;
    std::vector<std::int64_t> pair_sum(max_lag + 1, 0), pair_cnt(max_lag + 1, 0);
    for (const SpinTrace& tr : traces) {
        const int n = static_cast<int>(tr.states.size());
        std::vector<int> x(n);
        for (int i = 0; i < n; ++i) x[i] = tr.states[i] == Spin::F4 ? 1 : 0;
        for (int i = 0; i < n; ++i) sum_x += x[i];
        for (int k = 0; k <= max_lag; ++k) {
            for (int i = 0; i + k < n; ++i) {
                pair_sum[k] += x[i] * x[i + k];
                ++pair_cnt[k];
            }
        }
    }
    const double mean = static_cast<double>(sum_x) / static_cast<double>(total_bins);

    CorrelationCurve curve;
    for (int k = 0; k <= max_lag; ++k) {
        curve.lags_ms.push_back(k * bin_ms);
        curve.values.push_back(static_cast<double>(pair_sum[k]) /
                                   static_cast<double>(pair_cnt[k]) -
                               mean * mean);
        curve.n_pairs.push_back(pair_cnt[k]);
    }
    return curve;
}

CorrelationCurve autocovariance(const SpinTrace& trace, double max_lag_ms) {
    return autocovariance(std::vector<SpinTrace>{trace}, max_lag_ms);
}

double f4_fraction(const std::vector<SpinTrace>& traces) {
    std::int64_t n = 0, n4 = 0;
    for (const SpinTrace& tr : traces) {
        for (const Spin s : tr.states) {
            ++n;
            n4 += s == Spin::F4 ? 1 : 0;
        }
    }
    if (n == 0) throw ConfigError("f4_fraction: empty ensemble");
    return static_cast<double>(n4) / static_cast<double>(n);
}

namespace {

struct ExpFit {
    double amplitude = 0.0;
    double rate_per_ms = 0.0;
    double rate_var = 0.0;  // variance of rate_per_ms (chi2/dof scaled)
};

// Weighted least squares of A exp(-R tau) over lags in (0, window_ms].
ExpFit fit_exponential(const CorrelationCurve& curve, double window_ms, double a0,
                       double r0) {
    std::vector<double> taus, values, weights;
    for (std::size_t k = 1; k < curve.lags_ms.size(); ++k) {
        if (curve.lags_ms[k] <= window_ms) {
            taus.push_back(curve.lags_ms[k]);
            values.push_back(curve.values[k]);
            weights.push_back(std::sqrt(static_cast<double>(curve.n_pairs[k])));
        }
    }
    if (taus.size() < 3) {
        throw ComputeError("NEGATIVE_DECAY", "too few lags inside the fit window");
    }
    const auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(taus.size());
        for (std::size_t i = 0; i < taus.size(); ++i) {
            r[static_cast<int>(i)] =
                weights[i] * (values[i] - p[0] * std::exp(-p[1] * taus[i]));
        }
        return r;
    };
    Eigen::VectorXd start(2);
    start << a0, r0;
    const FitResult fit = fit_least_squares(residuals, start);
    ExpFit out;
    out.amplitude = fit.params[0];
    out.rate_per_ms = fit.params[1];
    const int dof = std::max(fit.n_residuals - 2, 1);
    out.rate_var = fit.covariance(1, 1) * fit.chi2 / dof;  // weights are relative
    return out;
}

}  // namespace

RateEstimate fit_rates(const CorrelationCurve& curve, double p4,
                       std::int64_t n_bins_for_p4) {
    if (!(curve.values.front() > 0.0)) {
        throw ComputeError("NEGATIVE_DECAY", "C(0) must be positive");
    }
    // crude decay estimate: first lag where C drops below C(1)/e
    double r_hat = 0.0;
    for (std::size_t k = 2; k < curve.values.size(); ++k) {
        if (curve.values[k] < curve.values[1] / std::exp(1.0)) {
            r_hat = 1.0 / (curve.lags_ms[k] - curve.lags_ms[1]);
            break;
        }
    }
    if (r_hat <= 0.0) r_hat = 1.0 / curve.lags_ms.back();

    ExpFit ef = fit_exponential(curve, 3.0 / r_hat, curve.values.front(), r_hat);
    if (ef.rate_per_ms <= 0.0) {
        throw ComputeError("NEGATIVE_DECAY", "fitted decay rate is not positive");
    }
    ef = fit_exponential(curve, 3.0 / ef.rate_per_ms, ef.amplitude, ef.rate_per_ms);
    if (ef.rate_per_ms <= 0.0) {
        throw ComputeError("NEGATIVE_DECAY", "fitted decay rate is not positive");
    }

    const double total_rate = per_s_from_per_ms(ef.rate_per_ms);
    const double sigma_rate = per_s_from_per_ms(std::sqrt(std::max(ef.rate_var, 0.0)));
    const double sigma_p4 =
        std::sqrt(p4 * (1.0 - p4) / std::max<std::int64_t>(n_bins_for_p4, 1));

    RateEstimate est;
    est.method = "correlation";
    est.r_4to3_per_s = (1.0 - p4) * total_rate;
    est.r_3to4_per_s = p4 * total_rate;
    est.stderr_4to3_per_s = std::hypot((1.0 - p4) * sigma_rate, total_rate * sigma_p4);
    est.stderr_3to4_per_s = std::hypot(p4 * sigma_rate, total_rate * sigma_p4);
    return est;
}

RateEstimate dwell_time_rates(const std::vector<SpinTrace>& traces) {
    // complete (uncensored) dwell intervals per state, pooled across traces
    double sum_ms[2] = {0.0, 0.0};
    std::int64_t count[2] = {0, 0};
    for (const SpinTrace& tr : traces) {
        const int n = static_cast<int>(tr.states.size());
        int run_start = 0;
        for (int i = 1; i <= n; ++i) {
            if (i == n || tr.states[i] != tr.states[run_start]) {
                const bool censored = run_start == 0 || i == n;
                if (!censored) {
                    const int idx = tr.states[run_start] == Spin::F4 ? 0 : 1;
                    sum_ms[idx] += (i - run_start) * tr.bin_ms;
                    ++count[idx];
                }
                run_start = i;
            }
        }
    }
    if (count[0] < 10 || count[1] < 10) {
        throw ComputeError("TOO_FEW_DWELLS",
                           "need >= 10 complete dwell intervals per state, got " +
                               std::to_string(count[0]) + " (F=4) and " +
                               std::to_string(count[1]) + " (F=3)");
    }
    RateEstimate est;
    est.method = "dwell";
    est.r_4to3_per_s = per_s_from_per_ms(count[0] / sum_ms[0]);
    est.r_3to4_per_s = per_s_from_per_ms(count[1] / sum_ms[1]);
    est.stderr_4to3_per_s = est.r_4to3_per_s / std::sqrt(static_cast<double>(count[0]));
    est.stderr_3to4_per_s = est.r_3to4_per_s / std::sqrt(static_cast<double>(count[1]));
    return est;
}

RateEstimate dwell_time_rates(const SpinTrace& trace) {
    return dwell_time_rates(std::vector<SpinTrace>{trace});
}

void write_correlation_csv(const std::string& path, const CorrelationCurve& curve,
                           bool timestamp_header) {
    CsvWriter csv(timestamp_header);
    csv.header("lag_ms, C, n_pairs");
    for (std::size_t k = 0; k < curve.lags_ms.size(); ++k) {
        csv.row({curve.lags_ms[k], curve.values[k], static_cast<double>(curve.n_pairs[k])});
    }
    csv.write_atomic(path);
}

std::string rate_estimate_to_json(const RateEstimate& estimate) {
    json j;
    j["method"] = estimate.method;
    j["r_4to3_per_s"] = estimate.r_4to3_per_s;
    j["r_3to4_per_s"] = estimate.r_3to4_per_s;
    j["stderr_4to3_per_s"] = estimate.stderr_4to3_per_s;
    j["stderr_3to4_per_s"] = estimate.stderr_3to4_per_s;
    return j.dump(2) + "\n";
}

}  // namespace cavitysim
