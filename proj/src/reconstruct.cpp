#include "cavitysim/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cavitysim/csvio.hpp"
#include "cavitysim/errors.hpp"
#include "cavitysim/fit.hpp"
#include "cavitysim/stats.hpp"

namespace cavitysim {

using json = nlohmann::json;

namespace {

std::vector<double> pooled_histogram(const std::vector<CountTrace>& traces,
                                     std::int64_t& total_bins) {
    std::int64_t max_count = 0;
    total_bins = 0;
    for (const CountTrace& tr : traces) {
        for (const std::int64_t c : tr.counts) {
            max_count = std::max(max_count, c);
            ++total_bins;
        }
    }
    std::vector<double> hist(static_cast<std::size_t>(max_count) + 1, 0.0);
    for (const CountTrace& tr : traces) {
        for (const std::int64_t c : tr.counts) hist[static_cast<std::size_t>(c)] += 1.0;
    }
    return hist;
}

// Two highest separated local maxima of a moving-average smoothed histogram.
std::pair<int, int> find_two_peaks(const std::vector<double>& hist) {
    const int n = static_cast<int>(hist.size());
    std::vector<double> smooth(n, 0.0);
    const int w = 2;  // window 2w+1 = 5
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        int cnt = 0;
        for (int j = std::max(0, i - w); j <= std::min(n - 1, i + w); ++j) {
            sum += hist[j];
            ++cnt;
        }
        smooth[i] = sum / cnt;
    }
    std::vector<int> maxima;
    for (int i = 0; i < n; ++i) {
        const double left = (i > 0) ? smooth[i - 1] : -1.0;
        const double right = (i + 1 < n) ? smooth[i + 1] : -1.0;
        if (smooth[i] > left && smooth[i] >= right && smooth[i] > 0.0) maxima.push_back(i);
    }
    if (maxima.size() < 2) {
        throw ComputeError("UNIMODAL", "fewer than two local maxima in the count histogram");
    }
    // strongest peak, then the strongest one at least 3 counts away; noise
    // wiggles do not count as peaks (5% prominence requirement)
    const auto by_height = [&](int a, int b) { return smooth[a] < smooth[b]; };
    const int first = *std::max_element(maxima.begin(), maxima.end(), by_height);
    int second = -1;
    for (const int m : maxima) {
        if (std::abs(m - first) <= 3) continue;
        if (second < 0 || smooth[m] > smooth[second]) second = m;
    }
    if (second < 0 || smooth[second] < 0.05 * smooth[first] || smooth[second] < 5.0) {
        throw ComputeError("UNIMODAL", "no second prominent peak in the count histogram");
    }
    return {std::min(first, second), std::max(first, second)};
}

struct GaussPair {
    double amp_low, mu_low, sigma_low;
    double amp_high, mu_high, sigma_high;
};

double two_gauss(const GaussPair& g, double x) {
    const double zl = (x - g.mu_low) / g.sigma_low;
    const double zh = (x - g.mu_high) / g.sigma_high;
    return g.amp_low * std::exp(-0.5 * zl * zl) + g.amp_high * std::exp(-0.5 * zh * zh);
}

}  // namespace

HistogramFit fit_histogram(const std::vector<CountTrace>& traces,
                           const FitHistogramOptions& options) {
    std::int64_t total_bins = 0;
    const std::vector<double> hist = pooled_histogram(traces, total_bins);
    if (total_bins < options.min_total_bins) {
        throw ConfigError("histogram needs >= " + std::to_string(options.min_total_bins) +
                          " bins, got " + std::to_string(total_bins));
    }
    const auto [peak_low, peak_high] = find_two_peaks(hist);

    // moment-based start values from the two halves split at the valley
    int valley = peak_low;
    for (int i = peak_low; i <= peak_high; ++i) {
        if (hist[i] < hist[valley]) valley = i;
    }
    const auto moments = [&](int lo, int hi) {
        double mass = 0.0, mean = 0.0, var = 0.0;
        for (int i = lo; i <= hi; ++i) {
            mass += hist[i];
            mean += hist[i] * i;
        }
        mean /= std::max(mass, 1.0);
        for (int i = lo; i <= hi; ++i) var += hist[i] * (i - mean) * (i - mean);
        var /= std::max(mass, 1.0);
        return std::array<double, 3>{mass, mean, std::sqrt(std::max(var, 0.25))};
    };
    const auto low_m = moments(0, valley);
    const auto high_m = moments(valley + 1, static_cast<int>(hist.size()) - 1);

    Eigen::VectorXd start(6);
    start << low_m[0] / (low_m[2] * std::sqrt(kTwoPi)), low_m[1], low_m[2],
        high_m[0] / (high_m[2] * std::sqrt(kTwoPi)), high_m[1], high_m[2];
    FitOptions fopt;
    fopt.lower = Eigen::VectorXd(6);
    fopt.lower << 0.0, 0.0, 0.05, 0.0, 0.0, 0.05;
    fopt.upper = Eigen::VectorXd::Constant(6, 1e12);

    const auto residuals = [&](const Eigen::VectorXd& p) {
        const GaussPair g{p[0], p[1], p[2], p[3], p[4], p[5]};
        Eigen::VectorXd r(hist.size());
        for (std::size_t i = 0; i < hist.size(); ++i) {
            r[static_cast<int>(i)] = hist[i] - two_gauss(g, static_cast<double>(i));
        }
        return r;
    };
    FitResult fit;
    try {
        fit = fit_least_squares(residuals, start, fopt);
    } catch (const ComputeError& e) {
        throw ComputeError("FIT_DIVERGED", std::string("two-Gaussian fit failed: ") + e.what());
    }

    HistogramFit out;
    GaussPair g{fit.params[0], fit.params[1], fit.params[2],
                fit.params[3], fit.params[4], fit.params[5]};
    if (g.mu_low > g.mu_high) {
        std::swap(g.amp_low, g.amp_high);
        std::swap(g.mu_low, g.mu_high);
        std::swap(g.sigma_low, g.sigma_high);
    }
    out.mu_low = g.mu_low;
    out.sigma_low = g.sigma_low;
    out.mu_high = g.mu_high;
    out.sigma_high = g.sigma_high;
    const double mass_low = g.amp_low * g.sigma_low * std::sqrt(kTwoPi);
    const double mass_high = g.amp_high * g.sigma_high * std::sqrt(kTwoPi);
    out.weight_low = mass_low / (mass_low + mass_high);
    out.weight_high = mass_high / (mass_low + mass_high);

    if (std::fabs(out.mu_high - out.mu_low) < 2.0 * (out.sigma_low + out.sigma_high)) {
        throw ComputeError("UNIMODAL", "fitted peaks fail the separation test");
    }

    if (options.empirical_thresholds) {
        // per-peak quantiles of the raw counts split at the valley
        std::vector<double> low_sample, high_sample;
        for (const CountTrace& tr : traces) {
            for (const std::int64_t c : tr.counts) {
                (c <= valley ? low_sample : high_sample).push_back(static_cast<double>(c));
            }
        }
        const auto quantile = [](std::vector<double>& v, double q) {
            std::sort(v.begin(), v.end());
            const double pos = q * (static_cast<double>(v.size()) - 1.0);
            const std::size_t i = static_cast<std::size_t>(pos);
            const double frac = pos - static_cast<double>(i);
            return (i + 1 < v.size()) ? v[i] * (1.0 - frac) + v[i + 1] * frac : v.back();
        };
        out.theta_f3 = quantile(low_sample, 1.0 - options.misclassification);
        out.theta_f4 = quantile(high_sample, options.misclassification);
    } else {
        const double z = inv_norm_cdf(1.0 - options.misclassification);
        out.theta_f4 = out.mu_high - z * out.sigma_high;
        out.theta_f3 = out.mu_low + z * out.sigma_low;
    }
    return out;
}

namespace {

enum class Claim { F4, F3, Ambiguous };

Claim claim_of(std::int64_t count, const HistogramFit& fit) {
    const bool f4 = static_cast<double>(count) <= fit.theta_f4;
    const bool f3 = static_cast<double>(count) >= fit.theta_f3;
    if (f4 && !f3) return Claim::F4;
    if (f3 && !f4) return Claim::F3;
    return Claim::Ambiguous;  // claimed by both regions, or by neither
}

}  // namespace

SpinTrace classify(const CountTrace& trace, const HistogramFit& fit) {
    const std::size_t n = trace.counts.size();
    std::vector<Claim> claims(n);
    bool any_unambiguous = false;
    for (std::size_t i = 0; i < n; ++i) {
        claims[i] = claim_of(trace.counts[i], fit);
        any_unambiguous |= claims[i] != Claim::Ambiguous;
    }
    if (!any_unambiguous) {
        throw ComputeError("ALL_AMBIGUOUS", "no unambiguous bin in trace");
    }

    SpinTrace out;
    out.bin_ms = trace.bin_ms;
    out.t0_ms = trace.t0_ms;
    out.states.resize(n);
    out.rules.assign(n, ResolutionRule::Unambiguous);
    for (std::size_t i = 0; i < n; ++i) {
        if (claims[i] == Claim::F4) out.states[i] = Spin::F4;
        if (claims[i] == Claim::F3) out.states[i] = Spin::F3;
    }

    // resolve maximal ambiguous runs from their unambiguous neighbors
    std::size_t i = 0;
    while (i < n) {
        if (claims[i] != Claim::Ambiguous) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && claims[j + 1] == Claim::Ambiguous) ++j;
        const bool has_prev = i > 0;
        const bool has_next = j + 1 < n;
        if (!has_prev && !has_next) break;  // cannot happen: any_unambiguous
        if (!has_prev || !has_next) {
            const Spin s = has_prev ? out.states[i - 1] : out.states[j + 1];
            for (std::size_t k = i; k <= j; ++k) {
                out.states[k] = s;
                out.rules[k] = ResolutionRule::Edge;
            }
        } else if (out.states[i - 1] == out.states[j + 1]) {
            for (std::size_t k = i; k <= j; ++k) {
                out.states[k] = out.states[i - 1];
                out.rules[k] = ResolutionRule::Noise;
            }
        } else {
            // different flanking states: a jump, placed at the run midpoint
            // (single bins go entirely to the subsequent state)
            const std::size_t run = j - i + 1;
            const std::size_t n_prev = run / 2;
            for (std::size_t k = i; k <= j; ++k) {
                if (k < i + n_prev) {
                    out.states[k] = out.states[i - 1];
                    out.rules[k] = ResolutionRule::JumpToPrevious;
                } else {
                    out.states[k] = out.states[j + 1];
                    out.rules[k] = ResolutionRule::JumpToSubsequent;
                }
            }
        }
        i = j + 1;
    }
    return out;
}

std::pair<int, int> detect_presence(const CountTrace& trace, const HistogramFit& fit) {
    const int n = static_cast<int>(trace.counts.size());
    const auto is_high = [&](int k) {
        return static_cast<double>(trace.counts[k]) >= fit.theta_f3;
    };
    int prefix = 0;
    while (prefix < n && is_high(prefix)) ++prefix;
    int suffix = 0;
    while (suffix < n - prefix && is_high(n - 1 - suffix)) ++suffix;
    if (prefix < 3 || suffix < 3 || prefix + suffix >= n) {
        throw ComputeError("NO_ATOM", "no coupled segment bounded by sustained high levels");
    }
    return {prefix, n - 1 - suffix};
}

void write_spin_trace_csv(const std::string& path, const SpinTrace& trace,
                          bool timestamp_header) {
    CsvWriter csv(timestamp_header);
    csv.header("t_ms, state, rule");
    for (std::size_t k = 0; k < trace.states.size(); ++k) {
        csv.row({trace.t0_ms + static_cast<double>(k) * trace.bin_ms,
                 static_cast<double>(static_cast<int>(trace.states[k])),
                 static_cast<double>(static_cast<int>(trace.rules[k]))});
    }
    csv.write_atomic(path);
}

SpinTrace read_spin_trace_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.columns.size() != 3 || table.rows.size() < 2) {
        throw SimError("IO", path + ": expected columns t_ms, state, rule");
    }
    SpinTrace trace;
    trace.t0_ms = table.rows.front()[0];
    trace.bin_ms = table.rows[1][0] - table.rows[0][0];
    for (const auto& row : table.rows) {
        trace.states.push_back(row[1] == 0.0 ? Spin::F4 : Spin::F3);
        trace.rules.push_back(static_cast<ResolutionRule>(static_cast<int>(row[2])));
    }
    return trace;
}

std::string histogram_fit_to_json(const HistogramFit& fit) {
    json j;
    j["mu_low"] = fit.mu_low;
    j["sigma_low"] = fit.sigma_low;
    j["weight_low"] = fit.weight_low;
    j["mu_high"] = fit.mu_high;
    j["sigma_high"] = fit.sigma_high;
    j["weight_high"] = fit.weight_high;
    j["theta_f4"] = fit.theta_f4;
    j["theta_f3"] = fit.theta_f3;
    return j.dump(2) + "\n";
}

HistogramFit histogram_fit_from_json(const std::string& text) {
    const json j = json::parse(text);
    HistogramFit fit;
    fit.mu_low = j.at("mu_low");
    fit.sigma_low = j.at("sigma_low");
    fit.weight_low = j.at("weight_low");
    fit.mu_high = j.at("mu_high");
    fit.sigma_high = j.at("sigma_high");
    fit.weight_high = j.at("weight_high");
    fit.theta_f4 = j.at("theta_f4");
    fit.theta_f3 = j.at("theta_f3");
    return fit;
}

}  // namespace cavitysim
