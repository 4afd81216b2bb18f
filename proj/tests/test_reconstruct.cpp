#include <doctest.h>

#include <cmath>

#include "cavitysim/errors.hpp"
#include "cavitysim/reconstruct.hpp"
#include "cavitysim/rng.hpp"
#include "cavitysim/stats.hpp"
#include "cavitysim/telegraph.hpp"

using namespace cavitysim;

namespace {

// integer-rounded normal samples packed into count traces
std::vector<CountTrace> gaussian_mixture_traces(double mu_low, double sigma_low,
                                                double mu_high, double sigma_high,
                                                double weight_low, int n_samples,
                                                std::uint64_t seed) {
    Rng rng(seed);
    CountTrace trace;
    trace.bin_ms = 2.0;
    for (int i = 0; i < n_samples; ++i) {
        const bool low = rng.uniform() < weight_low;
        const double mu = low ? mu_low : mu_high;
        const double sigma = low ? sigma_low : sigma_high;
        const double z =
            std::sqrt(-2.0 * std::log(1.0 - rng.uniform())) * std::cos(kTwoPi * rng.uniform());
        trace.counts.push_back(
            std::max<std::int64_t>(0, std::llround(mu + sigma * z)));
    }
    return {trace};
}

CountTrace trace_of(std::vector<std::int64_t> counts) {
    CountTrace t;
    t.bin_ms = 2.0;
    t.counts = std::move(counts);
    return t;
}

HistogramFit reference_fit() {
    HistogramFit fit;
    fit.mu_low = 4.0;
    fit.sigma_low = 2.0;
    fit.mu_high = 40.0;
    fit.sigma_high = 6.3;
    fit.theta_f4 = 25.3;
    fit.theta_f3 = 8.65;
    return fit;
}

std::vector<CountTrace> default_ensemble(std::uint64_t seed, int n_traces = 60) {
    LevelModel level;
    level.rate_high = 20.0 / 0.013;
    level.rate_low = 2.0 / 0.013;
    const JumpRates rates{106.0, 42.0};
    return simulate_ensemble(rates, level, 0.013, 2.0, n_traces, 400.0, seed).traces;
}

}  // namespace

TEST_CASE("two-Gaussian fit recovers a synthetic mixture and its thresholds") {
    // oracle: theta_f4 = 40 - z(0.99)*6.3, theta_f3 = 4 + z(0.99)*2 with the
    // inverse normal CDF validated against tabulated quantiles elsewhere
    const auto traces = gaussian_mixture_traces(4.0, 2.0, 40.0, 6.3, 0.3, 200000, 17);
    const HistogramFit fit = fit_histogram(traces);
    CHECK(fit.mu_low == doctest::Approx(4.0).epsilon(0.02));
    CHECK(fit.sigma_low == doctest::Approx(2.0).epsilon(0.05));
    CHECK(fit.mu_high == doctest::Approx(40.0).epsilon(0.01));
    CHECK(fit.sigma_high == doctest::Approx(6.3).epsilon(0.03));
    CHECK(fit.weight_low == doctest::Approx(0.3).epsilon(0.03));
    CHECK(fit.theta_f4 == doctest::Approx(25.34).epsilon(0.01));
    CHECK(fit.theta_f3 == doctest::Approx(8.65).epsilon(0.015));

    // the threshold definitions are exact properties of the fitted Gaussians
    CHECK(norm_cdf((fit.theta_f4 - fit.mu_high) / fit.sigma_high) ==
          doctest::Approx(0.01).epsilon(1e-9));
    CHECK(1.0 - norm_cdf((fit.theta_f3 - fit.mu_low) / fit.sigma_low) ==
          doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("unimodal histograms and sparse data are rejected") {
    const auto one_peak = gaussian_mixture_traces(20.0, 3.0, 20.0, 3.0, 0.5, 50000, 3);
    CHECK_THROWS_WITH_AS(fit_histogram(one_peak), doctest::Contains("UNIMODAL"),
                         ComputeError);
    // overlapping peaks that fail the separation test
    const auto close_peaks = gaussian_mixture_traces(16.0, 3.0, 24.0, 3.0, 0.5, 50000, 4);
    CHECK_THROWS_AS(fit_histogram(close_peaks), ComputeError);
    const auto tiny = gaussian_mixture_traces(4.0, 2.0, 40.0, 6.3, 0.3, 500, 5);
    CHECK_THROWS_AS(fit_histogram(tiny), ConfigError);
}

TEST_CASE("well separated peaks leave no ambiguous bins") {
    // gap > 10 sigma: every sample sits on its own peak, none in the overlap
    Rng rng(8);
    CountTrace trace;
    trace.bin_ms = 2.0;
    for (int i = 0; i < 20000; ++i) {
        const bool low = rng.uniform() < 0.4;
        trace.counts.push_back(low ? 3 + static_cast<std::int64_t>(rng.uniform() * 3)
                                   : 398 + static_cast<std::int64_t>(rng.uniform() * 5));
    }
    const HistogramFit fit = fit_histogram({trace});
    const SpinTrace st = classify(trace, fit);
    for (const ResolutionRule r : st.rules) CHECK(r == ResolutionRule::Unambiguous);
}

TEST_CASE("classification without ambiguity") {
    const SpinTrace st = classify(trace_of({40, 41, 3, 2, 39}), reference_fit());
    CHECK(st.states ==
          std::vector<Spin>{Spin::F3, Spin::F3, Spin::F4, Spin::F4, Spin::F3});
    for (const ResolutionRule r : st.rules) CHECK(r == ResolutionRule::Unambiguous);
}

TEST_CASE("overlap-region resolution rules") {
    const HistogramFit fit = reference_fit();

    SUBCASE("equal neighbors: noise") {
        const SpinTrace st = classify(trace_of({40, 17, 41}), fit);
        CHECK(st.states == std::vector<Spin>{Spin::F3, Spin::F3, Spin::F3});
        CHECK(st.rules[1] == ResolutionRule::Noise);
    }
    SUBCASE("different neighbors: quantum jump assigned to the subsequent state") {
        const SpinTrace st = classify(trace_of({40, 17, 3}), fit);
        CHECK(st.states == std::vector<Spin>{Spin::F3, Spin::F4, Spin::F4});
        CHECK(st.rules[1] == ResolutionRule::JumpToSubsequent);
    }
    SUBCASE("ambiguous runs split at the midpoint") {
        const SpinTrace st = classify(trace_of({40, 17, 18, 3}), fit);
        CHECK(st.states ==
              std::vector<Spin>{Spin::F3, Spin::F3, Spin::F4, Spin::F4});
        CHECK(st.rules[1] == ResolutionRule::JumpToPrevious);
        CHECK(st.rules[2] == ResolutionRule::JumpToSubsequent);

        const SpinTrace st3 = classify(trace_of({40, 17, 18, 19, 3}), fit);
        CHECK(st3.states == std::vector<Spin>{Spin::F3, Spin::F3, Spin::F4, Spin::F4,
                                              Spin::F4});
    }
    SUBCASE("ambiguous runs with equal flanks take that state") {
        const SpinTrace st = classify(trace_of({40, 17, 18, 41}), fit);
        CHECK(st.states ==
              std::vector<Spin>{Spin::F3, Spin::F3, Spin::F3, Spin::F3});
        CHECK(st.rules[1] == ResolutionRule::Noise);
        CHECK(st.rules[2] == ResolutionRule::Noise);
    }
    SUBCASE("endpoints take their single unambiguous neighbor") {
        const SpinTrace st = classify(trace_of({17, 40, 3, 18}), fit);
        CHECK(st.states ==
              std::vector<Spin>{Spin::F3, Spin::F3, Spin::F4, Spin::F4});
        CHECK(st.rules[0] == ResolutionRule::Edge);
        CHECK(st.rules[3] == ResolutionRule::Edge);
    }
    SUBCASE("all ambiguous is an error") {
        CHECK_THROWS_WITH_AS(classify(trace_of({17, 18, 17}), fit),
                             doctest::Contains("ALL_AMBIGUOUS"), ComputeError);
    }
}

TEST_CASE("classification is monotone in the bin count") {
    // raising one bin's count never moves that bin from F3 toward F4
    const HistogramFit fit = reference_fit();
    Rng rng(21);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<std::int64_t> counts(24);
        for (auto& c : counts) c = static_cast<std::int64_t>(rng.uniform() * 50);
        CountTrace base = trace_of(counts);
        SpinTrace before;
        try {
            before = classify(base, fit);
        } catch (const ComputeError&) {
            continue;  // all-ambiguous draw
        }
        const std::size_t which = static_cast<std::size_t>(rng.uniform() * counts.size());
        for (int bump = 1; bump <= 4; ++bump) {
            CountTrace raised = base;
            raised.counts[which] += bump;
            SpinTrace after;
            try {
                after = classify(raised, fit);
            } catch (const ComputeError&) {
                continue;
            }
            if (before.states[which] == Spin::F3) CHECK(after.states[which] == Spin::F3);
        }
    }
}

TEST_CASE("classification is a pure per-trace function of the ensemble fit") {
    const auto traces = default_ensemble(10, 30);
    const HistogramFit fit = fit_histogram(traces);
    std::vector<CountTrace> permuted(traces.rbegin(), traces.rend());
    const HistogramFit fit_perm = fit_histogram(permuted);
    CHECK(fit.theta_f4 == doctest::Approx(fit_perm.theta_f4).epsilon(1e-12));
    CHECK(fit.theta_f3 == doctest::Approx(fit_perm.theta_f3).epsilon(1e-12));
    const SpinTrace a = classify(traces.front(), fit);
    const SpinTrace b = classify(traces.front(), fit_perm);
    CHECK(a.states == b.states);
    CHECK(a.rules == b.rules);
}

TEST_CASE("default telegraph pipeline: ambiguous fraction is about 4%") {
    const auto traces = default_ensemble(1, 163);
    const HistogramFit fit = fit_histogram(traces);
    std::int64_t ambiguous = 0, total = 0;
    for (const CountTrace& tr : traces) {
        const SpinTrace st = classify(tr, fit);
        for (const ResolutionRule r : st.rules) {
            ++total;
            ambiguous += r != ResolutionRule::Unambiguous ? 1 : 0;
        }
    }
    const double fraction = static_cast<double>(ambiguous) / static_cast<double>(total);
    CHECK(fraction > 0.02);
    CHECK(fraction < 0.06);
}

TEST_CASE("empirical thresholds stay close to the fitted ones on clean data") {
    const auto traces = gaussian_mixture_traces(4.0, 2.0, 40.0, 6.3, 0.3, 200000, 29);
    FitHistogramOptions opt;
    opt.empirical_thresholds = true;
    const HistogramFit fit = fit_histogram(traces, opt);
    CHECK(fit.theta_f4 == doctest::Approx(25.3).epsilon(0.03));
    CHECK(fit.theta_f3 == doctest::Approx(8.65).epsilon(0.08));
}

TEST_CASE("end-to-end misclassification stays below 2%") {
    // a bin is misclassified when it is assigned a state the atom did not
    // occupy at any time during that bin (jump bins have two valid labels)
    LevelModel level;
    level.rate_high = 20.0 / 0.013;
    level.rate_low = 2.0 / 0.013;
    const JumpRates rates{106.0, 42.0};
    const Ensemble ens = simulate_ensemble(rates, level, 0.013, 2.0, 163, 400.0, 23);
    const HistogramFit fit = fit_histogram(ens.traces);
    std::int64_t wrong = 0, total = 0;
    for (std::size_t i = 0; i < ens.traces.size(); ++i) {
        const SpinTrace st = classify(ens.traces[i], fit);
        const auto truth =
            bin_occupancy(ens.paths[i], 2.0, static_cast<int>(st.states.size()));
        for (std::size_t k = 0; k < st.states.size(); ++k) {
            ++total;
            if (truth[k].has_jump) continue;
            const int rec = st.states[k] == Spin::F4 ? 1 : 0;
            wrong += rec != truth[k].majority_n_coupled ? 1 : 0;
        }
    }
    CHECK(static_cast<double>(wrong) / static_cast<double>(total) < 0.02);
}

TEST_CASE("atom insertion and removal detection") {
    const HistogramFit fit = reference_fit();

    SUBCASE("all-high trace has no atom") {
        CHECK_THROWS_WITH_AS(
            detect_presence(trace_of(std::vector<std::int64_t>(50, 40)), fit),
            doctest::Contains("NO_ATOM"), ComputeError);
    }
    SUBCASE("constructed boundaries") {
        std::vector<std::int64_t> counts(10, 40);
        for (int i = 0; i < 200; ++i) {
            counts.push_back((i % 2 == 0 || i == 199) ? 3 : 40);
        }
        counts.insert(counts.end(), 10, 40);
        const auto [ins, rem] = detect_presence(trace_of(counts), fit);
        CHECK(ins == 10);
        CHECK(rem == 209);
    }
    SUBCASE("noiseless padding matches generation metadata exactly") {
        // exact agreement holds for traces whose first and last coupled bins
        // sit fully in F=4 (the atom may jump within an edge bin otherwise)
        LevelModel level;
        level.rate_high = 20.0 / 0.013;
        level.rate_low = 2.0 / 0.013;
        const JumpRates rates{106.0, 42.0};
        const Ensemble ens = simulate_ensemble(rates, level, 0.013, 2.0, 100, 400.0, 31,
                                               InitialSpin::F4, 10, 8);
        const HistogramFit hf = fit_histogram(ens.traces);
        int clean = 0;
        for (std::size_t i = 0; i < ens.traces.size(); ++i) {
            const CountTrace& tr = ens.traces[i];
            const int n_bins = static_cast<int>(tr.counts.size()) - 18;
            const auto truth = bin_occupancy(ens.paths[i], 2.0, n_bins);
            const bool first_clean = !truth.front().has_jump &&
                                     truth.front().majority_n_coupled == 1 &&
                                     tr.counts[10] < hf.theta_f3;
            const bool last_clean = !truth.back().has_jump &&
                                    truth.back().majority_n_coupled == 1 &&
                                    tr.counts[tr.counts.size() - 9] < hf.theta_f3;
            if (!(first_clean && last_clean)) continue;
            ++clean;
            const auto [ins, rem] = detect_presence(tr, hf);
            CHECK(ins == tr.meta.pad_bins_start);
            CHECK(rem == static_cast<int>(tr.counts.size()) - tr.meta.pad_bins_end - 1);
        }
        CHECK(clean >= 8);
    }
}

TEST_CASE("spin trace CSV and histogram JSON round-trips") {
    const SpinTrace st = classify(trace_of({40, 17, 3, 2, 41}), reference_fit());
    const std::string path = "/tmp/cavitysim_spintrace_test.csv";
    write_spin_trace_csv(path, st, false);
    const SpinTrace back = read_spin_trace_csv(path);
    CHECK(back.states == st.states);
    CHECK(back.rules == st.rules);

    const HistogramFit fit = reference_fit();
    const HistogramFit fback = histogram_fit_from_json(histogram_fit_to_json(fit));
    CHECK(fback.mu_low == fit.mu_low);
    CHECK(fback.theta_f4 == fit.theta_f4);
    CHECK(fback.theta_f3 == fit.theta_f3);
}
