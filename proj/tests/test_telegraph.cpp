#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cavitysim/errors.hpp"
#include "cavitysim/telegraph.hpp"
#include "cavitysim/twoatom.hpp"
#include "testutil.hpp"

using namespace cavitysim;

namespace {

// detected counts/ms -> output photon rate at the given efficiency
LevelModel detected_levels(double high, double low, double low2, double det_eff) {
    LevelModel level;
    level.rate_high = high / det_eff;
    level.rate_low = low / det_eff;
    level.rate_low2 = low2 / det_eff;
    return level;
}

}  // namespace

TEST_CASE("absorbing state: no repumper, atom stays in F=3") {
    JumpRates rates{106.0, 0.0};
    const SpinPath path = sample_spin_path(rates, 1e5, Spin::F3, 42);
    CHECK(path.events.size() == 1);
    CHECK(path.events.front().n_coupled == 0);
}

TEST_CASE("CTMC stationary fraction and dwell times match the rates") {
    // oracle: p4 = r_u/(r_u+r_d), mean dwell 1/rate, over >= 1e4 simulated s
    const JumpRates rates{106.0, 42.0};
    double time_f4 = 0.0, total = 0.0;
    double dwell_sum[2] = {0.0, 0.0};
    std::int64_t dwell_cnt[2] = {0, 0};
    for (int rep = 0; rep < 60; ++rep) {
        const SpinPath path = sample_spin_path(rates, 250000.0, Spin::F4, 1000 + rep);
        total += path.duration_ms;
        for (std::size_t i = 0; i < path.events.size(); ++i) {
            const double t0 = path.events[i].t_ms;
            const double t1 = (i + 1 < path.events.size()) ? path.events[i + 1].t_ms
                                                           : path.duration_ms;
            if (path.events[i].n_coupled == 1) time_f4 += t1 - t0;
            if (i > 0 && i + 1 < path.events.size()) {  // complete dwells only
                dwell_sum[path.events[i].n_coupled] += t1 - t0;
                ++dwell_cnt[path.events[i].n_coupled];
            }
        }
    }
    CHECK(total >= 1e7);  // 1e4 seconds
    CHECK(time_f4 / total == doctest::Approx(42.0 / 148.0).epsilon(0.01));
    CHECK(dwell_sum[1] / dwell_cnt[1] == doctest::Approx(1000.0 / 106.0).epsilon(0.01));
    CHECK(dwell_sum[0] / dwell_cnt[0] == doctest::Approx(1000.0 / 42.0).epsilon(0.01));

    // empirical rate estimates within 3 sigma of the estimator's stderr
    const double n_dwells = static_cast<double>(dwell_cnt[0] + dwell_cnt[1]);
    CHECK(n_dwells > 8e5);
    const double r43 = 1000.0 * dwell_cnt[1] / dwell_sum[1];
    const double se43 = r43 / std::sqrt(static_cast<double>(dwell_cnt[1]));
    CHECK(std::fabs(r43 - 106.0) < 3.0 * se43);
    const double r34 = 1000.0 * dwell_cnt[0] / dwell_sum[0];
    const double se34 = r34 / std::sqrt(static_cast<double>(dwell_cnt[0]));
    CHECK(std::fabs(r34 - 42.0) < 3.0 * se34);
}

TEST_CASE("jump probability within one bin") {
    const double p = jump_probability(106.0, 2.0);
    CHECK(p == doctest::Approx(1.0 - std::exp(-0.212)).epsilon(1e-12));
    CHECK(p == doctest::Approx(0.1911).epsilon(5e-4));
    // consistent with the quoted 18% within its rounding
    CHECK(std::fabs(p - 0.18) < 0.02);
}

TEST_CASE("counting statistics: Poisson with the configured mean") {
    // constant F=3 path at 20 detected counts/ms, 2 ms bins -> mean 40
    const LevelModel level = detected_levels(20.0, 2.0, 0.0, 1.0);
    SpinPath path;
    path.duration_ms = 2e5;
    path.events.push_back({0.0, 0});
    const CountTrace trace = bin_counts(path, level, 1.0, 2.0, 99);
    REQUIRE(trace.counts.size() == 100000);
    double s = 0.0, s2 = 0.0;
    std::int64_t max_count = 0;
    for (const auto c : trace.counts) {
        s += static_cast<double>(c);
        s2 += static_cast<double>(c) * static_cast<double>(c);
        max_count = std::max(max_count, c);
    }
    const double mean = s / 1e5;
    const double var = s2 / 1e5 - mean * mean;
    CHECK(mean == doctest::Approx(40.0).epsilon(0.005));
    CHECK(var == doctest::Approx(40.0).epsilon(0.03));

    // chi-square goodness of fit against Poisson(40) at the 1% level
    std::vector<double> observed(max_count + 1, 0.0), expected(max_count + 1, 0.0);
    for (const auto c : trace.counts) observed[c] += 1.0;
    for (std::int64_t k = 0; k <= max_count; ++k) {
        expected[k] = 1e5 * testutil::poisson_pmf(static_cast<int>(k), 40.0);
    }
    CHECK(testutil::chi_square_pvalue(observed, expected) > 0.01);
}

TEST_CASE("perfect blocking with zero background gives an all-zero trace") {
    LevelModel level;
    level.rate_high = 20.0;
    level.rate_low = 0.0;
    SpinPath path;
    path.duration_ms = 1000.0;
    path.events.push_back({0.0, 1});
    const CountTrace trace = bin_counts(path, level, 1.0, 2.0, 7);
    for (const auto c : trace.counts) CHECK(c == 0);
}

TEST_CASE("a jump exactly mid-bin produces the time-weighted mean") {
    // levels 40 and 4 per bin -> Poisson mean 22 for the jump bin
    const LevelModel level = detected_levels(20.0, 2.0, 0.0, 1.0);
    SpinPath path;
    path.duration_ms = 2.0;
    path.events.push_back({0.0, 0});
    path.events.push_back({1.0, 1});
    double sum = 0.0;
    const int reps = 40000;
    for (int i = 0; i < reps; ++i) {
        sum += static_cast<double>(bin_counts(path, level, 1.0, 2.0, 10000 + i).counts[0]);
    }
    CHECK(sum / reps == doctest::Approx(22.0).epsilon(0.005));
}

TEST_CASE("seed determinism is bit-exact") {
    const JumpRates rates{106.0, 42.0};
    const LevelModel level = detected_levels(20.0, 2.0, 0.0, 0.013);
    const Ensemble a = simulate_ensemble(rates, level, 0.013, 2.0, 8, 400.0, 314159);
    const Ensemble b = simulate_ensemble(rates, level, 0.013, 2.0, 8, 400.0, 314159);
    const Ensemble c = simulate_ensemble(rates, level, 0.013, 2.0, 8, 400.0, 314160);
    REQUIRE(a.traces.size() == b.traces.size());
    bool identical = true, different = false;
    for (std::size_t i = 0; i < a.traces.size(); ++i) {
        identical &= a.traces[i].counts == b.traces[i].counts;
        different |= a.traces[i].counts != c.traces[i].counts;
    }
    CHECK(identical);
    CHECK(different);
}

TEST_CASE("two-atom ensemble average converges to the closed form") {
    const double r1 = 68.0, r2 = 28.0;
    const double t1 = 0.4872, t2 = 0.2007;  // levels at the configured geometry
    const LevelModel level = detected_levels(67.9, 67.9 * t1, 67.9 * t2, 0.045);
    const Ensemble ens =
        simulate_two_atom_ensemble(r1, r2, level, 0.045, 1.0, 10000, 120.0, 2024);
    const std::vector<double> mean = ensemble_mean_counts(ens.traces);

    TwoAtomModel model;
    model.r1_per_s = r1;
    model.r2_per_s = r2;
    model.levels.rate_high = 1.0;
    model.levels.rate_low = t1;
    model.levels.rate_low2 = t2;
    const double high_counts = 67.9;
    double rms = 0.0;
    for (std::size_t k = 0; k < mean.size(); ++k) {
        const double t_mid = (static_cast<double>(k) + 0.5) * 1.0;
        const double diff = mean[k] / high_counts - expected_transmission(model, t_mid);
        rms += diff * diff;
    }
    rms = std::sqrt(rms / static_cast<double>(mean.size()));
    CHECK(rms < 0.01);
}

TEST_CASE("169-trace average stays within Monte-Carlo error of the closed form") {
    const double t1 = 0.4872, t2 = 0.2007;
    const LevelModel level = detected_levels(67.9, 67.9 * t1, 67.9 * t2, 0.045);
    const Ensemble ens =
        simulate_two_atom_ensemble(68.0, 28.0, level, 0.045, 1.0, 169, 120.0, 909);
    const std::vector<double> mean = ensemble_mean_counts(ens.traces);
    TwoAtomModel model;
    model.r1_per_s = 68.0;
    model.r2_per_s = 28.0;
    model.levels.rate_high = 1.0;
    model.levels.rate_low = t1;
    model.levels.rate_low2 = t2;
    for (std::size_t k = 0; k < mean.size(); ++k) {
        double var = 0.0;
        for (const CountTrace& tr : ens.traces) {
            const double x = static_cast<double>(tr.counts[k]) - mean[k];
            var += x * x;
        }
        var /= 168.0;
        const double se = std::sqrt(var / 169.0) / 67.9;  // normalized, ~1/sqrt(169)
        const double diff =
            mean[k] / 67.9 - expected_transmission(model, (k + 0.5) * 1.0);
        CHECK(std::fabs(diff) < 4.0 * se + 0.005);
    }
}

TEST_CASE("two-atom ensemble with r2 = 0 never leaves the initial level") {
    const LevelModel level = detected_levels(67.9, 33.0, 13.6, 0.045);
    const Ensemble ens = simulate_two_atom_ensemble(68.0, 0.0, level, 0.045, 1.0, 400,
                                                    120.0, 5);
    const std::vector<double> mean = ensemble_mean_counts(ens.traces);
    for (const double m : mean) {
        CHECK(m == doctest::Approx(13.6).epsilon(0.1));  // stays at the T2 level
    }
}

TEST_CASE("bin occupancy truth") {
    SpinPath path;
    path.duration_ms = 6.0;
    path.events.push_back({0.0, 0});
    path.events.push_back({2.5, 1});  // jump inside bin 1
    path.events.push_back({5.9, 0});  // jump near the end of bin 2
    const auto truth = bin_occupancy(path, 2.0, 3);
    CHECK(truth[0].majority_n_coupled == 0);
    CHECK_FALSE(truth[0].has_jump);
    CHECK(truth[1].majority_n_coupled == 1);  // 1.5 of 2 ms coupled
    CHECK(truth[1].has_jump);
    CHECK(truth[1].start_n_coupled == 0);
    CHECK(truth[1].end_n_coupled == 1);
    CHECK(truth[2].majority_n_coupled == 1);
    CHECK(truth[2].has_jump);
}

TEST_CASE("level model from the quantum model") {
    const SystemParams p = default_params();  // delta_ca = 44, probe on cavity
    const LevelModel level = derive_level_model(p);
    CHECK(level.rate_high == doctest::Approx(1508.0).epsilon(0.002));
    // weak-excitation transmissions at this operating point
    CHECK(level.rate_low / level.rate_high == doctest::Approx(0.02955).epsilon(0.02));
    CHECK(level.rate_low2 / level.rate_high == doctest::Approx(0.00763).epsilon(0.05));
    CHECK(level.rate_high * p.det_eff == doctest::Approx(20.0).epsilon(0.02));
}

TEST_CASE("trace and ensemble round-trip through CSV and manifest") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "cavitysim_telegraph_io";
    fs::remove_all(dir);
    const JumpRates rates{106.0, 42.0};
    const LevelModel level = detected_levels(20.0, 2.0, 0.0, 0.013);
    const Ensemble ens = simulate_ensemble(rates, level, 0.013, 2.0, 3, 100.0, 77);
    write_ensemble(dir.string(), "trace", ens, false);
    const auto back = read_ensemble((dir / "trace_manifest.json").string());
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].counts == ens.traces[i].counts);
        CHECK(back[i].bin_ms == doctest::Approx(2.0));
    }
    fs::remove_all(dir);
}
