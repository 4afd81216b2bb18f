#include "cavitysim/telegraph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cavitysim/csvio.hpp"
#include "cavitysim/errors.hpp"
#include "cavitysim/qmodel.hpp"
#include "cavitysim/rng.hpp"

namespace cavitysim {

using json = nlohmann::json;

double LevelModel::rate_for(int n_coupled) const {
    switch (n_coupled) {
        case 0: return rate_high;
        case 1: return rate_low;
        case 2: return rate_low2;
        default: throw ComputeError("BAD_STATE", "n_coupled out of range");
    }
}

void LevelModel::validate() const {
    if (!(rate_high > rate_low && rate_low >= rate_low2 && rate_low2 >= 0.0)) {
        throw ConfigError("LevelModel requires rate_high > rate_low >= rate_low2 >= 0");
    }
    if (!(background >= 0.0)) throw ConfigError("LevelModel background must be >= 0");
}

int SpinPath::state_at(double t_ms) const {
    int state = events.front().n_coupled;
    for (const PathEvent& e : events) {
        if (e.t_ms > t_ms) break;
        state = e.n_coupled;
    }
    return state;
}

SpinPath sample_spin_path(const JumpRates& rates, double duration_ms, Spin initial,
                          std::uint64_t seed) {
    rates.validate();
    if (!(duration_ms > 0.0)) throw ConfigError("duration_ms must be > 0");
    Rng rng(seed);
    SpinPath path;
    path.duration_ms = duration_ms;
    int coupled = (initial == Spin::F4) ? 1 : 0;
    path.events.push_back({0.0, coupled});
    double t = 0.0;
    while (true) {
        const double rate_per_ms =
            per_ms_from_per_s(coupled ? rates.r_4to3_per_s : rates.r_3to4_per_s);
        if (rate_per_ms <= 0.0) break;  // absorbing (repumper off)
        t += rng.exponential(rate_per_ms);
        if (t >= duration_ms) break;
        coupled = 1 - coupled;
        path.events.push_back({t, coupled});
    }
    return path;
}

SpinPath sample_two_atom_path(double r1_per_s, double r2_per_s, double duration_ms,
                              std::uint64_t seed) {
    if (!(r1_per_s > 0.0) || !(r2_per_s >= 0.0)) {
        throw ConfigError("two-atom rates must satisfy r1 > 0, r2 >= 0");
    }
    if (!(duration_ms > 0.0)) throw ConfigError("duration_ms must be > 0");
    Rng rng(seed);
    SpinPath path;
    path.duration_ms = duration_ms;
    path.events.push_back({0.0, 2});
    if (r2_per_s == 0.0) return path;  // (4,4) frozen
    double t = rng.exponential(per_ms_from_per_s(2.0 * r2_per_s));
    if (t < duration_ms) {
        path.events.push_back({t, 1});
        t += rng.exponential(per_ms_from_per_s(r1_per_s));
        if (t < duration_ms) path.events.push_back({t, 0});
    }
    return path;
}

CountTrace bin_counts(const SpinPath& path, const LevelModel& level, double det_eff,
                      double bin_ms, std::uint64_t seed) {
    level.validate();
    if (!(det_eff > 0.0 && det_eff <= 1.0)) throw ConfigError("det_eff must be in (0,1]");
    if (!(bin_ms > 0.0)) throw ConfigError("bin_ms must be > 0");
    const int n_bins = static_cast<int>(std::floor(path.duration_ms / bin_ms + 1e-9));
    if (n_bins < 1) throw ConfigError("path shorter than one bin");

    Rng rng(seed);
    CountTrace trace;
    trace.bin_ms = bin_ms;
    trace.t0_ms = 0.0;
    trace.meta.seed = seed;
    trace.counts.reserve(n_bins);

    std::size_t ev = 0;
    for (int k = 0; k < n_bins; ++k) {
        const double t0 = k * bin_ms;
        const double t1 = t0 + bin_ms;
        // time-weighted mean photon flux across the jumps inside this bin
        while (ev + 1 < path.events.size() && path.events[ev + 1].t_ms <= t0) ++ev;
        double mean_photons = 0.0;
        std::size_t seg = ev;
        double t = t0;
        while (t < t1) {
            const double seg_end = (seg + 1 < path.events.size())
                                       ? std::min(path.events[seg + 1].t_ms, t1)
                                       : t1;
            mean_photons += level.rate_for(path.events[seg].n_coupled) * (seg_end - t);
            t = seg_end;
            ++seg;
        }
        const double mean = det_eff * mean_photons + level.background * bin_ms;
        trace.counts.push_back(static_cast<std::int64_t>(rng.poisson(mean)));
    }
    return trace;
}

double jump_probability(double rate_per_s, double window_ms) {
    return -std::expm1(-rate_per_s * window_ms * 1e-3);
}

namespace {

std::int64_t noiseless_pad_count(const LevelModel& level, double det_eff, double bin_ms) {
    return std::llround(det_eff * level.rate_high * bin_ms + level.background * bin_ms);
}

void apply_padding(CountTrace& trace, const LevelModel& level, double det_eff,
                   int pad_start, int pad_end) {
    if (pad_start == 0 && pad_end == 0) return;
    const std::int64_t pad = noiseless_pad_count(level, det_eff, trace.bin_ms);
    std::vector<std::int64_t> counts;
    counts.reserve(trace.counts.size() + pad_start + pad_end);
    counts.insert(counts.end(), pad_start, pad);
    counts.insert(counts.end(), trace.counts.begin(), trace.counts.end());
    counts.insert(counts.end(), pad_end, pad);
    trace.counts = std::move(counts);
    trace.meta.pad_bins_start = pad_start;
    trace.meta.pad_bins_end = pad_end;
}

}  // namespace

Ensemble simulate_ensemble(const JumpRates& rates, const LevelModel& level, double det_eff,
                           double bin_ms, int n_traces, double duration_ms,
                           std::uint64_t master_seed, InitialSpin initial, int pad_bins_start,
                           int pad_bins_end) {
    if (n_traces < 1) throw ConfigError("n_traces must be >= 1");
    Ensemble ens;
    ens.two_atom = false;
    ens.r_4to3_per_s = rates.r_4to3_per_s;
    ens.r_3to4_per_s = rates.r_3to4_per_s;
    ens.level = level;
    ens.det_eff = det_eff;
    ens.bin_ms = bin_ms;
    ens.duration_ms = duration_ms;
    ens.n_traces = n_traces;
    ens.master_seed = master_seed;
    ens.pad_bins_start = pad_bins_start;
    ens.pad_bins_end = pad_bins_end;

    const double p4 = (rates.r_3to4_per_s + rates.r_4to3_per_s > 0.0)
                          ? rates.r_3to4_per_s / (rates.r_3to4_per_s + rates.r_4to3_per_s)
                          : 1.0;
    for (int i = 0; i < n_traces; ++i) {
        const std::uint64_t path_seed = derive_seed(master_seed, i);
        Spin init;
        switch (initial) {
            case InitialSpin::F4: init = Spin::F4; break;
            case InitialSpin::F3: init = Spin::F3; break;
            default: {
                Rng pick(derive_seed(master_seed, 2 * static_cast<std::uint64_t>(n_traces) + i));
                init = pick.uniform() < p4 ? Spin::F4 : Spin::F3;
            }
        }
        SpinPath path = sample_spin_path(rates, duration_ms, init, path_seed);
        CountTrace trace = bin_counts(path, level, det_eff, bin_ms,
                                      derive_seed(master_seed, n_traces + i));
        apply_padding(trace, level, det_eff, pad_bins_start, pad_bins_end);
        ens.paths.push_back(std::move(path));
        ens.traces.push_back(std::move(trace));
    }
    return ens;
}

Ensemble simulate_two_atom_ensemble(double r1_per_s, double r2_per_s,
                                    const LevelModel& level, double det_eff, double bin_ms,
                                    int n_traces, double duration_ms,
                                    std::uint64_t master_seed) {
    if (n_traces < 1) throw ConfigError("n_traces must be >= 1");
    Ensemble ens;
    ens.two_atom = true;
    ens.r_4to3_per_s = r1_per_s;
    ens.r_3to4_per_s = r2_per_s;
    ens.level = level;
    ens.det_eff = det_eff;
    ens.bin_ms = bin_ms;
    ens.duration_ms = duration_ms;
    ens.n_traces = n_traces;
    ens.master_seed = master_seed;

    for (int i = 0; i < n_traces; ++i) {
        SpinPath path = sample_two_atom_path(r1_per_s, r2_per_s, duration_ms,
                                             derive_seed(master_seed, i));
        CountTrace trace = bin_counts(path, level, det_eff, bin_ms,
                                      derive_seed(master_seed, n_traces + i));
        ens.paths.push_back(std::move(path));
        ens.traces.push_back(std::move(trace));
    }
    return ens;
}

std::vector<double> ensemble_mean_counts(const std::vector<CountTrace>& traces) {
    if (traces.empty()) throw ConfigError("empty ensemble");
    const std::size_t n_bins = traces.front().counts.size();
    std::vector<double> mean(n_bins, 0.0);
    for (const CountTrace& tr : traces) {
        if (tr.counts.size() != n_bins) {
            throw ConfigError("traces in the ensemble have different lengths");
        }
        for (std::size_t k = 0; k < n_bins; ++k) {
            mean[k] += static_cast<double>(tr.counts[k]);
        }
    }
    for (double& m : mean) m /= static_cast<double>(traces.size());
    return mean;
}

std::vector<BinTruth> bin_occupancy(const SpinPath& path, double bin_ms, int n_bins) {
    std::vector<BinTruth> truth(n_bins);
    for (int k = 0; k < n_bins; ++k) {
        const double t0 = k * bin_ms;
        const double t1 = t0 + bin_ms;
        BinTruth& b = truth[k];
        b.start_n_coupled = path.state_at(t0);
        b.end_n_coupled = path.state_at(std::nextafter(t1, t0));
        double occupancy[3] = {0.0, 0.0, 0.0};
        double t = t0;
        std::size_t seg = 0;
        while (seg + 1 < path.events.size() && path.events[seg + 1].t_ms <= t0) ++seg;
        while (t < t1) {
            const double seg_end = (seg + 1 < path.events.size())
                                       ? std::min(path.events[seg + 1].t_ms, t1)
                                       : t1;
            occupancy[path.events[seg].n_coupled] += seg_end - t;
            t = seg_end;
            ++seg;
        }
        b.majority_n_coupled = static_cast<int>(
            std::max_element(occupancy, occupancy + 3) - occupancy);
        b.has_jump = b.start_n_coupled != b.end_n_coupled ||
                     occupancy[b.start_n_coupled] < (t1 - t0) - 1e-12;
    }
    return truth;
}

double output_rate_per_ms(double n_photon, double kappa_mhz) {
    return 2.0 * angular_rad_per_us(kappa_mhz) * n_photon * 1e3;
}

LevelModel derive_level_model(const SystemParams& p, double background_per_ms) {
    const double eta = eta_for_photon_number(p.n_empty, p.kappa_mhz);
    const int n_fock = adequate_n_fock(p.n_empty);
    LevelModel level;
    level.background = background_per_ms;
    level.rate_high = output_rate_per_ms(p.n_empty, p.kappa_mhz);
    for (int n_atoms : {1, 2}) {
        SystemParams pa = p;
        pa.n_atoms = n_atoms;
        HilbertConfig h{n_fock, n_atoms};
        const SteadyState s = steady_state(build_liouvillian(pa, h, eta));
        const double rate = output_rate_per_ms(s.n_photon, p.kappa_mhz);
        (n_atoms == 1 ? level.rate_low : level.rate_low2) = rate;
    }
    level.validate();
    return level;
}

void write_trace_csv(const std::string& path, const CountTrace& trace,
                     bool timestamp_header) {
    CsvWriter csv(timestamp_header);
    csv.header("t_ms, counts");
    for (std::size_t k = 0; k < trace.counts.size(); ++k) {
        csv.row({trace.t0_ms + static_cast<double>(k) * trace.bin_ms,
                 static_cast<double>(trace.counts[k])});
    }
    csv.write_atomic(path);
}

CountTrace read_trace_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.columns.size() != 2 || table.rows.size() < 2) {
        throw SimError("IO", path + ": expected columns t_ms, counts and >= 2 rows");
    }
    CountTrace trace;
    trace.t0_ms = table.rows.front()[0];
    trace.bin_ms = table.rows[1][0] - table.rows[0][0];
    for (const auto& row : table.rows) {
        const double c = row[1];
        if (c < 0 || c != std::floor(c)) {
            throw SimError("IO", path + ": counts must be nonnegative integers");
        }
        trace.counts.push_back(static_cast<std::int64_t>(c));
    }
    return trace;
}

std::vector<std::string> write_ensemble(const std::string& out_dir, const std::string& stem,
                                        const Ensemble& ensemble, bool timestamp_header) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> files;
    json manifest;
    manifest["two_atom"] = ensemble.two_atom;
    if (ensemble.two_atom) {
        manifest["r1_per_s"] = ensemble.r_4to3_per_s;
        manifest["r2_per_s"] = ensemble.r_3to4_per_s;
    } else {
        manifest["r_4to3_per_s"] = ensemble.r_4to3_per_s;
        manifest["r_3to4_per_s"] = ensemble.r_3to4_per_s;
    }
    manifest["level"] = {{"rate_high", ensemble.level.rate_high},
                         {"rate_low", ensemble.level.rate_low},
                         {"rate_low2", ensemble.level.rate_low2},
                         {"background", ensemble.level.background}};
    manifest["det_eff"] = ensemble.det_eff;
    manifest["bin_ms"] = ensemble.bin_ms;
    manifest["duration_ms"] = ensemble.duration_ms;
    manifest["n_traces"] = ensemble.n_traces;
    manifest["master_seed"] = ensemble.master_seed;
    manifest["pad_bins_start"] = ensemble.pad_bins_start;
    manifest["pad_bins_end"] = ensemble.pad_bins_end;

    json file_list = json::array();
    json seeds = json::array();
    for (std::size_t i = 0; i < ensemble.traces.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%04zu.csv", stem.c_str(), i);
        const std::string path = (fs::path(out_dir) / name).string();
        write_trace_csv(path, ensemble.traces[i], timestamp_header);
        files.push_back(path);
        file_list.push_back(name);
        seeds.push_back(ensemble.traces[i].meta.seed);
    }
    manifest["traces"] = file_list;
    manifest["count_seeds"] = seeds;
    const std::string manifest_path = (fs::path(out_dir) / (stem + "_manifest.json")).string();
    write_text_atomic(manifest_path, manifest.dump(2) + "\n");
    files.push_back(manifest_path);
    return files;
}

std::vector<CountTrace> read_ensemble(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw SimError("IO", "cannot open '" + manifest_path + "'");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw SimError("IO", manifest_path + ": " + e.what());
    }
    const auto dir = std::filesystem::path(manifest_path).parent_path();
    std::vector<CountTrace> traces;
    for (const auto& name : manifest.at("traces")) {
        traces.push_back(read_trace_csv((dir / name.get<std::string>()).string()));
    }
    return traces;
}

}  // namespace cavitysim
