#include "cavitysim/nms.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <nlohmann/json.hpp>

#include "cavitysim/csvio.hpp"
#include "cavitysim/errors.hpp"
#include "cavitysim/fit.hpp"
#include "cavitysim/qmodel.hpp"
#include "cavitysim/rng.hpp"

namespace cavitysim {

using json = nlohmann::json;

void NmsModelParams::validate() const {
    if (!(n_ph > 0.0)) throw ConfigError("n_ph must be > 0");
    if (!std::isfinite(delta_ca_mhz)) throw ConfigError("delta_ca_mhz must be finite");
    if (!(pulse_us > 0.0)) throw ConfigError("pulse_us must be > 0");
    if (!(branch_to_f3 > 0.0 && branch_to_f3 < 1.0)) {
        throw ConfigError("branch_to_f3 must be in (0,1)");
    }
    if (!(g_low_mhz < g_high_mhz) && g_low_mhz != g_high_mhz) {
        throw ConfigError("g range must satisfy g_low <= g_high");
    }
    if (!(background >= 0.0 && background < 1.0)) {
        throw ConfigError("background must be in [0,1)");
    }
    if (quad_nodes < 3 || quad_nodes % 2 == 0) {
        throw ConfigError("quad_nodes must be odd and >= 3");
    }
}

double scattering_rate_per_us(const SystemParams& p, double n_ph, ScatteringRoute route) {
    const double eta = eta_for_photon_number(n_ph, p.kappa_mhz);
    double p_excited;
    if (route == ScatteringRoute::WeakExcitation) {
        p_excited = weak_drive_response(p, eta).p_excited;
    } else {
        const HilbertConfig h{adequate_n_fock(n_ph), p.n_atoms};
        p_excited = steady_state(build_liouvillian(p, h, eta)).p_excited.front();
    }
    return 2.0 * angular_rad_per_us(p.gamma_mhz) * p_excited;
}

double transfer_probability(const SystemParams& p, double n_ph, double pulse_us,
                            double branch, ScatteringRoute route) {
    const double r_sc = scattering_rate_per_us(p, n_ph, route);
    return -std::expm1(-branch * r_sc * pulse_us);
}

namespace {

// Composite Simpson over the uniform g distribution; degenerate range means
// a single evaluation.
double g_average(const SystemParams& base, const NmsModelParams& m,
                 double detuning_mhz,
                 const std::function<double(const SystemParams&)>& integrand) {
    SystemParams p = base;
    p.n_atoms = 1;
    p.delta_pc_mhz = detuning_mhz;
    p.delta_ca_mhz = m.delta_ca_mhz;
    if (m.g_low_mhz == m.g_high_mhz) {
        p.g_mhz = m.g_low_mhz;
        return integrand(p);
    }
    const int n = m.quad_nodes;
    const double h = (m.g_high_mhz - m.g_low_mhz) / (n - 1);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        p.g_mhz = m.g_low_mhz + i * h;
        const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        sum += w * integrand(p);
    }
    // Simpson weights integrate to 3(n-1); dividing by it yields the mean.
    return sum / (3.0 * (n - 1));
}

}  // namespace

SpectrumData model_spectrum(const SystemParams& base, const NmsModelParams& m,
                            const std::vector<double>& detunings_mhz,
                            ScatteringRoute route) {
    m.validate();
    SpectrumData out;
    out.detunings_mhz = detunings_mhz;
    for (const double d : detunings_mhz) {
        const double pbar = g_average(base, m, d, [&](const SystemParams& p) {
            return transfer_probability(p, m.n_ph, m.pulse_us, m.branch_to_f3, route);
        });
        out.p_f3.push_back(m.background + (1.0 - m.background) * pbar);
        out.n_cycles.push_back(0);
    }
    return out;
}

double mean_scattered_photons(const SystemParams& base, const NmsModelParams& m,
                              double detuning_mhz, ScatteringRoute route) {
    return m.pulse_us * g_average(base, m, detuning_mhz, [&](const SystemParams& p) {
        return scattering_rate_per_us(p, m.n_ph, route);
    });
}

NmsFitResult fit_spectrum(const SystemParams& base, const SpectrumData& data,
                          const NmsModelParams& fixed, ScatteringRoute route) {
    if (data.detunings_mhz.size() < 6 ||
        data.detunings_mhz.size() != data.p_f3.size() ||
        data.detunings_mhz.size() != data.n_cycles.size()) {
        throw ConfigError("fit_spectrum needs >= 6 consistent data points");
    }
    const double span = *std::max_element(data.p_f3.begin(), data.p_f3.end()) -
                        *std::min_element(data.p_f3.begin(), data.p_f3.end());
    if (span < 1e-3) throw ComputeError("DEGENERATE", "spectrum data is flat");

    // binomial weights; probabilities clipped away from 0/1
    std::vector<double> sigma(data.p_f3.size());
    for (std::size_t i = 0; i < data.p_f3.size(); ++i) {
        const double p = std::clamp(data.p_f3[i], 0.05, 0.95);
        const double n = std::max(data.n_cycles[i], 1);
        sigma[i] = std::sqrt(p * (1.0 - p) / n);
    }

    const auto model = [&](double n_ph, double delta_ca) {
        NmsModelParams m = fixed;
        m.n_ph = n_ph;
        m.delta_ca_mhz = delta_ca;
        return model_spectrum(base, m, data.detunings_mhz, route);
    };
    const auto residuals = [&](const Eigen::VectorXd& theta) {
        const SpectrumData md = model(theta[0], theta[1]);
        Eigen::VectorXd r(data.p_f3.size());
        for (std::size_t i = 0; i < data.p_f3.size(); ++i) {
            r[static_cast<int>(i)] = (data.p_f3[i] - md.p_f3[i]) / sigma[i];
        }
        return r;
    };

    // start values: peak positions give delta_ca (the two dressed branches
    // sum to -delta_ca); the peak height sets the n_ph scale
    std::size_t imax = 0;
    for (std::size_t i = 1; i < data.p_f3.size(); ++i) {
        if (data.p_f3[i] > data.p_f3[imax]) imax = i;
    }
    std::size_t imax2 = imax == 0 ? 1 : 0;
    for (std::size_t i = 0; i < data.p_f3.size(); ++i) {
        if (std::fabs(data.detunings_mhz[i] - data.detunings_mhz[imax]) < 5.0) continue;
        if (data.p_f3[i] > data.p_f3[imax2]) imax2 = i;
    }
    double delta_ca0 = -(data.detunings_mhz[imax] + data.detunings_mhz[imax2]);
    if (!std::isfinite(delta_ca0)) delta_ca0 = 0.0;
    const double n_ref = 0.05;
    const double peak_ref =
        model(n_ref, delta_ca0).p_f3[imax];
    const double bg = fixed.background;
    const double x_data = -std::log1p(-std::clamp(
        (data.p_f3[imax] - bg) / (1.0 - bg), 0.0, 0.999));
    const double x_ref = -std::log1p(-std::clamp(
        (peak_ref - bg) / (1.0 - bg), 1e-6, 0.999));
    const double n_ph0 = std::clamp(n_ref * x_data / x_ref, 1e-4, 0.5);

    Eigen::VectorXd start(2);
    start << n_ph0, delta_ca0;
    FitOptions opt;
    opt.lower = Eigen::VectorXd(2);
    opt.lower << 1e-5, -100.0;
    opt.upper = Eigen::VectorXd(2);
    opt.upper << 1.0, 100.0;
    opt.ftol = 1e-14;
    opt.xtol = 1e-14;
    const FitResult fit = fit_least_squares(residuals, start, opt);

    NmsFitResult out;
    out.n_ph = fit.params[0];
    out.delta_ca_mhz = fit.params[1];
    out.n_ph_err = std::sqrt(std::max(fit.covariance(0, 0), 0.0));
    out.delta_ca_err_mhz = std::sqrt(std::max(fit.covariance(1, 1), 0.0));
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) out.covariance[i][j] = fit.covariance(i, j);
    }
    out.chi2 = fit.chi2;
    out.dof = fit.n_residuals - 2;
    out.iterations = fit.iterations;
    return out;
}

SpectrumData add_binomial_noise(const SpectrumData& data, std::uint64_t seed) {
    Rng rng(seed);
    SpectrumData out = data;
    for (std::size_t i = 0; i < out.p_f3.size(); ++i) {
        const int n = out.n_cycles[i];
        if (n < 1) throw ConfigError("add_binomial_noise requires n_cycles >= 1");
        int hits = 0;
        for (int k = 0; k < n; ++k) hits += rng.uniform() < data.p_f3[i] ? 1 : 0;
        out.p_f3[i] = static_cast<double>(hits) / n;
    }
    return out;
}

void write_spectrum_data_csv(const std::string& path, const SpectrumData& data,
                             bool timestamp_header) {
    CsvWriter csv(timestamp_header);
    csv.header("detuning_mhz, p_f3, n_cycles");
    for (std::size_t i = 0; i < data.detunings_mhz.size(); ++i) {
        csv.row({data.detunings_mhz[i], data.p_f3[i],
                 static_cast<double>(data.n_cycles[i])});
    }
    csv.write_atomic(path);
}

SpectrumData read_spectrum_data_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.columns.size() != 3) {
        throw SimError("IO", path + ": expected columns detuning_mhz, p_f3, n_cycles");
    }
    SpectrumData data;
    for (const auto& row : table.rows) {
        data.detunings_mhz.push_back(row[0]);
        data.p_f3.push_back(row[1]);
        data.n_cycles.push_back(static_cast<int>(row[2]));
    }
    return data;
}

std::string nms_fit_to_json(const NmsFitResult& fit) {
    json j;
    j["n_ph"] = fit.n_ph;
    j["n_ph_err"] = fit.n_ph_err;
    j["delta_ca_mhz"] = fit.delta_ca_mhz;
    j["delta_ca_err_mhz"] = fit.delta_ca_err_mhz;
    j["covariance"] = {{fit.covariance[0][0], fit.covariance[0][1]},
                       {fit.covariance[1][0], fit.covariance[1][1]}};
    j["chi2"] = fit.chi2;
    j["dof"] = fit.dof;
    j["iterations"] = fit.iterations;
    return j.dump(2) + "\n";
}

}  // namespace cavitysim
