#include "cavitysim/params.hpp"

#include <cmath>

#include "cavitysim/config.hpp"
#include "cavitysim/errors.hpp"

namespace cavitysim {

namespace {

void require(bool ok, const char* what, std::string& problems) {
    if (!ok) {
        if (!problems.empty()) problems += "; ";
        problems += what;
    }
}

}  // namespace

void SystemParams::validate() const {
    std::string problems;
    require(std::isfinite(g_mhz) && g_mhz >= 0.0, "g_mhz must be >= 0", problems);
    require(std::isfinite(kappa_mhz) && kappa_mhz > 0.0, "kappa_mhz must be > 0", problems);
    require(std::isfinite(gamma_mhz) && gamma_mhz > 0.0, "gamma_mhz must be > 0", problems);
    require(std::isfinite(delta_ca_mhz), "delta_ca_mhz must be finite", problems);
    require(std::isfinite(delta_pc_mhz), "delta_pc_mhz must be finite", problems);
    require(std::isfinite(n_empty) && n_empty > 0.0, "n_empty must be > 0", problems);
    require(std::isfinite(det_eff) && det_eff > 0.0 && det_eff <= 1.0,
            "det_eff must be in (0,1]", problems);
    require(std::isfinite(bin_ms) && bin_ms > 0.0, "bin_ms must be > 0", problems);
    require(n_atoms == 1 || n_atoms == 2, "n_atoms must be 1 or 2", problems);
    if (!problems.empty()) throw ConfigError("invalid SystemParams: " + problems);
}

void JumpRates::validate() const {
    std::string problems;
    require(std::isfinite(r_4to3_per_s) && r_4to3_per_s > 0.0, "r_4to3_per_s must be > 0",
            problems);
    require(std::isfinite(r_3to4_per_s) && r_3to4_per_s >= 0.0, "r_3to4_per_s must be >= 0",
            problems);
    if (!problems.empty()) throw ConfigError("invalid JumpRates: " + problems);
}

SystemParams default_params() {
    SystemParams p;  // defaults are the member initializers
    p.validate();
    return p;
}

double cooperativity(const SystemParams& p) {
    return p.g_mhz * p.g_mhz / (2.0 * p.kappa_mhz * p.gamma_mhz);
}

SystemParams params_from_config(KeyValueConfig& cfg, const std::string& prefix) {
    SystemParams p;
    p.g_mhz = cfg.get_double_or(prefix + "g_mhz", p.g_mhz);
    p.kappa_mhz = cfg.get_double_or(prefix + "kappa_mhz", p.kappa_mhz);
    p.gamma_mhz = cfg.get_double_or(prefix + "gamma_mhz", p.gamma_mhz);
    p.delta_ca_mhz = cfg.get_double_or(prefix + "delta_ca_mhz", p.delta_ca_mhz);
    p.delta_pc_mhz = cfg.get_double_or(prefix + "delta_pc_mhz", p.delta_pc_mhz);
    p.n_empty = cfg.get_double_or(prefix + "n_empty", p.n_empty);
    p.det_eff = cfg.get_double_or(prefix + "det_eff", p.det_eff);
    p.bin_ms = cfg.get_double_or(prefix + "bin_ms", p.bin_ms);
    p.n_atoms = static_cast<int>(cfg.get_int_or(prefix + "n_atoms", p.n_atoms));
    p.validate();
    return p;
}

SystemParams params_from_config(const std::string& path) {
    KeyValueConfig cfg = KeyValueConfig::parse_file(path);
    SystemParams p = params_from_config(cfg, "");
    cfg.reject_unknown_keys();
    return p;
}

JumpRates jump_rates_from_config(KeyValueConfig& cfg, const std::string& prefix) {
    JumpRates r;
    r.r_4to3_per_s = cfg.get_double_or(prefix + "r_4to3_per_s", r.r_4to3_per_s);
    r.r_3to4_per_s = cfg.get_double_or(prefix + "r_3to4_per_s", r.r_3to4_per_s);
    r.validate();
    return r;
}

}  // namespace cavitysim
