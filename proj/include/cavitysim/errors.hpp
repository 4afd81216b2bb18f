// Error types shared by all modules. Config errors map to CLI exit code 2,
// computation errors to exit code 3.
#pragma once

#include <stdexcept>
#include <string>

namespace cavitysim {

// Base for all errors raised by the simulation/analysis modules.
class SimError : public std::runtime_error {
public:
    SimError(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// Invalid parameters, malformed config files, unknown keys.
class ConfigError : public SimError {
public:
    ConfigError(const std::string& what) : SimError("CONFIG", what) {}
};

// Numerical failure in a solver or fitter (non-convergence, overflow, ...).
class ComputeError : public SimError {
public:
    ComputeError(std::string code, const std::string& what)
        : SimError(std::move(code), what) {}
};

}  // namespace cavitysim
