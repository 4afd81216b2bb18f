// Dense Levenberg-Marquardt least squares with numerical Jacobians.
// Minimizes sum of squared residuals r_i(theta); residuals are expected to be
// pre-weighted (r_i = (y_i - f_i)/sigma_i), in which case `covariance` is the
// parameter covariance matrix without further scaling.
#pragma once

#include <Eigen/Dense>
#include <functional>

namespace cavitysim {

struct FitOptions {
    int max_iterations = 200;
    double ftol = 1e-12;       // relative chi2 change for convergence
    double xtol = 1e-12;       // relative step size for convergence
    double lambda_init = 1e-3;
    Eigen::VectorXd lower;     // optional box constraints (empty = none)
    Eigen::VectorXd upper;
};

struct FitResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;  // (J^T J)^-1 at the solution
    double chi2 = 0.0;
    int n_residuals = 0;
    int iterations = 0;
    bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Throws ComputeError("NO_CONVERGENCE") if the iteration limit is reached
// without meeting ftol/xtol, and ComputeError("FIT_DIVERGED") if the model
// returns non-finite residuals at the starting point.
FitResult fit_least_squares(const ResidualFn& residuals, const Eigen::VectorXd& start,
                            const FitOptions& options = {});

}  // namespace cavitysim
