#include "cavitysim/fit.hpp"

#include <cmath>
#include <limits>

#include "cavitysim/errors.hpp"

namespace cavitysim {

namespace {

void clamp_to_box(Eigen::VectorXd& x, const FitOptions& opt) {
    if (opt.lower.size() == x.size()) x = x.cwiseMax(opt.lower);
    if (opt.upper.size() == x.size()) x = x.cwiseMin(opt.upper);
}

Eigen::MatrixXd numerical_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& r0, const FitOptions& opt) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd jac(r0.size(), n);
    for (int j = 0; j < n; ++j) {
        double h = 1e-6 * std::max(std::fabs(x[j]), 1e-4);
        Eigen::VectorXd xp = x;
        xp[j] += h;
        clamp_to_box(xp, opt);
        if (xp[j] == x[j]) {  // pinned at a bound, step inward
            xp[j] = x[j] - h;
            clamp_to_box(xp, opt);
        }
        jac.col(j) = (f(xp) - r0) / (xp[j] - x[j]);
    }
    return jac;
}

}  // namespace

FitResult fit_least_squares(const ResidualFn& residuals, const Eigen::VectorXd& start,
                            const FitOptions& options) {
    Eigen::VectorXd x = start;
    clamp_to_box(x, options);
    Eigen::VectorXd r = residuals(x);
    if (!r.allFinite()) {
        throw ComputeError("FIT_DIVERGED", "non-finite residuals at starting point");
    }
    double chi2 = r.squaredNorm();
    double lambda = options.lambda_init;

    FitResult result;
    result.n_residuals = static_cast<int>(r.size());
    bool converged = false;
    int iter = 0;
    for (; iter < options.max_iterations && !converged; ++iter) {
        const Eigen::MatrixXd jac = numerical_jacobian(residuals, x, r, options);
        const Eigen::MatrixXd hess = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;

        bool stepped = false;
        for (int attempt = 0; attempt < 25; ++attempt) {
            Eigen::MatrixXd damped = hess;
            damped.diagonal() += lambda * hess.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd delta = damped.ldlt().solve(-grad);
            Eigen::VectorXd xt = x + delta;
            clamp_to_box(xt, options);
            const Eigen::VectorXd rt = residuals(xt);
            const double chi2t = rt.allFinite() ? rt.squaredNorm()
                                                : std::numeric_limits<double>::infinity();
            if (chi2t <= chi2) {
                const double dchi = chi2 - chi2t;
                const double dx = (xt - x).norm();
                x = xt;
                r = rt;
                chi2 = chi2t;
                lambda = std::max(lambda / 3.0, 1e-14);
                stepped = true;
                if (dchi <= options.ftol * std::max(chi2, 1e-300) ||
                    dx <= options.xtol * (x.norm() + options.xtol)) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            converged = true;  // no downhill step exists at any damping: at a minimum
        }
    }
    if (!converged) {
        throw ComputeError("NO_CONVERGENCE",
                           "least-squares fit hit the iteration limit (" +
                               std::to_string(options.max_iterations) + ")");
    }

    const Eigen::MatrixXd jac = numerical_jacobian(residuals, x, r, options);
    const Eigen::MatrixXd hess = jac.transpose() * jac;
    result.params = x;
    result.covariance = hess.fullPivLu().inverse();
    result.chi2 = chi2;
    result.iterations = iter;
    result.converged = true;
    return result;
}

}  // namespace cavitysim
