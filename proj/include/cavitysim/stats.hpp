// Normal distribution helpers used for threshold construction and fitting.
#pragma once

namespace cavitysim {

// CDF of the standard normal distribution.
double norm_cdf(double x);

// Inverse CDF (quantile) of the standard normal distribution, p in (0, 1).
// Wichura's algorithm AS 241 (PPND16), accurate to about 1e-15.
double inv_norm_cdf(double p);

}  // namespace cavitysim
