#pragma once

// Probability functions backing the hypothesis tests. Everything here is
// self-contained so reports are reproducible without a statistics runtime.

namespace vceval::dist {

double normal_cdf(double z);
/// Upper tail 1 - Phi(z), accurate far into the tail.
double normal_sf(double z);
/// Inverse of normal_cdf for p in (0, 1) (Wichura AS 241, ~1e-16 relative).
double normal_quantile(double p);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);
/// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);
/// Upper tail of the F distribution.
double f_sf(double f, double df1, double df2);

/// CDF of the studentized range of `k` means with `df` error degrees of
/// freedom. df = +inf gives the range of k standard normals.
double studentized_range_cdf(double q, int k, double df);
double studentized_range_sf(double q, int k, double df);
/// Smallest q with studentized_range_cdf(q, k, df) >= p.
double studentized_range_quantile(double p, int k, double df);

}  // namespace vceval::dist
