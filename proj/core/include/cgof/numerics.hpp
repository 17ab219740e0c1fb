#pragma once

// Special functions used by the mixture, EL and test modules. All functions
// are pure and may be called concurrently.

namespace cgof::numerics {

/// Natural log of the gamma function for finite x > 0.
double log_gamma(double x);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
/// directly so that tiny upper tails keep full relative precision.
double gamma_q(double a, double x);

/// Chi-square distribution function with `df` degrees of freedom.
double chi2_cdf(int df, double x);

/// Chi-square survival function 1 - chi2_cdf(df, x).
double chi2_sf(int df, double x);

double chi2_pdf(int df, double x);

/// Value q with chi2_cdf(df, q) = prob, for prob in (0, 1).
double chi2_quantile(int df, double prob);

/// Value q with chi2_sf(df, q) = tail. Preferred over
/// chi2_quantile(df, 1 - tail) when tail is small.
double chi2_upper_quantile(int df, double tail);

double normal_pdf(double x);
double normal_cdf(double x);

/// Inverse of normal_cdf for prob in (0, 1).
double normal_quantile(double prob);

/// log(exp(a) + exp(b)) without overflow; handles -inf operands.
double log_add_exp(double a, double b);

}  // namespace cgof::numerics
