#include "cgof/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cgof/error.hpp"

namespace cgof::numerics {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxSeriesTerms = 100000;

void require_finite_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(what) + ": argument must be finite and > 0, got " +
                      std::to_string(x));
  }
}

void require_df(int df) {
  if (df < 1) throw DomainError("chi-square: degrees of freedom must be >= 1");
}

// exp(-x + a*log(x) - lgamma(a)), the common prefactor of P and Q.
double gamma_prefactor(double a, double x) {
  return std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Series for P(a, x); converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kMaxSeriesTerms; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * gamma_prefactor(a, x);
}

// Modified Lentz continued fraction for Q(a, x); used for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxSeriesTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h * gamma_prefactor(a, x);
}

// Monotone root finder for the chi-square quantile: Newton steps safeguarded
// by a bisection bracket. `upper` selects the survival-function residual.
double chi2_invert(int df, double target, bool upper) {
  const double k = df;
  // Wilson-Hilferty start.
  const double z = upper ? -normal_quantile(target) : normal_quantile(target);
  const double h = 2.0 / (9.0 * k);
  double q = k * std::pow(1.0 - h + z * std::sqrt(h), 3);
  if (!(q > 0.0) || !std::isfinite(q)) {
    // Lower-tail asymptote P(a, x) ~ x^a / Gamma(a + 1).
    const double a = 0.5 * k;
    const double p = upper ? 1.0 - target : target;
    q = 2.0 * std::exp((std::log(p) + log_gamma(a + 1.0)) / a);
    if (!(q > 0.0) || !std::isfinite(q)) q = k;
  }

  auto residual = [&](double x) {
    return upper ? target - chi2_sf(df, x) : chi2_cdf(df, x) - target;
  };

  double lo = 0.0;
  double hi = std::max(q, 1.0);
  while (residual(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NumericalError("chi2 quantile: failed to bracket root");
  }
  if (q <= lo || q >= hi) q = 0.5 * (lo + hi);

  for (int iter = 0; iter < 200; ++iter) {
    const double r = residual(q);
    if (r == 0.0) return q;
    if (r < 0.0) {
      lo = q;
    } else {
      hi = q;
    }
    const double slope = chi2_pdf(df, q);
    double next = q - r / slope;
    if (!(slope > 0.0) || !std::isfinite(next) || next <= lo || next >= hi) {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - q) <= 4.0 * kEps * q || hi - lo <= 4.0 * kEps * hi) {
      return next;
    }
    q = next;
  }
  return q;
}

}  // namespace

double log_gamma(double x) {
  require_finite_positive(x, "log_gamma");
  int sign = 0;
  // lgamma_r does not touch the global signgam, unlike std::lgamma.
  return ::lgamma_r(x, &sign);
}

double gamma_p(double a, double x) {
  require_finite_positive(a, "gamma_p");
  if (!(x >= 0.0)) throw DomainError("gamma_p: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
  require_finite_positive(a, "gamma_q");
  if (!(x >= 0.0)) throw DomainError("gamma_q: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi2_cdf(int df, double x) {
  require_df(df);
  if (std::isnan(x) || x < 0.0) throw DomainError("chi2_cdf: x must be >= 0");
  return gamma_p(0.5 * df, 0.5 * x);
}

double chi2_sf(int df, double x) {
  require_df(df);
  if (std::isnan(x) || x < 0.0) throw DomainError("chi2_sf: x must be >= 0");
  return gamma_q(0.5 * df, 0.5 * x);
}

double chi2_pdf(int df, double x) {
  require_df(df);
  if (x < 0.0) return 0.0;
  const double a = 0.5 * df;
  if (x == 0.0) {
    if (df == 1) return std::numeric_limits<double>::infinity();
    return df == 2 ? 0.5 : 0.0;
  }
  return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::numbers::ln2 - log_gamma(a));
}

double chi2_quantile(int df, double prob) {
  require_df(df);
  if (!(prob > 0.0 && prob < 1.0)) {
    throw DomainError("chi2_quantile: prob must lie in (0, 1)");
  }
  if (prob > 0.5) return chi2_invert(df, 1.0 - prob, /*upper=*/true);
  return chi2_invert(df, prob, /*upper=*/false);
}

double chi2_upper_quantile(int df, double tail) {
  require_df(df);
  if (!(tail > 0.0 && tail < 1.0)) {
    throw DomainError("chi2_upper_quantile: tail must lie in (0, 1)");
  }
  if (tail > 0.5) return chi2_invert(df, 1.0 - tail, /*upper=*/false);
  return chi2_invert(df, tail, /*upper=*/true);
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw DomainError("normal_quantile: prob must lie in (0, 1)");
  }
  const double q = prob - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                 67265.770927008700853) * r + 45921.953931549871457) * r +
               13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r +
                 39307.89580009271061) * r + 21213.794301586595867) * r +
               5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? prob : 1.0 - prob;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                  0.24178072517745061177) * r + 1.27045825245236838258) * r +
                3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                  0.0151986665636164571966) * r + 0.14810397642748007459) * r +
                0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  0.0012426609473880784386) * r + 0.026532189526576123093) * r +
                0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                  1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
                0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

}  // namespace cgof::numerics
