#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "../core.hpp"

namespace hybrid_bhl::numerics {

namespace detail {

// Lanczos g = 7, n = 9.
inline constexpr double kLanczosG = 7.0;
inline constexpr double kLanczos[9] = {
    0.99999999999980993,   676.5203681218851,     -1259.1392167224028,
    771.32342877765313,    -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,  9.9843695780195716e-6, 1.5056327351493116e-7};

// log(sin(pi z)) without overflow for large |Im z|. Branch is irrelevant to
// callers, who only exponentiate.
inline std::complex<double> log_sin_pi(std::complex<double> z) {
  using C = std::complex<double>;
  const double pi = std::numbers::pi;
  const C i(0.0, 1.0);
  if (std::abs(z.imag()) < 20.0) return std::log(std::sin(pi * z));
  if (z.imag() > 0.0) return -i * pi * z + std::log((std::exp(2.0 * i * pi * z) - 1.0) / (2.0 * i));
  return i * pi * z + std::log((1.0 - std::exp(-2.0 * i * pi * z)) / (2.0 * i));
}

}  // namespace detail

// Principal-ish log Gamma for complex z away from the poles.
inline std::complex<double> log_gamma(std::complex<double> z) {
  using C = std::complex<double>;
  const double pi = std::numbers::pi;
  if (z.real() < 0.5) return std::log(pi) - detail::log_sin_pi(z) - log_gamma(1.0 - z);
  z -= 1.0;
  C x = detail::kLanczos[0];
  for (int k = 1; k < 9; ++k) x += detail::kLanczos[k] / (z + static_cast<double>(k));
  const C t = z + detail::kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

// log Gamma for real x > 0. Reentrant, unlike std::lgamma.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw InvalidArgument("log_gamma needs a positive argument");
  if (x < 0.5) return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - log_gamma(1.0 - x);
  const double z = x - 1.0;
  double s = detail::kLanczos[0];
  for (int k = 1; k < 9; ++k) s += detail::kLanczos[k] / (z + k);
  const double t = z + detail::kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(s);
}

namespace detail {

// x^a e^-x / Gamma(a), in log space.
inline double log_gamma_prefactor(double a, double x) {
  return a * std::log(x) - x - log_gamma(a);
}

}  // namespace detail

// Series branch, log space: log P(a, x) with
// P = e^-x x^a / Gamma(a+1) * sum x^n / ((a+1)...(a+n)).
inline double log_regularized_lower_gamma_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 100000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) return detail::log_gamma_prefactor(a, x) + std::log(sum);
  }
  throw NumericFailure("incomplete gamma series did not converge");
}

inline double regularized_lower_gamma_series(double a, double x) {
  if (x == 0.0) return 0.0;
  return std::exp(log_regularized_lower_gamma_series(a, x));
}

// Continued-fraction branch (modified Lentz): Q(a, x).
inline double regularized_upper_gamma_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) return std::exp(detail::log_gamma_prefactor(a, x)) * h;
  }
  throw NumericFailure("incomplete gamma continued fraction did not converge");
}

inline void check_gamma_args(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("incomplete gamma needs a > 0");
  if (!(x >= 0.0)) throw InvalidArgument("incomplete gamma needs x >= 0");
}

// P(a, x) = gamma(a, x) / Gamma(a)
inline double regularized_lower_gamma(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return regularized_lower_gamma_series(a, x);
  return 1.0 - regularized_upper_gamma_cf(a, x);
}

// Q(a, x) = 1 - P(a, x)
inline double regularized_upper_gamma(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - regularized_lower_gamma_series(a, x);
  return regularized_upper_gamma_cf(a, x);
}

// gamma(a, x) = int_0^x t^(a-1) e^-t dt
inline double lower_incomplete_gamma(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return std::exp(log_regularized_lower_gamma_series(a, x) + log_gamma(a));
  return std::exp(std::log1p(-regularized_upper_gamma_cf(a, x)) + log_gamma(a));
}

// Standard normal CDF and interval probability with care in the tails.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_interval(double a, double b) {
  const double s = std::numbers::sqrt2;
  if (a >= 0.0) return 0.5 * (std::erfc(a / s) - std::erfc(b / s));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / s) - std::erfc(-a / s));
  return 0.5 * (std::erf(b / s) - std::erf(a / s));
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace hybrid_bhl::numerics
