#pragma once

#include <cmath>
#include <numbers>

#include "fracext/error.hpp"

namespace fracext {

/// |Gamma(-s)| = Gamma(1 - s) / s for s in (0, 1).
inline double abs_gamma_neg(double s) { return std::tgamma(1.0 - s) / s; }

namespace detail {

/// Power series of I_nu(x).
inline double bessel_i_series(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = std::pow(0.5 * x, nu) / std::tgamma(nu + 1.0);
  double sum = term;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * (static_cast<double>(k) + nu));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

/// Steed's continued fraction (Temme's CF2) for K_nu, x >= 2.
inline double bessel_k_cf2(double nu, double x) {
  const int nl = static_cast<int>(nu + 0.5);
  const double xmu = nu - nl;
  const double xmu2 = xmu * xmu;
  const double xi = 1.0 / x;
  const double xi2 = 2.0 * xi;
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25 - xmu2;
  double q = a1, c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i < 100000; ++i) {
    a -= 2 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < 1e-17) break;
  }
  h = a1 * h;
  double kmu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
  double k1 = kmu * (xmu + x + 0.5 - h) * xi;
  for (int i = 1; i <= nl; ++i) {
    const double next = (xmu + i) * xi2 * k1 + kmu;
    kmu = k1;
    k1 = next;
  }
  return kmu;
}

/// Hankel asymptotic expansion, truncated at the smallest term.
inline double bessel_k_asymptotic(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (k * 8.0 * x);
    if (k >= 10 && std::abs(term) > std::abs(prev)) break;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    prev = term;
  }
  return std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) * sum;
}

}  // namespace detail

/// Modified Bessel function of the second kind K_s(x), real order s in (0,1).
/// x <= 2: reflection formula over the I_{+-s} power series; 2 < x < 20:
/// Steed's continued fraction; x >= 20: Hankel asymptotic series.
inline double bessel_k(double s, double x) {
  if (!(x > 0.0)) throw InvalidArgument("bessel_k requires x > 0");
  if (!(s > 0.0 && s < 1.0)) throw InvalidArgument("bessel_k requires order s in (0, 1)");
  if (x <= 2.0)
    return std::numbers::pi * (detail::bessel_i_series(-s, x) - detail::bessel_i_series(s, x)) /
           (2.0 * std::sin(s * std::numbers::pi));
  if (x < 20.0) return detail::bessel_k_cf2(s, x);
  return detail::bessel_k_asymptotic(s, x);
}

}  // namespace fracext
