#pragma once

// Thin wrappers over Boost.Math special functions; everything the library
// needs beyond <cmath> funnels through here.

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>

namespace sustat::detail {

// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) { return boost::math::gamma_p(a, x); }

// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) { return boost::math::gamma_q(a, x); }

// Inverse of P(a, .) in x.
inline double gamma_p_inv(double a, double p) { return boost::math::gamma_p_inv(a, p); }

// Inverse of Q(a, .) in x.
inline double gamma_q_inv(double a, double q) { return boost::math::gamma_q_inv(a, q); }

// Standard normal CDF and quantile.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_quantile(double p) { return std::sqrt(2.0) * boost::math::erf_inv(2.0 * p - 1.0); }

}  // namespace sustat::detail
