#pragma once

#include <cmath>

namespace mpfc {

// Double-well W(s) = (1-s)^2 s^2 / 2 with wells at 0 and 1, and the profile
// transforms derived from it. Everything here is closed form.

/// Surface-tension normaliser: integral of sqrt(2W) over [0, 1].
inline constexpr double kSigma = 1.0 / 6.0;

constexpr double w_eval(double s) noexcept { return 0.5 * (1.0 - s) * (1.0 - s) * s * s; }

constexpr double w_prime(double s) noexcept { return s * (1.0 - s) * (1.0 - 2.0 * s); }

/// sqrt(2 W(s)) = |s (1 - s)|.
constexpr double sqrt_two_w(double s) noexcept {
  const double v = s * (1.0 - s);
  return v < 0.0 ? -v : v;
}

/// k(s) = integral_0^s |y (1 - y)| dy. Equals s^2/2 - s^3/3 on [0, 1]; outside
/// it keeps integrating |y(1-y)| so it stays strictly increasing.
constexpr double k_primitive(double s) noexcept {
  if (s < 0.0) return s * s * s / 3.0 - s * s / 2.0;
  if (s > 1.0) return 1.0 / 3.0 + s * s * s / 3.0 - s * s / 2.0;
  return s * s / 2.0 - s * s * s / 3.0;
}

/// G(s) = k(s) / sigma; maps the profile onto a unit jump, G(0)=0, G(1)=1.
constexpr double g_transform(double s) noexcept { return k_primitive(s) / kSigma; }

/// Inverse of G restricted to [0, 1]. Throws DomainError outside [0, 1].
double g_inverse(double value);

/// Logistic optimal profile 1 / (1 + exp(-z/eps)); solves eps q' = q (1 - q).
inline double optimal_profile(double z, double eps) noexcept {
  return 1.0 / (1.0 + std::exp(-z / eps));
}

/// d/dz of optimal_profile.
inline double optimal_profile_slope(double z, double eps) noexcept {
  const double q = optimal_profile(z, eps);
  return q * (1.0 - q) / eps;
}

}  // namespace mpfc
