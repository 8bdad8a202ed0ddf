#include "mpfc/potential.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mpfc/error.hpp"

namespace mpfc {

double g_inverse(double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw DomainError("g_inverse: " + std::to_string(value) + " is outside G([0, 1]) = [0, 1]");
  }
  // On [0, 1], G(s) = 3s^2 - 2s^3; its inverse has a trigonometric closed form.
  double s = 0.5 - std::sin(std::asin(1.0 - 2.0 * value) / 3.0);
  // One Newton step polishes the last few ulps.
  const double slope = 6.0 * s * (1.0 - s);
  if (slope > 1e-8) s -= (g_transform(s) - value) / slope;
  return s;
}

}  // namespace mpfc
