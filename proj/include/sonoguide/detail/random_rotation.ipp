#pragma once

#include <cmath>
#include <numbers>
#include <random>

namespace sonoguide {

template <typename Rng>
Quaternion random_rotation(Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u1 = u01(rng), u2 = u01(rng), u3 = u01(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const Quaternion q{b * std::cos(two_pi * u3), a * std::sin(two_pi * u2),
                     a * std::cos(two_pi * u2), b * std::sin(two_pi * u3)};
  return q.normalized();
}

}  // namespace sonoguide
