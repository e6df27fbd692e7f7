#pragma once

// Shared fixtures and independent oracles for the test suites.

#include "sonoguide/volume.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

namespace testing_support {

using sonoguide::Quaternion;
using sonoguide::Vec3;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDeg = kPi / 180.0;

inline Quaternion random_unit_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Quaternion q{n01(rng), n01(rng), n01(rng), n01(rng)};
  const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

inline Vec3 random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  return Vec3(n01(rng), n01(rng), n01(rng)).normalized();
}

inline Eigen::Quaterniond to_eigen(const Quaternion& q) { return {q.w, q.x, q.y, q.z}; }
inline Quaternion from_eigen(const Eigen::Quaterniond& q) { return {q.w(), q.x(), q.y(), q.z()}; }

/// Rotation by `angle` about `axis`, built through Eigen.
inline Quaternion eigen_axis_angle(const Vec3& axis, double angle) {
  return from_eigen(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
}

/// Phantom shared by the slow suites (generated once per process).
inline const sonoguide::Phantom& phantom64() {
  static const sonoguide::Phantom ph = sonoguide::generate_phantom(7);
  return ph;
}

/// Trilinear interpolation by explicit index arithmetic, 0 outside.
inline double trilinear_oracle(const sonoguide::Volume& v, double x, double y, double z) {
  const double fx = (x + 1.0) * 0.5 * (v.width() - 1);
  const double fy = (y + 1.0) * 0.5 * (v.height() - 1);
  const double fz = (z + 1.0) * 0.5 * (v.depth() - 1);
  if (fx < 0 || fy < 0 || fz < 0 || fx > v.width() - 1 || fy > v.height() - 1 ||
      fz > v.depth() - 1) {
    return 0.0;
  }
  const int i = std::min(static_cast<int>(fx), v.width() - 2);
  const int j = std::min(static_cast<int>(fy), v.height() - 2);
  const int k = std::min(static_cast<int>(fz), v.depth() - 2);
  const double a = fx - i, b = fy - j, c = fz - k;
  double out = 0.0;
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) {
        const double w = (di ? a : 1 - a) * (dj ? b : 1 - b) * (dk ? c : 1 - c);
        out += w * v.at(i + di, j + dj, k + dk);
      }
  return out;
}

inline sonoguide::Volume random_volume(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> data(static_cast<std::size_t>(n) * n * n);
  for (auto& d : data) d = u(rng);
  return sonoguide::Volume(n, n, n, std::move(data), "random");
}

}  // namespace testing_support
