#include "sonoguide/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace sonoguide {

namespace {

// Axes of the phantom frame: +x anterior, +y left, +z superior.

struct Ellipsoid {
  Vec3 center;
  Vec3 axes;
  Mat3 orientation = Mat3::Identity();  // columns: ellipsoid axes in volume frame

  // Approximate signed distance (negative inside).
  double signed_distance(const Vec3& p) const {
    const Vec3 local = orientation.transpose() * (p - center);
    const double r = local.cwiseQuotient(axes).norm();
    return (r - 1.0) * axes.minCoeff();
  }
};

// Soft occupancy with a transition band of `width` around the surface.
double occupancy(double sd, double width) {
  const double t = std::clamp(0.5 - sd / width, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

Mat3 rot_z(double deg) {
  return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, Vec3::UnitZ()).toRotationMatrix();
}

struct Structure {
  Ellipsoid shape;
  double intensity;
};

class PhantomBuilder {
 public:
  explicit PhantomBuilder(std::uint64_t seed) : rng_(seed) {}

  Ellipsoid jitter(Vec3 center, Vec3 axes, Mat3 orientation = Mat3::Identity()) {
    std::uniform_real_distribution<double> shift(-0.015, 0.015);
    std::uniform_real_distribution<double> scale(0.95, 1.05);
    for (int i = 0; i < 3; ++i) {
      center[i] += shift(rng_);
      axes[i] *= scale(rng_);
    }
    return {center, axes, orientation};
  }

  struct Wave {
    Vec3 k;
    double phase;
    double amplitude;
  };

  std::vector<Wave> texture(int count) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> mag(3.0, 8.0);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    std::vector<Wave> waves;
    for (int i = 0; i < count; ++i) {
      Vec3 dir(n01(rng_), n01(rng_), n01(rng_));
      dir.normalize();
      waves.push_back({dir * mag(rng_), ph(rng_), 0.5 / std::sqrt(static_cast<double>(count))});
    }
    return waves;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

Phantom generate_phantom(std::uint64_t seed, std::array<int, 3> dims) {
  for (int d : dims) {
    if (d < 32) {
      throw std::invalid_argument("phantom dimensions must be at least 32 voxels per axis");
    }
  }
  PhantomBuilder b(seed);

  const Ellipsoid brain = b.jitter({0.02, 0.0, 0.02}, {0.74, 0.62, 0.55});
  Ellipsoid skull = brain;
  skull.axes += Vec3::Constant(0.08);
  // occipital bone is thicker
  skull.center.x() -= 0.015;

  const std::vector<Structure> structures = {
      // lateral ventricles, left larger than right
      {b.jitter({0.05, 0.14, 0.12}, {0.34, 0.075, 0.09}, rot_z(12.0)), 0.62},
      {b.jitter({0.02, -0.11, 0.10}, {0.28, 0.05, 0.07}, rot_z(-8.0)), 0.55},
      // choroid plexus inside the left ventricle
      {b.jitter({-0.08, 0.14, 0.12}, {0.09, 0.04, 0.05}), 0.86},
      // cavum septum pellucidum
      {b.jitter({0.28, 0.01, 0.05}, {0.09, 0.035, 0.06}), 0.12},
      // thalami
      {b.jitter({0.0, 0.09, -0.02}, {0.12, 0.07, 0.08}), 0.45},
      {b.jitter({0.0, -0.09, -0.03}, {0.11, 0.065, 0.075}), 0.40},
      // cerebellar hemispheres and vermis
      {b.jitter({-0.42, 0.15, -0.22}, {0.13, 0.17, 0.11}), 0.74},
      {b.jitter({-0.41, -0.13, -0.22}, {0.12, 0.15, 0.10}), 0.70},
      {b.jitter({-0.46, 0.0, -0.19}, {0.10, 0.06, 0.10}), 0.80},
  };
  const auto waves = b.texture(8);

  const int w = dims[0], h = dims[1], d = dims[2];
  const double band = 2.4 / (std::min({w, h, d}) - 1);  // ~1.2 voxels
  std::vector<float> voxels(static_cast<std::size_t>(w) * h * d, 0.0f);
  std::size_t idx = 0;
  for (int k = 0; k < d; ++k) {
    const double z = -1.0 + 2.0 * k / (d - 1);
    for (int j = 0; j < h; ++j) {
      const double y = -1.0 + 2.0 * j / (h - 1);
      for (int i = 0; i < w; ++i, ++idx) {
        const double x = -1.0 + 2.0 * i / (w - 1);
        const Vec3 p(x, y, z);

        const double in_skull = occupancy(skull.signed_distance(p), band);
        if (in_skull <= 0.0) {
          continue;
        }
        const double in_brain = occupancy(brain.signed_distance(p), band);

        double tex = 0.0;
        for (const auto& wv : waves) tex += wv.amplitude * std::cos(wv.k.dot(p) + wv.phase);
        double value = std::max(0.1, 0.32 + 0.3 * tex + 0.05 * x - 0.04 * y);
        for (const auto& s : structures) {
          const double m = occupancy(s.shape.signed_distance(p), band);
          value += (s.intensity - value) * m;
        }
        const double bone = 0.80 + 0.12 * std::cos(2.5 * y + 1.0) + 0.06 * std::sin(3.0 * x - 0.5 * z);
        value = in_brain * value + (in_skull - in_brain) * bone;
        voxels[idx] = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }

  Volume volume(w, h, d, std::move(voxels), "phantom-" + std::to_string(seed));

  // Trans-ventricular: near-axial through the ventricles and CSP.
  // Trans-cerebellar: tilted so the plane runs from the CSP down to the
  // cerebellum.
  const double deg = std::numbers::pi / 180.0;
  const Quaternion tvp_q =
      from_axis_angle(Vec3::UnitY(), -8.0 * deg) * from_axis_angle(Vec3::UnitZ(), 4.0 * deg);
  const Quaternion tcp_q =
      from_axis_angle(Vec3::UnitY(), -21.0 * deg) * from_axis_angle(Vec3::UnitZ(), -3.0 * deg);
  std::vector<StandardPlaneDef> sps = {
      StandardPlaneDef::from_primary(SpId::TVP, tvp_q, {0.03, 0.01, 0.11}),
      StandardPlaneDef::from_primary(SpId::TCP, tcp_q, {-0.02, 0.0, -0.07}),
  };
  return {std::move(volume), std::move(sps)};
}

}  // namespace sonoguide
