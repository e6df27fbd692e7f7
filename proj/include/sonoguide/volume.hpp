#pragma once

// 3D atlas volumes, 2D slice images, pose-parameterised plane grids and the
// trilinear grid sampler.
//
// Coordinates are normalised to [-1, 1] per axis: -1 is the centre of the
// first voxel, +1 the centre of the last. Samples outside [-1, 1]^3 are 0.
// Voxels are stored x-fastest: index = x + W * (y + H * z).

#include "sonoguide/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sonoguide {

inline constexpr int kDefaultSliceSize = 160;
inline constexpr double kDefaultForegroundThreshold = 0.05;

class Volume {
 public:
  Volume(int width, int height, int depth, std::vector<float> intensities,
         std::string name = "volume");

  int width() const { return dims_[0]; }
  int height() const { return dims_[1]; }
  int depth() const { return dims_[2]; }
  const std::array<int, 3>& dims() const { return dims_; }
  const std::string& name() const { return name_; }
  std::span<const float> data() const { return data_; }

  float at(int x, int y, int z) const {
    return data_[static_cast<std::size_t>(x) +
                 static_cast<std::size_t>(dims_[0]) *
                     (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims_[1]) * z)];
  }

  /// Trilinear value at a normalised point; 0 outside [-1,1]^3.
  double sample(const Vec3& p) const;
  /// Trilinear value and its analytic gradient with respect to the
  /// normalised coordinates. Gradient is 0 outside the volume.
  double sample_with_gradient(const Vec3& p, Vec3& gradient) const;

 private:
  std::array<int, 3> dims_;
  std::vector<float> data_;
  std::string name_;
};

using Mask = std::vector<std::uint8_t>;

struct SliceImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // row-major, pixel (u, v) at v * width + u
  std::optional<Mask> mask;
  std::optional<Pose> pose;

  SliceImage() = default;
  SliceImage(int w, int h, float fill = 0.0f);

  float at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
  float& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  std::size_t size() const { return pixels.size(); }
};

/// Regular layout of pixel centres on the local plane z = 0:
/// pixel (u, v) sits at (x0 + u*dx, y0 + v*dy, 0) before the pose is applied.
struct PlaneLayout {
  int width = kDefaultSliceSize;
  int height = kDefaultSliceSize;
  double x0 = -1.0;
  double dx = 2.0 / (kDefaultSliceSize - 1);
  double y0 = -1.0;
  double dy = 2.0 / (kDefaultSliceSize - 1);

  /// Pixels spanning [-extent, extent] on both axes.
  static PlaneLayout centered(int width, int height, double extent = 1.0);
  /// The layout whose pixel centres are the block centres of a factor x factor
  /// box downsampling of this layout.
  PlaneLayout downsampled(int factor) const;
};

struct PlaneGrid {
  int width = 0;
  int height = 0;
  std::vector<Vec3> points;  // row-major

  const Vec3& at(int u, int v) const { return points[static_cast<std::size_t>(v) * width + u]; }
};

/// p(u, v) = R(q) (x_u, y_v, 0)^T + delta with x_u, y_v uniform on
/// [-extent, extent].
PlaneGrid build_grid(const Pose& pose, int out_w, int out_h, double extent = 1.0);
PlaneGrid build_grid(const Pose& pose, const PlaneLayout& layout);

SliceImage sample_slice(const Volume& volume, const Pose& pose,
                        int out_w = kDefaultSliceSize, int out_h = kDefaultSliceSize,
                        double extent = 1.0);
SliceImage sample_slice(const Volume& volume, const Pose& pose, const PlaneLayout& layout);
/// Samples without allocating; out must hold layout.width * layout.height.
void sample_slice_into(const Volume& volume, const Pose& pose, const PlaneLayout& layout,
                       std::span<float> out);

/// Per-pixel spatial gradient of the volume at the slice's grid points, in
/// normalised coordinates.
std::vector<Vec3> sample_slice_gradient(const Volume& volume, const Pose& pose,
                                        int out_w = kDefaultSliceSize,
                                        int out_h = kDefaultSliceSize, double extent = 1.0);

/// mask = intensity > threshold.
Mask binarize(const SliceImage& image, double threshold = kDefaultForegroundThreshold);

/// Box-average downsampling by an integer factor (trailing partial blocks are
/// dropped).
SliceImage downsample(const SliceImage& image, int factor);

struct Phantom {
  Volume volume;
  std::vector<StandardPlaneDef> standard_planes;  // TVP then TCP
};

/// Deterministic synthetic head phantom: an ellipsoidal skull shell with
/// asymmetric internal structures, plus TVP-like and TCP-like standard
/// planes. Throws std::invalid_argument if any dimension is below 32.
Phantom generate_phantom(std::uint64_t seed, std::array<int, 3> dims = {64, 64, 64});

/// Raw little-endian float32 payload at `path`, JSON sidecar at
/// `path + ".json"` holding {"dims": [...], "name": ...}. Volume sidecars may
/// carry "standard_planes".
void save_volume(const Volume& volume, const std::filesystem::path& path,
                 const std::vector<StandardPlaneDef>& standard_planes = {});
Volume load_volume(const std::filesystem::path& path);
std::vector<StandardPlaneDef> load_standard_planes(const std::filesystem::path& path);

/// Same format with 2D dims; the pose, when present, goes into the sidecar.
void save_image(const SliceImage& image, const std::filesystem::path& path);
SliceImage load_image(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& payload);

}  // namespace sonoguide
