#include "sonoguide/volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sonoguide {

Volume::Volume(int width, int height, int depth, std::vector<float> intensities,
               std::string name)
    : dims_{width, height, depth}, data_(std::move(intensities)), name_(std::move(name)) {
  if (width < 2 || height < 2 || depth < 2) {
    throw std::invalid_argument("volume dimensions must be at least 2");
  }
  const std::size_t expected =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * depth;
  if (data_.size() != expected) {
    throw std::invalid_argument("volume payload has " + std::to_string(data_.size()) +
                                " voxels, dims imply " + std::to_string(expected));
  }
  for (float v : data_) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw std::invalid_argument("volume intensities must be finite and in [0, 1]");
    }
  }
}

namespace {

struct Cell {
  int i0, j0, k0;
  double fx, fy, fz;
};

// Continuous voxel index along one axis; false when outside [-1, 1].
inline bool locate(double p, int n, int& i0, double& f) {
  if (!(p >= -1.0 && p <= 1.0)) {
    return false;
  }
  const double s = (p + 1.0) * 0.5 * (n - 1);
  i0 = std::min(static_cast<int>(s), n - 2);
  f = s - i0;
  return true;
}

}  // namespace

double Volume::sample(const Vec3& p) const {
  Cell c{};
  if (!locate(p.x(), dims_[0], c.i0, c.fx) || !locate(p.y(), dims_[1], c.j0, c.fy) ||
      !locate(p.z(), dims_[2], c.k0, c.fz)) {
    return 0.0;
  }
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(dims_[0]);
  const std::size_t sz = sy * static_cast<std::size_t>(dims_[1]);
  const float* base = data_.data() + c.i0 * sx + c.j0 * sy + c.k0 * sz;
  const double c000 = base[0], c100 = base[sx], c010 = base[sy], c110 = base[sx + sy];
  const double c001 = base[sz], c101 = base[sx + sz], c011 = base[sy + sz],
               c111 = base[sx + sy + sz];
  const double c00 = c000 + (c100 - c000) * c.fx;
  const double c10 = c010 + (c110 - c010) * c.fx;
  const double c01 = c001 + (c101 - c001) * c.fx;
  const double c11 = c011 + (c111 - c011) * c.fx;
  const double c0 = c00 + (c10 - c00) * c.fy;
  const double c1 = c01 + (c11 - c01) * c.fy;
  return c0 + (c1 - c0) * c.fz;
}

double Volume::sample_with_gradient(const Vec3& p, Vec3& gradient) const {
  Cell c{};
  if (!locate(p.x(), dims_[0], c.i0, c.fx) || !locate(p.y(), dims_[1], c.j0, c.fy) ||
      !locate(p.z(), dims_[2], c.k0, c.fz)) {
    gradient.setZero();
    return 0.0;
  }
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(dims_[0]);
  const std::size_t sz = sy * static_cast<std::size_t>(dims_[1]);
  const float* base = data_.data() + c.i0 * sx + c.j0 * sy + c.k0 * sz;
  const double c000 = base[0], c100 = base[sx], c010 = base[sy], c110 = base[sx + sy];
  const double c001 = base[sz], c101 = base[sx + sz], c011 = base[sy + sz],
               c111 = base[sx + sy + sz];
  const double fx = c.fx, fy = c.fy, fz = c.fz;
  const double gx = (1 - fy) * (1 - fz) * (c100 - c000) + fy * (1 - fz) * (c110 - c010) +
                    (1 - fy) * fz * (c101 - c001) + fy * fz * (c111 - c011);
  const double gy = (1 - fx) * (1 - fz) * (c010 - c000) + fx * (1 - fz) * (c110 - c100) +
                    (1 - fx) * fz * (c011 - c001) + fx * fz * (c111 - c101);
  const double gz = (1 - fx) * (1 - fy) * (c001 - c000) + fx * (1 - fy) * (c101 - c100) +
                    (1 - fx) * fy * (c011 - c010) + fx * fy * (c111 - c110);
  // d(index)/d(normalised) = (n - 1) / 2
  gradient = Vec3(gx * 0.5 * (dims_[0] - 1), gy * 0.5 * (dims_[1] - 1),
                  gz * 0.5 * (dims_[2] - 1));
  const double c00 = c000 + (c100 - c000) * fx;
  const double c10 = c010 + (c110 - c010) * fx;
  const double c01 = c001 + (c101 - c001) * fx;
  const double c11 = c011 + (c111 - c011) * fx;
  const double c0 = c00 + (c10 - c00) * fy;
  const double c1 = c01 + (c11 - c01) * fy;
  return c0 + (c1 - c0) * fz;
}

SliceImage::SliceImage(int w, int h, float fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
  if (w < 2 || h < 2) {
    throw std::invalid_argument("slice images must be at least 2x2");
  }
}

PlaneLayout PlaneLayout::centered(int width, int height, double extent) {
  if (width < 2 || height < 2) {
    throw std::invalid_argument("plane layout must be at least 2x2");
  }
  if (!(extent > 0.0)) {
    throw std::invalid_argument("plane extent must be positive");
  }
  return {width, height, -extent, 2.0 * extent / (width - 1), -extent,
          2.0 * extent / (height - 1)};
}

PlaneLayout PlaneLayout::downsampled(int factor) const {
  if (factor < 1) {
    throw std::invalid_argument("downsampling factor must be >= 1");
  }
  PlaneLayout out;
  out.width = width / factor;
  out.height = height / factor;
  out.x0 = x0 + dx * 0.5 * (factor - 1);
  out.y0 = y0 + dy * 0.5 * (factor - 1);
  out.dx = dx * factor;
  out.dy = dy * factor;
  return out;
}

PlaneGrid build_grid(const Pose& pose, const PlaneLayout& layout) {
  const Mat3 r = to_rotation_matrix(pose.q);
  const Vec3 ex = r.col(0);
  const Vec3 ey = r.col(1);
  PlaneGrid grid;
  grid.width = layout.width;
  grid.height = layout.height;
  grid.points.resize(static_cast<std::size_t>(layout.width) * layout.height);
  for (int v = 0; v < layout.height; ++v) {
    const double y = layout.y0 + v * layout.dy;
    for (int u = 0; u < layout.width; ++u) {
      const double x = layout.x0 + u * layout.dx;
      grid.points[static_cast<std::size_t>(v) * layout.width + u] = ex * x + ey * y + pose.delta;
    }
  }
  return grid;
}

PlaneGrid build_grid(const Pose& pose, int out_w, int out_h, double extent) {
  return build_grid(pose, PlaneLayout::centered(out_w, out_h, extent));
}

void sample_slice_into(const Volume& volume, const Pose& pose, const PlaneLayout& layout,
                       std::span<float> out) {
  if (out.size() != static_cast<std::size_t>(layout.width) * layout.height) {
    throw std::invalid_argument("sample_slice_into: output size does not match layout");
  }
  const Mat3 r = to_rotation_matrix(pose.q);
  const Vec3 ex = r.col(0);
  const Vec3 ey = r.col(1);
  std::size_t idx = 0;
  for (int v = 0; v < layout.height; ++v) {
    const Vec3 row = ey * (layout.y0 + v * layout.dy) + pose.delta;
    for (int u = 0; u < layout.width; ++u) {
      const Vec3 p = ex * (layout.x0 + u * layout.dx) + row;
      out[idx++] = static_cast<float>(std::clamp(volume.sample(p), 0.0, 1.0));
    }
  }
}

SliceImage sample_slice(const Volume& volume, const Pose& pose, const PlaneLayout& layout) {
  SliceImage img(layout.width, layout.height);
  sample_slice_into(volume, pose, layout, img.pixels);
  img.pose = pose;
  return img;
}

SliceImage sample_slice(const Volume& volume, const Pose& pose, int out_w, int out_h,
                        double extent) {
  return sample_slice(volume, pose, PlaneLayout::centered(out_w, out_h, extent));
}

std::vector<Vec3> sample_slice_gradient(const Volume& volume, const Pose& pose, int out_w,
                                        int out_h, double extent) {
  const PlaneGrid grid = build_grid(pose, out_w, out_h, extent);
  std::vector<Vec3> out(grid.points.size());
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    volume.sample_with_gradient(grid.points[i], out[i]);
  }
  return out;
}

Mask binarize(const SliceImage& image, double threshold) {
  Mask mask(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), mask.begin(),
                 [threshold](float v) { return static_cast<std::uint8_t>(v > threshold); });
  return mask;
}

SliceImage downsample(const SliceImage& image, int factor) {
  if (factor < 1) {
    throw std::invalid_argument("downsampling factor must be >= 1");
  }
  if (factor == 1) {
    return image;
  }
  SliceImage out(image.width / factor, image.height / factor);
  const double inv = 1.0 / (factor * factor);
  for (int v = 0; v < out.height; ++v) {
    for (int u = 0; u < out.width; ++u) {
      double acc = 0.0;
      for (int b = 0; b < factor; ++b) {
        for (int a = 0; a < factor; ++a) {
          acc += image.at(u * factor + a, v * factor + b);
        }
      }
      out.at(u, v) = static_cast<float>(acc * inv);
    }
  }
  out.pose = image.pose;
  return out;
}

}  // namespace sonoguide
