#include "sonoguide/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sonoguide {

SliceImage crop_resize(const SliceImage& frame, const CropSpec& spec) {
  if (spec.crop_w < 2 || spec.crop_h < 2 || spec.out < 2) {
    throw std::invalid_argument("crop_resize: invalid crop specification");
  }
  if (frame.width < spec.crop_w || frame.height < spec.crop_h) {
    throw std::invalid_argument("crop_resize: frame " + std::to_string(frame.width) + "x" +
                                std::to_string(frame.height) + " is smaller than the crop " +
                                std::to_string(spec.crop_w) + "x" + std::to_string(spec.crop_h));
  }
  const int x_off = (frame.width - spec.crop_w) / 2;
  const int y_off = (frame.height - spec.crop_h) / 2;
  const double scale = static_cast<double>(spec.out) / std::max(spec.crop_w, spec.crop_h);
  const int content_w = std::min(spec.out, static_cast<int>(std::lround(spec.crop_w * scale)));
  const int content_h = std::min(spec.out, static_cast<int>(std::lround(spec.crop_h * scale)));
  const int pad_x = (spec.out - content_w) / 2;
  const int pad_y = (spec.out - content_h) / 2;
  // actual sampling step keeps the content exactly spanning the crop
  const double sx = static_cast<double>(spec.crop_w) / content_w;
  const double sy = static_cast<double>(spec.crop_h) / content_h;

  SliceImage out(spec.out, spec.out, spec.pad_value);
  for (int v = 0; v < content_h; ++v) {
    const double fy = std::clamp((v + 0.5) * sy - 0.5, 0.0, spec.crop_h - 1.0);
    const int y0 = std::min(static_cast<int>(fy), spec.crop_h - 2);
    const double ty = fy - y0;
    for (int u = 0; u < content_w; ++u) {
      const double fx = std::clamp((u + 0.5) * sx - 0.5, 0.0, spec.crop_w - 1.0);
      const int x0 = std::min(static_cast<int>(fx), spec.crop_w - 2);
      const double tx = fx - x0;
      const double a = frame.at(x_off + x0, y_off + y0);
      const double b = frame.at(x_off + x0 + 1, y_off + y0);
      const double c = frame.at(x_off + x0, y_off + y0 + 1);
      const double d = frame.at(x_off + x0 + 1, y_off + y0 + 1);
      const double top = a * (1.0 - tx) + b * tx;
      const double bottom = c * (1.0 - tx) + d * tx;
      out.at(pad_x + u, pad_y + v) = static_cast<float>(top * (1.0 - ty) + bottom * ty);
    }
  }
  return out;
}

SliceImage smooth(const SliceImage& image, int radius, double intensity_sigma) {
  if (radius < 1) {
    throw std::invalid_argument("smooth: radius must be >= 1");
  }
  if (!(intensity_sigma > 0.0)) {
    throw std::invalid_argument("smooth: intensity sigma must be positive");
  }
  const double spatial_sigma = 0.5 * radius;
  const int side = 2 * radius + 1;
  std::vector<double> spatial(static_cast<std::size_t>(side) * side);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      spatial[(dy + radius) * side + (dx + radius)] =
          std::exp(-0.5 * (dx * dx + dy * dy) / (spatial_sigma * spatial_sigma));
    }
  }
  const double range_k = -0.5 / (intensity_sigma * intensity_sigma);

  SliceImage out = image;
  for (int v = 0; v < image.height; ++v) {
    for (int u = 0; u < image.width; ++u) {
      const double center = image.at(u, v);
      double acc = 0.0, wsum = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = v + dy;
        if (yy < 0 || yy >= image.height) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = u + dx;
          if (xx < 0 || xx >= image.width) continue;
          const double val = image.at(xx, yy);
          const double diff = val - center;
          const double w = spatial[(dy + radius) * side + (dx + radius)] * std::exp(range_k * diff * diff);
          acc += w * val;
          wsum += w;
        }
      }
      out.at(u, v) = static_cast<float>(acc / wsum);
    }
  }
  return out;
}

}  // namespace sonoguide
