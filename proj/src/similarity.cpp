#include "sonoguide/similarity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace sonoguide {

double dice_loss(std::span<const float> soft, const Mask& mask) {
  if (soft.size() != mask.size()) {
    throw std::invalid_argument("dice_loss: shape mismatch");
  }
  double inter = 0.0, sum_s = 0.0, sum_y = 0.0;
  for (std::size_t i = 0; i < soft.size(); ++i) {
    const double s = soft[i];
    const double y = mask[i] ? 1.0 : 0.0;
    inter += s * y;
    sum_s += s;
    sum_y += y;
  }
  return 1.0 - (2.0 * inter + kDiceEps) / (sum_s + sum_y + kDiceEps);
}

double dice_loss(const SliceImage& slice, const Mask& mask) {
  return dice_loss(std::span<const float>(slice.pixels), mask);
}

double dice_coefficient(const Mask& a, const Mask& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dice_coefficient: shape mismatch");
  }
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    na += a[i] ? 1 : 0;
    nb += b[i] ? 1 : 0;
  }
  return (2.0 * inter + kDiceEps) / (static_cast<double>(na + nb) + kDiceEps);
}

std::vector<float> soft_foreground(const SliceImage& slice, double threshold) {
  std::vector<float> out(slice.pixels.size());
  std::transform(slice.pixels.begin(), slice.pixels.end(), out.begin(), [threshold](float v) {
    return static_cast<float>(std::min(1.0, v / threshold));
  });
  return out;
}

double pose_regression_loss(const Pose& theta, const Pose& theta_hat) {
  const Quaternion qh = align_sign(theta.q, theta_hat.q);
  const double dw = theta.q.w - qh.w, dx = theta.q.x - qh.x, dy = theta.q.y - qh.y,
               dz = theta.q.z - qh.z;
  const Vec3 dd = theta.delta - theta_hat.delta;
  return std::sqrt(dw * dw + dx * dx + dy * dy + dz * dz + dd.squaredNorm());
}

AtlasLoss atlas_loss(const Volume& volume, const Mask& atlas_slice_mask, const Pose& theta,
                     const Pose& theta_hat, int out_w, int out_h) {
  const SliceImage resampled = sample_slice(volume, theta_hat, out_w, out_h);
  return {dice_loss(soft_foreground(resampled), atlas_slice_mask),
          pose_regression_loss(theta, theta_hat)};
}

NccResult ncc(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("ncc: shape mismatch");
  }
  if (a.size() < 2) {
    throw std::invalid_argument("ncc: need at least two pixels");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va /= n;
  vb /= n;
  cov /= n;
  if (va < 1e-12 || vb < 1e-12) {
    return {0.0, true};
  }
  return {std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0), false};
}

// ---------------------------------------------------------------------------
// MS-SSIM

namespace {

using Plane = std::vector<double>;

// Separable Gaussian filter; the window is truncated at the border and
// renormalised, so the output keeps the input size.
Plane gaussian_filter(const Plane& in, int w, int h, const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  Plane tmp(in.size()), out(in.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int xx = x + k;
        if (xx < 0 || xx >= w) continue;
        acc += kernel[k + r] * in[static_cast<std::size_t>(y) * w + xx];
        wsum += kernel[k + r];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc / wsum;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int yy = y + k;
        if (yy < 0 || yy >= h) continue;
        acc += kernel[k + r] * tmp[static_cast<std::size_t>(yy) * w + x];
        wsum += kernel[k + r];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc / wsum;
    }
  }
  return out;
}

struct SsimTerms {
  double luminance_contrast_structure;  // mean SSIM
  double contrast_structure;            // mean cs
};

SsimTerms ssim_terms(const Plane& a, const Plane& b, int w, int h,
                     const std::vector<double>& kernel, const MsSsimOptions& opt) {
  const double c1 = std::pow(opt.k1 * opt.dynamic_range, 2);
  const double c2 = std::pow(opt.k2 * opt.dynamic_range, 2);
  Plane aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const Plane mu_a = gaussian_filter(a, w, h, kernel);
  const Plane mu_b = gaussian_filter(b, w, h, kernel);
  const Plane e_aa = gaussian_filter(aa, w, h, kernel);
  const Plane e_bb = gaussian_filter(bb, w, h, kernel);
  const Plane e_ab = gaussian_filter(ab, w, h, kernel);
  double sum_ssim = 0.0, sum_cs = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    const double l = (2.0 * mu_a[i] * mu_b[i] + c1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1);
    sum_ssim += l * cs;
    sum_cs += cs;
  }
  const double n = static_cast<double>(a.size());
  return {sum_ssim / n, sum_cs / n};
}

Plane pool2(const Plane& in, int w, int h) {
  const int w2 = w / 2, h2 = h / 2;
  Plane out(static_cast<std::size_t>(w2) * h2);
  for (int y = 0; y < h2; ++y) {
    for (int x = 0; x < w2; ++x) {
      const std::size_t i = static_cast<std::size_t>(2 * y) * w + 2 * x;
      out[static_cast<std::size_t>(y) * w2 + x] = 0.25 * (in[i] + in[i + 1] + in[i + w] + in[i + w + 1]);
    }
  }
  return out;
}

}  // namespace

double ms_ssim(const SliceImage& a, const SliceImage& b, const MsSsimOptions& opt) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("ms_ssim: shape mismatch");
  }
  constexpr std::array<double, 5> kStandardWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  if (opt.scales < 1 || opt.scales > 5) {
    throw std::invalid_argument("ms_ssim: scale count must be in [1, 5]");
  }
  const int min_size = 8 << (opt.scales - 1);
  if (std::min(a.width, a.height) < min_size) {
    throw std::invalid_argument("ms_ssim: images must be at least " + std::to_string(min_size) +
                                " pixels per side for " + std::to_string(opt.scales) +
                                " scales");
  }
  double wsum = 0.0;
  for (int s = 0; s < opt.scales; ++s) wsum += kStandardWeights[s];

  std::vector<double> kernel(static_cast<std::size_t>(opt.window));
  const int r = opt.window / 2;
  for (int i = 0; i < opt.window; ++i) {
    kernel[i] = std::exp(-0.5 * (i - r) * (i - r) / (opt.sigma * opt.sigma));
  }

  Plane pa(a.pixels.begin(), a.pixels.end());
  Plane pb(b.pixels.begin(), b.pixels.end());
  int w = a.width, h = a.height;
  double result = 1.0;
  for (int s = 0; s < opt.scales; ++s) {
    const SsimTerms t = ssim_terms(pa, pb, w, h, kernel, opt);
    const double weight = kStandardWeights[s] / wsum;
    const double term = s + 1 == opt.scales ? t.luminance_contrast_structure : t.contrast_structure;
    result *= std::pow(std::max(term, 0.0), weight);
    if (s + 1 < opt.scales) {
      pa = pool2(pa, w, h);
      pb = pool2(pb, w, h);
      w /= 2;
      h /= 2;
    }
  }
  return std::clamp(result, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Rotation histograms

RotationHistogram rotation_histogram(std::span<const double> angles, int bins, double eps) {
  if (angles.empty()) {
    throw std::invalid_argument("rotation_histogram: empty angle list");
  }
  if (bins < 2) {
    throw std::invalid_argument("rotation_histogram: need at least 2 bins");
  }
  constexpr double pi = std::numbers::pi;
  RotationHistogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = pi * i / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double a : angles) {
    if (!std::isfinite(a) || a < -1e-9 || a > pi + 1e-9) {
      throw std::invalid_argument("rotation_histogram: angle outside [0, pi]");
    }
    const int b = std::clamp(static_cast<int>(std::clamp(a, 0.0, pi) / pi * bins), 0, bins - 1);
    counts[b] += 1.0;
  }
  const double n = static_cast<double>(angles.size());
  double total = 0.0;
  for (double& c : counts) {
    c = c / n + eps;
    total += c;
  }
  for (double& c : counts) c /= total;
  h.probabilities = std::move(counts);
  return h;
}

double kl_divergence(const RotationHistogram& p, const RotationHistogram& q) {
  if (p.edges != q.edges || p.probabilities.size() != q.probabilities.size()) {
    throw std::invalid_argument("kl_divergence: histograms have different bins");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    const double pi_ = p.probabilities[i];
    if (pi_ > 0.0) kl += pi_ * std::log(pi_ / q.probabilities[i]);
  }
  return std::max(kl, 0.0);
}

// ---------------------------------------------------------------------------
// Semantic descriptor

namespace {

void normalize_l2(std::span<double> v) {
  const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

}  // namespace

SemanticDescriptor semantic_descriptor(const SliceImage& image) {
  if (image.width < 32 || image.height < 32) {
    throw std::invalid_argument("semantic_descriptor: image must be at least 32x32");
  }
  constexpr int kIntensityBins = 64;
  constexpr int kOrientations = 8;
  constexpr int kCellCols = 4;
  constexpr int kCellRows = 2;
  static_assert(kIntensityBins + kOrientations * kCellCols * kCellRows == kDescriptorSize);

  std::vector<double> d(kDescriptorSize, 0.0);
  std::span<double> intensity(d.data(), kIntensityBins);
  std::span<double> gradient(d.data() + kIntensityBins, kDescriptorSize - kIntensityBins);

  for (float v : image.pixels) {
    if (v > kDefaultForegroundThreshold) {
      const int b = std::min(static_cast<int>(v * kIntensityBins), kIntensityBins - 1);
      intensity[b] += 1.0;
    }
  }

  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int v = 1; v + 1 < image.height; ++v) {
    for (int u = 1; u + 1 < image.width; ++u) {
      const double gx = 0.5 * (image.at(u + 1, v) - image.at(u - 1, v));
      const double gy = 0.5 * (image.at(u, v + 1) - image.at(u, v - 1));
      const double mag = std::hypot(gx, gy);
      if (mag <= 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += two_pi;
      const int o = std::min(static_cast<int>(theta / two_pi * kOrientations), kOrientations - 1);
      const int cx = std::min(u * kCellCols / image.width, kCellCols - 1);
      const int cy = std::min(v * kCellRows / image.height, kCellRows - 1);
      gradient[(cy * kCellCols + cx) * kOrientations + o] += mag;
    }
  }

  normalize_l2(intensity);
  normalize_l2(gradient);
  normalize_l2(d);
  if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) {
    std::fill(d.begin(), d.end(), 1.0 / std::sqrt(static_cast<double>(kDescriptorSize)));
  }
  return {std::move(d)};
}

double semantic_similarity(const SemanticDescriptor& a, const SemanticDescriptor& b) {
  if (a.values.size() != b.values.size()) {
    throw std::invalid_argument("semantic_similarity: descriptor length mismatch");
  }
  const double dot = std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
  return std::clamp(dot, kSemanticFloor, 1.0);
}

nlohmann::json to_json(const MetricRecord& m) {
  return {{"kl", m.kl}, {"dice", m.dice}, {"ncc", m.ncc}, {"ms_ssim", m.ms_ssim}};
}

}  // namespace sonoguide
