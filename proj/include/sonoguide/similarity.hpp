#pragma once

// Losses and image/motion metrics: the atlas loss (soft dice + pose
// regression), NCC, MS-SSIM, rotation-angle histograms with KL divergence,
// and the deterministic semantic descriptor used as the anatomy encoder.

#include "sonoguide/geometry.hpp"
#include "sonoguide/volume.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace sonoguide {

inline constexpr double kDiceEps = 1e-8;

/// 1 - (2 sum(s*y) + eps) / (sum(s) + sum(y) + eps); s is a soft foreground,
/// y a binary mask. Throws std::invalid_argument on shape mismatch.
double dice_loss(std::span<const float> soft, const Mask& mask);
double dice_loss(const SliceImage& slice, const Mask& mask);

/// Dice coefficient between two binary masks, in [0, 1].
double dice_coefficient(const Mask& a, const Mask& b);

/// Soft foreground map min(1, s / threshold): 1 on tissue, ramps to 0 on the
/// background.
std::vector<float> soft_foreground(const SliceImage& slice,
                                   double threshold = kDefaultForegroundThreshold);

/// L2 norm of the 7-vector (q - q_hat', delta - delta_hat) where q_hat' is
/// q_hat sign-aligned to q.
double pose_regression_loss(const Pose& theta, const Pose& theta_hat);

struct AtlasLoss {
  double dice = 0.0;
  double regression = 0.0;
  double total() const { return dice + regression; }
};

/// Dice term on the slice sampled at theta_hat against the mask of the atlas
/// slice at theta, plus the pose regression term.
AtlasLoss atlas_loss(const Volume& volume, const Mask& atlas_slice_mask, const Pose& theta,
                     const Pose& theta_hat, int out_w = kDefaultSliceSize,
                     int out_h = kDefaultSliceSize);

struct NccResult {
  double value = 0.0;
  bool degenerate = false;  // either input had variance < 1e-12
};

NccResult ncc(std::span<const float> a, std::span<const float> b);
inline NccResult ncc(const SliceImage& a, const SliceImage& b) { return ncc(a.pixels, b.pixels); }

struct MsSsimOptions {
  int scales = 3;
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Multi-scale SSIM with dyadic 2x2 average-pooling between scales.
/// Throws std::invalid_argument if min(width, height) < 32 for 3 scales
/// (16 * 2^(scales - 2) in general).
double ms_ssim(const SliceImage& a, const SliceImage& b, const MsSsimOptions& opt = {});

struct RotationHistogram {
  std::vector<double> edges;  // bins + 1 edges over [0, pi]
  std::vector<double> probabilities;

  std::size_t bins() const { return probabilities.size(); }
};

inline constexpr int kRotationBins = 32;
inline constexpr double kHistogramEps = 1e-6;

/// Normalised counts, plus eps per bin, renormalised. Throws on an empty
/// angle list or bins < 2.
RotationHistogram rotation_histogram(std::span<const double> angles, int bins = kRotationBins,
                                     double eps = kHistogramEps);

/// sum p_i ln(p_i / q_i). Throws std::invalid_argument when bin edges differ.
double kl_divergence(const RotationHistogram& p, const RotationHistogram& q);

inline constexpr int kDescriptorSize = 128;

struct SemanticDescriptor {
  std::vector<double> values;  // kDescriptorSize non-negative entries, unit L2 norm
};

/// 64-bin foreground intensity histogram followed by 8 gradient orientations
/// x 8 spatial cells (4 columns x 2 rows), each half L2-normalised, then the
/// whole vector normalised. Throws for images smaller than 32x32.
SemanticDescriptor semantic_descriptor(const SliceImage& image);

inline constexpr double kSemanticFloor = 1e-3;

/// max(<d1, d2>, 1e-3).
double semantic_similarity(const SemanticDescriptor& a, const SemanticDescriptor& b);

struct MetricRecord {
  double kl = 0.0;
  double dice = 0.0;
  double ncc = 0.0;
  double ms_ssim = 0.0;
};
nlohmann::json to_json(const MetricRecord& m);

}  // namespace sonoguide
