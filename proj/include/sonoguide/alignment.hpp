#pragma once

// Scan-level alignment objectives: the in-plane geodesic loss that ties the
// SP frame to its atlas prior, the semantic-aware contrastive loss over
// quaternion triplets for the remaining frames, and a descent routine that
// refines per-frame orientations against their sum.

#include "sonoguide/geometry.hpp"
#include "sonoguide/similarity.hpp"
#include "sonoguide/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace sonoguide {

inline constexpr double kScanFrameRateHz = 6.0;

struct ScanSequence {
  std::vector<SliceImage> frames;
  std::size_t sp_index = 0;
  SpId sp_id = SpId::TVP;
  std::optional<std::vector<Quaternion>> probe_q;
  double frame_rate_hz = kScanFrameRateHz;

  std::size_t size() const { return frames.size(); }
  /// Throws std::invalid_argument if sp_index or probe_q are inconsistent.
  void validate() const;
};

/// Directory with frame_NNN.raw (+ .json sidecars) and manifest.json
/// {sp_index, sp_id, probe_q, frame_rate_hz, frames}.
void save_scan(const ScanSequence& scan, const std::filesystem::path& dir);
ScanSequence load_scan(const std::filesystem::path& dir);
nlohmann::json scan_manifest(const ScanSequence& scan);

struct ContrastiveConfig {
  int num_negatives = 5;
  double temperature = 0.8;
  std::uint64_t rng_seed = 0;
};

/// min over the SP's two directions of geodesic_loss(q_dir, q_hat).
/// Translation does not enter.
double in_plane_loss(const Quaternion& q_hat, const StandardPlaneDef& sp);

/// -log( exp(cos(g(a, p)) / tau) / sum_n w_n exp(cos(g(a, n_n)) / tau) ),
/// g = geodesic_loss (= alpha * d_G).
double contrastive_loss(const Quaternion& anchor, const Quaternion& positive,
                        std::span<const Quaternion> negatives, std::span<const double> weights,
                        double temperature);

/// Successor frame, or the predecessor for the last frame.
std::size_t positive_index(std::size_t anchor, std::size_t num_frames);

/// N distinct frames drawn with a generator seeded from (cfg.rng_seed,
/// anchor). The anchor and positive are never drawn; `excluded` (the SP
/// frame) is skipped as long as enough other frames remain. Throws
/// std::invalid_argument when num_frames < N + 2.
std::vector<std::size_t> draw_negatives(std::size_t anchor, std::size_t positive,
                                        std::size_t num_frames,
                                        std::optional<std::size_t> excluded,
                                        const ContrastiveConfig& cfg);

/// Contrastive loss of frame `anchor_idx` with its consecutive positive and
/// seeded same-scan negatives, weighted by descriptor similarity.
double out_of_plane_loss(std::size_t anchor_idx, std::span<const Quaternion> poses,
                         std::span<const SemanticDescriptor> descriptors,
                         const ContrastiveConfig& cfg,
                         std::optional<std::size_t> excluded = std::nullopt);

/// Precomputed positives, negatives and semantic weights for one scan, so
/// the objective can be evaluated repeatedly for candidate poses.
class AlignmentProblem {
 public:
  AlignmentProblem(const ScanSequence& scan, const StandardPlaneDef& sp,
                   const ContrastiveConfig& cfg);
  AlignmentProblem(std::vector<SemanticDescriptor> descriptors, std::size_t sp_index,
                   const StandardPlaneDef& sp, const ContrastiveConfig& cfg);

  struct Term {
    std::size_t anchor;
    std::size_t positive;
    std::vector<std::size_t> negatives;
    std::vector<double> weights;
  };

  std::size_t num_frames() const { return num_frames_; }
  std::size_t sp_index() const { return sp_index_; }
  const std::vector<Term>& terms() const { return terms_; }

  double objective(std::span<const Quaternion> q) const;
  double in_plane(std::span<const Quaternion> q) const;
  double term_value(std::size_t t, std::span<const Quaternion> q) const;
  /// Indices of the terms a frame takes part in.
  const std::vector<std::size_t>& terms_of(std::size_t frame) const { return involvement_[frame]; }

 private:
  void build(std::vector<SemanticDescriptor> descriptors);

  std::size_t num_frames_ = 0;
  std::size_t sp_index_ = 0;
  StandardPlaneDef sp_;
  ContrastiveConfig cfg_;
  std::vector<Term> terms_;
  std::vector<std::vector<std::size_t>> involvement_;
};

/// In-plane loss at the SP frame plus the mean contrastive loss over every
/// other frame. Scans shorter than N + 2 frames carry no contrastive terms.
double scan_objective(const ScanSequence& scan, std::span<const Pose> poses,
                      const StandardPlaneDef& sp, const ContrastiveConfig& cfg);

struct OptimizerConfig {
  double learning_rate = 0.05;    // radians moved by the most-affected frame per step
  int max_iterations = 200;
  double fd_step = 1e-3;          // radians
  int patience = 10;
  double min_relative_improvement = 1e-6;
  double proximal_weight = 1.0;   // keeps frames near their initial orientation
};

struct RefinementTrace {
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
};

/// Finite-difference descent on per-frame orientations (translations are
/// held). Steps that do not lower the objective are rejected, so the scan
/// objective never increases.
std::vector<Pose> refine_scan_poses(const ScanSequence& scan, std::span<const Pose> init_poses,
                                    const StandardPlaneDef& sp, const ContrastiveConfig& cfg,
                                    const OptimizerConfig& opt = {},
                                    RefinementTrace* trace = nullptr);
std::vector<Pose> refine_scan_poses(const AlignmentProblem& problem,
                                    std::span<const Pose> init_poses,
                                    const OptimizerConfig& opt = {},
                                    RefinementTrace* trace = nullptr);

}  // namespace sonoguide
