#pragma once

// Slice-to-volume pose estimation by multi-start optimisation: exhaustive
// NCC scoring of a coarse pose grid on a downsampled image, followed by
// simplex refinement of the best candidates at increasing resolution.

#include "sonoguide/alignment.hpp"
#include "sonoguide/geometry.hpp"
#include "sonoguide/volume.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <vector>

namespace sonoguide {

struct RegistrationConfig {
  int orientation_samples = 256;
  int translation_steps = 5;          // per axis
  double translation_range = 0.3;     // grid spans [-range, range]^3
  int max_refine_evaluations = 500;   // per refined candidate
  int keep_top_k = 8;
  int screen_candidates = 96;         // coarse starts given a short coarse-level simplex run
  int screen_evaluations = 80;
  double extent = 1.0;                // plane half-width of the query image

  // pyramid: pixels per side used for coarse scoring and the two refinement
  // stages (the nearest achievable box-downsampling of the input)
  int coarse_size = 16;
  int refine_size = 40;
  int polish_size = 80;

  // temporal search around a prior pose (scan registration)
  int local_orientation_samples = 48;
  double local_radius_deg = 20.0;
  int local_translation_steps = 3;
  double local_translation_range = 0.15;

  std::uint64_t seed = 0;  // rotates the orientation grid
};

struct CandidateScore {
  Pose pose;
  double score = 0.0;
};

struct RegistrationResult {
  Pose pose;
  double score = 0.0;
  bool degenerate = false;
  std::vector<CandidateScore> candidates;  // top-k starts, scored at full resolution
};

nlohmann::json to_json(const RegistrationResult& r);
RegistrationConfig registration_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RegistrationConfig& c);

/// About `count` near-uniform unit quaternions on the w >= 0 hemisphere (super-Fibonacci
/// spiral), optionally rotated by a seeded global offset.
std::vector<Quaternion> coarse_orientations(int count, std::uint64_t seed = 0);

/// Multi-start registration over the full orientation space.
RegistrationResult register_slice(const Volume& volume, const SliceImage& image,
                                  const RegistrationConfig& cfg = {});

/// Registration restricted to a neighbourhood of `prior`: orientations within
/// cfg.local_radius_deg and translations within cfg.local_translation_range.
RegistrationResult register_slice_near(const Volume& volume, const SliceImage& image,
                                       const Pose& prior, const RegistrationConfig& cfg = {});

/// Frame 0 from scratch, later frames from their predecessor's pose, then
/// scan-level alignment refinement of the orientations. With
/// `refine = false` only the per-frame registration runs.
std::vector<RegistrationResult> register_scan(const Volume& volume, const ScanSequence& scan,
                                              const StandardPlaneDef& sp,
                                              const RegistrationConfig& reg_cfg = {},
                                              const ContrastiveConfig& align_cfg = {},
                                              const OptimizerConfig& opt = {},
                                              bool refine = true);

/// Full-resolution NCC of image against the slice at pose.
double score_pose(const Volume& volume, const SliceImage& image, const Pose& pose,
                  double extent = 1.0);

}  // namespace sonoguide
