#pragma once

// Synthetic scan simulation, the random-plane baseline and the benchmark
// that scores predicted poses with motion-level (KL over rotation-to-SP
// histograms) and image-level (Dice, NCC, MS-SSIM) metrics.

#include "sonoguide/alignment.hpp"
#include "sonoguide/registration.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace sonoguide {

struct TrajectoryConfig {
  int steps = 60;                 // 10 s at 6 Hz
  double start_offset_deg = 40.0;
  double noise_deg = 1.0;         // per-frame orientation jitter (sd)
  double start_shift = 0.08;      // translation offset of the first frame
  double speckle = 0.0;           // sd of multiplicative frame noise, 0 renders clean slices
  std::uint64_t rng_seed = 0;
  int frame_size = kDefaultSliceSize;
};

struct SimulatedScan {
  ScanSequence scan;
  std::vector<Pose> truth;
};

/// Slerp from a seeded start orientation (start_offset_deg away from
/// sp.q_pos) to the SP over cfg.steps frames with per-frame jitter; the last
/// frame is exactly the SP. Ground-truth orientations go to probe_q.
SimulatedScan simulate_scan(const Volume& volume, const StandardPlaneDef& sp,
                            const TrajectoryConfig& cfg);

/// Uniform random orientations on SO(3) and translations in [-0.3, 0.3]^3,
/// one per frame.
std::vector<Pose> random_plane_baseline(const ScanSequence& scan, std::uint64_t seed);

/// Uniformly distributed rotation (Shoemake).
template <typename Rng>
Quaternion random_rotation(Rng& rng);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};
MeanSd mean_sd(std::span<const double> values);

struct EvaluationReport {
  double kl = 0.0;
  double dice_pct = 0.0;
  MeanSd ncc;
  MeanSd ms_ssim;
  std::vector<double> dice_trace;
  std::vector<double> ncc_trace;
  std::vector<double> ms_ssim_trace;
  std::vector<double> truth_angles;      // rotation toward the reached SP (probe)
  std::vector<double> predicted_angles;  // rotation toward the atlas SP (prediction)
};

/// Throws std::invalid_argument when the scan has no probe_q or the pose
/// count differs from the frame count.
EvaluationReport evaluate_scan(const ScanSequence& scan, std::span<const Pose> predicted,
                               const StandardPlaneDef& sp, const Volume& volume);

nlohmann::json to_json(const EvaluationReport& r, bool with_traces = false);

struct BenchmarkConfig {
  int n_scans = 20;
  std::uint64_t seed = 1;
  TrajectoryConfig trajectory{.speckle = 0.4};
  RegistrationConfig registration;
  ContrastiveConfig contrastive;
  OptimizerConfig optimizer;
};

struct BenchmarkRow {
  std::string name;
  double kl = 0.0;
  double dice_pct = 0.0;
  MeanSd ncc;
  MeanSd ms_ssim;
  double rotation_error_deg = 0.0;  // mean over frames and scans
  std::vector<double> per_scan_kl;
};

struct BenchmarkTable {
  SpId sp_id = SpId::TVP;
  std::vector<BenchmarkRow> rows;  // random plane, registration only, registration + alignment
};

inline constexpr const char* kRowRandom = "random plane";
inline constexpr const char* kRowRegistration = "registration";
inline constexpr const char* kRowAligned = "registration + alignment";

/// One table per SP. Throws std::invalid_argument when n_scans < 1.
std::vector<BenchmarkTable> run_benchmark(const Volume& volume,
                                          const std::vector<StandardPlaneDef>& sp_list,
                                          const BenchmarkConfig& cfg);

nlohmann::json to_json(const BenchmarkTable& t);
std::string format_table(const std::vector<BenchmarkTable>& tables);

}  // namespace sonoguide

#include "sonoguide/detail/random_rotation.ipp"
