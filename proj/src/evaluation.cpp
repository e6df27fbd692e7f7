#include "sonoguide/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sonoguide {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Vec3 v;
  do {
    v = Vec3(n01(rng), n01(rng), n01(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

// Rotation of q toward target, as an angle in [0, pi]. Both the probe and the
// prediction go through this so identical inputs give identical angles.
double angle_towards(const Quaternion& q, const Quaternion& target) {
  return to_axis_angle(quat_conjugate(q) * target).angle;
}

}  // namespace

SimulatedScan simulate_scan(const Volume& volume, const StandardPlaneDef& sp,
                            const TrajectoryConfig& cfg) {
  if (cfg.steps < 1) {
    throw std::invalid_argument("simulate_scan: steps must be >= 1");
  }
  if (!(cfg.start_offset_deg > 0.0) || cfg.start_offset_deg > 90.0) {
    throw std::invalid_argument("simulate_scan: start offset must lie in (0, 90] degrees");
  }
  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> n01;
  // separate stream so the trajectory does not depend on the speckle setting
  std::mt19937_64 speckle_rng(cfg.rng_seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> speckle_n01;

  const Quaternion q_start =
      (sp.q_pos * quat_exp(random_unit(rng) * cfg.start_offset_deg * kDeg)).normalized();
  const Vec3 delta_start = sp.delta_sp + cfg.start_shift * random_unit(rng);
  const double noise = cfg.noise_deg * kDeg;

  SimulatedScan out;
  out.scan.sp_id = sp.id;
  out.scan.sp_index = static_cast<std::size_t>(cfg.steps - 1);
  out.scan.frame_rate_hz = kScanFrameRateHz;
  std::vector<Quaternion> probe;
  for (int i = 0; i < cfg.steps; ++i) {
    Pose pose;
    if (i + 1 == cfg.steps) {
      pose = sp.pose();
    } else {
      const double t = static_cast<double>(i) / (cfg.steps - 1);
      pose.q = slerp(q_start, sp.q_pos, t);
      pose.delta = delta_start + t * (sp.delta_sp - delta_start);
      if (noise > 0.0) {
        const Vec3 jitter(n01(rng), n01(rng), n01(rng));
        pose.q = (pose.q * quat_exp(jitter * noise)).normalized();
      }
    }
    SliceImage frame = sample_slice(volume, pose, cfg.frame_size, cfg.frame_size);
    if (cfg.speckle > 0.0) {
      for (float& v : frame.pixels) {
        v = static_cast<float>(std::clamp(v * (1.0 + cfg.speckle * speckle_n01(speckle_rng)), 0.0, 1.0));
      }
    }
    out.scan.frames.push_back(std::move(frame));
    out.truth.push_back(pose);
    probe.push_back(pose.q);
  }
  out.scan.probe_q = std::move(probe);
  return out;
}

std::vector<Pose> random_plane_baseline(const ScanSequence& scan, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-0.3, 0.3);
  std::vector<Pose> poses;
  poses.reserve(scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    Pose p;
    p.q = random_rotation(rng);
    p.delta = Vec3(shift(rng), shift(rng), shift(rng));
    poses.push_back(p);
  }
  return poses;
}

MeanSd mean_sd(std::span<const double> values) {
  if (values.empty()) return {};
  double m = 0.0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / static_cast<double>(values.size()))};
}

EvaluationReport evaluate_scan(const ScanSequence& scan, std::span<const Pose> predicted,
                               const StandardPlaneDef& sp, const Volume& volume) {
  scan.validate();
  if (!scan.probe_q) {
    throw std::invalid_argument("evaluate_scan: scan has no probe orientations");
  }
  if (predicted.size() != scan.size()) {
    throw std::invalid_argument("evaluate_scan: one predicted pose per frame required");
  }
  const auto& probe = *scan.probe_q;
  const Quaternion reached_sp = probe[scan.sp_index];

  EvaluationReport r;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    r.truth_angles.push_back(angle_towards(probe[i], reached_sp));
    const GuidanceInstruction g = transform_to_sp(predicted[i], sp, SpDirection::Auto);
    const Quaternion& target = g.chosen_direction == SpDirection::Neg ? sp.q_neg : sp.q_pos;
    r.predicted_angles.push_back(angle_towards(predicted[i].q, target));

    const SliceImage& frame = scan.frames[i];
    const SliceImage retrieved = sample_slice(volume, predicted[i], frame.width, frame.height);
    r.dice_trace.push_back(100.0 * dice_coefficient(binarize(frame), binarize(retrieved)));
    r.ncc_trace.push_back(ncc(frame, retrieved).value);
    r.ms_ssim_trace.push_back(ms_ssim(frame, retrieved));
  }
  r.kl = kl_divergence(rotation_histogram(r.truth_angles), rotation_histogram(r.predicted_angles));
  r.dice_pct = mean_sd(r.dice_trace).mean;
  r.ncc = mean_sd(r.ncc_trace);
  r.ms_ssim = mean_sd(r.ms_ssim_trace);
  return r;
}

json to_json(const EvaluationReport& r, bool with_traces) {
  json j = {{"kl", r.kl},
            {"dice_pct", r.dice_pct},
            {"ncc_mean", r.ncc.mean},
            {"ncc_sd", r.ncc.sd},
            {"ms_ssim_mean", r.ms_ssim.mean},
            {"ms_ssim_sd", r.ms_ssim.sd}};
  if (with_traces) {
    j["dice_trace"] = r.dice_trace;
    j["ncc_trace"] = r.ncc_trace;
    j["ms_ssim_trace"] = r.ms_ssim_trace;
    j["truth_angles"] = r.truth_angles;
    j["predicted_angles"] = r.predicted_angles;
  }
  return j;
}

namespace {

struct RowAccumulator {
  std::string name;
  std::vector<double> kl, dice, ncc, ms_ssim, rot_err;

  void add(const EvaluationReport& r, const std::vector<Pose>& truth,
           std::span<const Pose> predicted) {
    kl.push_back(r.kl);
    dice.push_back(r.dice_pct);
    ncc.insert(ncc.end(), r.ncc_trace.begin(), r.ncc_trace.end());
    ms_ssim.insert(ms_ssim.end(), r.ms_ssim_trace.begin(), r.ms_ssim_trace.end());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      rot_err.push_back(rotation_angle_3d(truth[i].q, predicted[i].q) / kDeg);
    }
  }

  BenchmarkRow finish() const {
    BenchmarkRow row;
    row.name = name;
    row.kl = mean_sd(kl).mean;
    row.dice_pct = mean_sd(dice).mean;
    row.ncc = mean_sd(ncc);
    row.ms_ssim = mean_sd(ms_ssim);
    row.rotation_error_deg = mean_sd(rot_err).mean;
    row.per_scan_kl = kl;
    return row;
  }
};

}  // namespace

std::vector<BenchmarkTable> run_benchmark(const Volume& volume,
                                          const std::vector<StandardPlaneDef>& sp_list,
                                          const BenchmarkConfig& cfg) {
  if (cfg.n_scans < 1) {
    throw std::invalid_argument("run_benchmark: n_scans must be >= 1");
  }
  if (sp_list.empty()) {
    throw std::invalid_argument("run_benchmark: no standard planes given");
  }
  std::vector<BenchmarkTable> tables;
  for (std::size_t s = 0; s < sp_list.size(); ++s) {
    const StandardPlaneDef& sp = sp_list[s];
    RowAccumulator random{kRowRandom, {}, {}, {}, {}, {}};
    RowAccumulator registration{kRowRegistration, {}, {}, {}, {}, {}};
    RowAccumulator aligned{kRowAligned, {}, {}, {}, {}, {}};
    for (int k = 0; k < cfg.n_scans; ++k) {
      const std::uint64_t scan_seed = cfg.seed * 1000003ULL + s * 1009ULL + static_cast<std::uint64_t>(k);
      TrajectoryConfig traj = cfg.trajectory;
      traj.rng_seed = scan_seed;
      const SimulatedScan sim = simulate_scan(volume, sp, traj);

      const auto rand_poses = random_plane_baseline(sim.scan, scan_seed ^ 0x9e3779b97f4a7c15ULL);
      random.add(evaluate_scan(sim.scan, rand_poses, sp, volume), sim.truth, rand_poses);

      const auto results = register_scan(volume, sim.scan, sp, cfg.registration,
                                         cfg.contrastive, cfg.optimizer, false);
      std::vector<Pose> reg_poses;
      for (const auto& r : results) reg_poses.push_back(r.pose);
      registration.add(evaluate_scan(sim.scan, reg_poses, sp, volume), sim.truth, reg_poses);

      ContrastiveConfig cc = cfg.contrastive;
      cc.rng_seed = cfg.contrastive.rng_seed + scan_seed;
      const AlignmentProblem problem(sim.scan, sp, cc);
      const auto aligned_poses = refine_scan_poses(problem, reg_poses, cfg.optimizer);
      aligned.add(evaluate_scan(sim.scan, aligned_poses, sp, volume), sim.truth, aligned_poses);
    }
    tables.push_back({sp.id, {random.finish(), registration.finish(), aligned.finish()}});
  }
  return tables;
}

json to_json(const BenchmarkTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"name", r.name},
                    {"kl", r.kl},
                    {"dice_pct", r.dice_pct},
                    {"ncc_mean", r.ncc.mean},
                    {"ncc_sd", r.ncc.sd},
                    {"ms_ssim_mean", r.ms_ssim.mean},
                    {"ms_ssim_sd", r.ms_ssim.sd},
                    {"rotation_error_deg", r.rotation_error_deg},
                    {"per_scan_kl", r.per_scan_kl}});
  }
  return {{"sp_id", std::string(to_string(t.sp_id))}, {"rows", rows}};
}

std::string format_table(const std::vector<BenchmarkTable>& tables) {
  std::ostringstream os;
  char line[256];
  for (const auto& t : tables) {
    os << to_string(t.sp_id) << '\n';
    std::snprintf(line, sizeof(line), "  %-26s | %8s | %8s | %-13s | %-13s | %9s\n",
                  "method", "KL", "Dice(%)", "NCC", "MS-SSIM", "rot.err");
    os << line;
    os << "  " << std::string(94, '-') << '\n';
    for (const auto& r : t.rows) {
      std::snprintf(line, sizeof(line),
                    "  %-26s | %8.3f | %8.2f | %.3f+-%.3f | %.3f+-%.3f | %8.2f\n", r.name.c_str(),
                    r.kl, r.dice_pct, r.ncc.mean, r.ncc.sd, r.ms_ssim.mean, r.ms_ssim.sd,
                    r.rotation_error_deg);
      os << line;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace sonoguide
