#include "sonoguide/registration.hpp"

#include "nelder_mead.hpp"
#include "sonoguide/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace sonoguide {

using nlohmann::json;

std::vector<Quaternion> coarse_orientations(int count, std::uint64_t seed) {
  if (count < 1) {
    throw std::invalid_argument("coarse_orientations: count must be positive");
  }
  constexpr double phi = std::numbers::sqrt2;
  constexpr double psi = 1.533751168755204288118041;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Quaternion offset = Quaternion::identity();
  if (seed != 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    offset = Quaternion{n01(rng), n01(rng), n01(rng), n01(rng)}.normalized();
  }
  // a full-sphere spiral of 2 * count points, keeping the w >= 0 half
  const int total = 2 * count;
  std::vector<Quaternion> out;
  out.reserve(static_cast<std::size_t>(count) + 8);
  for (int i = 0; i < total; ++i) {
    const double s = i + 0.5;
    const double r = std::sqrt(s / total);
    const double big_r = std::sqrt(1.0 - s / total);
    const double alpha = two_pi * s / phi;
    const double beta = two_pi * s / psi;
    Quaternion q{r * std::sin(alpha), r * std::cos(alpha), big_r * std::sin(beta),
                 big_r * std::cos(beta)};
    if (q.w < 0.0) continue;
    q = offset * q;
    out.push_back(q.w < 0.0 ? -q : q);
  }
  return out;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// One pyramid level: the query image box-downsampled together with the plane
// layout whose pixel centres match the downsampled pixels.
class Level {
 public:
  Level(const SliceImage& image, double extent, int target_size) {
    const int factor = std::max(1, std::min(image.width, image.height) / std::max(2, target_size));
    const SliceImage small = downsample(image, factor);
    layout_ = PlaneLayout::centered(image.width, image.height, extent).downsampled(factor);
    const double n = static_cast<double>(small.pixels.size());
    double mean = 0.0;
    for (float v : small.pixels) mean += v;
    mean /= n;
    centered_.resize(small.pixels.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < small.pixels.size(); ++i) {
      centered_[i] = small.pixels[i] - mean;
      ss += centered_[i] * centered_[i];
    }
    norm_ = std::sqrt(ss);
    buffer_.resize(small.pixels.size());
  }

  bool degenerate() const { return norm_ * norm_ / static_cast<double>(centered_.size()) < 1e-12; }

  double score(const Volume& volume, const Pose& pose) const {
    sample_slice_into(volume, pose, layout_, buffer_);
    const double n = static_cast<double>(buffer_.size());
    double mean = 0.0;
    for (float v : buffer_) mean += v;
    mean /= n;
    double cross = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < buffer_.size(); ++i) {
      const double b = buffer_[i] - mean;
      cross += centered_[i] * b;
      ss += b * b;
    }
    if (ss / n < 1e-12 || degenerate()) {
      return 0.0;
    }
    return std::clamp(cross / (norm_ * std::sqrt(ss)), -1.0, 1.0);
  }

 private:
  PlaneLayout layout_;
  std::vector<double> centered_;
  double norm_ = 0.0;
  mutable std::vector<float> buffer_;
};

Pose chart(const Pose& base, const std::array<double, 6>& x) {
  return {(base.q * quat_exp(Vec3(x[0], x[1], x[2]))).normalized(),
          base.delta + Vec3(x[3], x[4], x[5])};
}

CandidateScore refine(const Volume& volume, const Level& level, const Pose& start,
                      double rot_step, double trans_step, int budget) {
  auto cost = [&](const std::array<double, 6>& x) { return -level.score(volume, chart(start, x)); };
  const auto res = detail::nelder_mead<6>(
      cost, {0, 0, 0, 0, 0, 0},
      {rot_step, rot_step, rot_step, trans_step, trans_step, trans_step}, budget);
  return {chart(start, res.x), -res.value};
}

std::vector<double> translation_axis(int steps, double range) {
  std::vector<double> t;
  if (steps <= 1) {
    t.push_back(0.0);
    return t;
  }
  for (int i = 0; i < steps; ++i) t.push_back(-range + 2.0 * range * i / (steps - 1));
  return t;
}

RegistrationResult search(const Volume& volume, const SliceImage& image,
                          const std::vector<Quaternion>& orientations,
                          const std::vector<Vec3>& centers, const std::vector<double>& offsets,
                          const RegistrationConfig& cfg) {
  RegistrationResult result;
  const Level coarse(image, cfg.extent, cfg.coarse_size);
  if (coarse.degenerate() || ncc(image.pixels, image.pixels).degenerate) {
    result.degenerate = true;
    result.score = 0.0;
    return result;
  }

  // best translation per orientation, then the top-k orientations
  std::vector<CandidateScore> per_orientation;
  per_orientation.reserve(orientations.size());
  for (const auto& q : orientations) {
    CandidateScore best{{q, Vec3::Zero()}, -2.0};
    for (const auto& c : centers) {
      for (double tz : offsets) {
        for (double ty : offsets) {
          for (double tx : offsets) {
            const Pose p{q, c + Vec3(tx, ty, tz)};
            const double s = coarse.score(volume, p);
            if (s > best.score) best = {p, s};
          }
        }
      }
    }
    per_orientation.push_back(best);
  }
  auto by_score = [](const CandidateScore& a, const CandidateScore& b) { return a.score > b.score; };
  // short simplex runs on the coarse level decide which starts deserve the
  // expensive refinement
  const auto screened = std::min<std::size_t>(
      static_cast<std::size_t>(std::max(cfg.keep_top_k, cfg.screen_candidates)),
      per_orientation.size());
  std::partial_sort(per_orientation.begin(), per_orientation.begin() + static_cast<long>(screened),
                    per_orientation.end(), by_score);
  per_orientation.resize(screened);
  std::vector<CandidateScore> screened_poses;
  for (const auto& c : per_orientation) {
    screened_poses.push_back(
        cfg.screen_evaluations > 0
            ? refine(volume, coarse, c.pose, 10.0 * kDeg, 0.06, cfg.screen_evaluations)
            : c);
  }
  std::vector<std::size_t> order(screened);
  for (std::size_t i = 0; i < screened; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return screened_poses[a].score > screened_poses[b].score;
  });
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.keep_top_k), screened);
  std::vector<CandidateScore> starts;
  std::vector<CandidateScore> top;
  for (std::size_t i = 0; i < k; ++i) {
    starts.push_back(per_orientation[order[i]]);
    top.push_back(screened_poses[order[i]]);
  }
  per_orientation = std::move(starts);

  const int refine_budget = std::max(20, cfg.max_refine_evaluations * 3 / 5);
  const int polish_budget = std::max(20, cfg.max_refine_evaluations - refine_budget);
  const Level mid(image, cfg.extent, cfg.refine_size);
  const Level fine(image, cfg.extent, cfg.polish_size);

  std::vector<CandidateScore> refined;
  for (const auto& c : top) {
    refined.push_back(refine(volume, mid, c.pose, 6.0 * kDeg, 0.04, refine_budget));
  }
  std::stable_sort(refined.begin(), refined.end(),
                   [](const CandidateScore& a, const CandidateScore& b) { return a.score > b.score; });
  const CandidateScore polished =
      refine(volume, fine, refined.front().pose, 2.0 * kDeg, 0.015, polish_budget);

  // final choice by full-resolution score, never worse than a starting point
  result.score = -2.0;
  auto consider = [&](const Pose& p) {
    const double s = score_pose(volume, image, p, cfg.extent);
    if (s > result.score) {
      result.score = s;
      result.pose = p;
    }
    return s;
  };
  for (const auto& c : per_orientation) {
    result.candidates.push_back({c.pose, consider(c.pose)});
  }
  consider(refined.front().pose);
  consider(polished.pose);
  result.pose.q = result.pose.q.w < 0.0 ? -result.pose.q : result.pose.q;
  return result;
}

}  // namespace

double score_pose(const Volume& volume, const SliceImage& image, const Pose& pose,
                  double extent) {
  const SliceImage s =
      sample_slice(volume, pose, PlaneLayout::centered(image.width, image.height, extent));
  return ncc(image.pixels, s.pixels).value;
}

namespace {

void validate_inputs(const SliceImage& image, const RegistrationConfig& cfg) {
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw std::invalid_argument("registration image is empty or malformed");
  }
  if (cfg.orientation_samples < 1 || cfg.translation_steps < 1 || cfg.keep_top_k < 1 ||
      cfg.max_refine_evaluations < 1 || cfg.local_orientation_samples < 1 ||
      cfg.local_translation_steps < 1 || cfg.coarse_size < 1 || cfg.refine_size < 1 ||
      cfg.polish_size < 1) {
    throw std::invalid_argument("registration config counts must be positive");
  }
  if (cfg.translation_range < 0.0 || cfg.translation_range > 1.0 ||
      cfg.local_translation_range < 0.0 || cfg.local_translation_range > 1.0) {
    throw std::invalid_argument("registration translation range must lie inside [-1, 1]");
  }
}

}  // namespace

RegistrationResult register_slice(const Volume& volume, const SliceImage& image,
                                  const RegistrationConfig& cfg) {
  validate_inputs(image, cfg);
  return search(volume, image, coarse_orientations(cfg.orientation_samples, cfg.seed),
                {Vec3::Zero()}, translation_axis(cfg.translation_steps, cfg.translation_range),
                cfg);
}

RegistrationResult register_slice_near(const Volume& volume, const SliceImage& image,
                                       const Pose& prior, const RegistrationConfig& cfg) {
  validate_inputs(image, cfg);
  const double radius = cfg.local_radius_deg * kDeg;
  std::vector<Quaternion> orientations{prior.q};
  for (const auto& q : coarse_orientations(cfg.local_orientation_samples, cfg.seed)) {
    // squeeze the whole rotation ball (radius pi) into the local radius
    const Vec3 v = quat_log(q) * (radius / std::numbers::pi);
    orientations.push_back((prior.q * quat_exp(v)).normalized());
  }
  return search(volume, image, orientations, {prior.delta},
                translation_axis(cfg.local_translation_steps, cfg.local_translation_range), cfg);
}

std::vector<RegistrationResult> register_scan(const Volume& volume, const ScanSequence& scan,
                                              const StandardPlaneDef& sp,
                                              const RegistrationConfig& reg_cfg,
                                              const ContrastiveConfig& align_cfg,
                                              const OptimizerConfig& opt, bool refine_poses) {
  scan.validate();
  std::vector<RegistrationResult> results;
  results.reserve(scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (i == 0 || results.back().degenerate) {
      results.push_back(register_slice(volume, scan.frames[i], reg_cfg));
    } else {
      results.push_back(register_slice_near(volume, scan.frames[i], results.back().pose, reg_cfg));
    }
  }
  if (!refine_poses) {
    return results;
  }
  std::vector<Pose> poses;
  poses.reserve(results.size());
  for (const auto& r : results) poses.push_back(r.pose);
  const AlignmentProblem problem(scan, sp, align_cfg);
  const auto refined = refine_scan_poses(problem, poses, opt);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].degenerate) continue;
    results[i].pose = refined[i];
    results[i].score = score_pose(volume, scan.frames[i], refined[i], reg_cfg.extent);
  }
  return results;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const RegistrationResult& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) {
    cands.push_back({{"pose", to_json(c.pose)}, {"score", c.score}});
  }
  return {{"pose", to_json(r.pose)},
          {"score", r.score},
          {"degenerate", r.degenerate},
          {"candidates", cands}};
}

json to_json(const RegistrationConfig& c) {
  return {{"orientation_samples", c.orientation_samples},
          {"translation_steps", c.translation_steps},
          {"translation_range", c.translation_range},
          {"max_refine_evaluations", c.max_refine_evaluations},
          {"keep_top_k", c.keep_top_k},
          {"screen_candidates", c.screen_candidates},
          {"screen_evaluations", c.screen_evaluations},
          {"extent", c.extent},
          {"coarse_size", c.coarse_size},
          {"refine_size", c.refine_size},
          {"polish_size", c.polish_size},
          {"local_orientation_samples", c.local_orientation_samples},
          {"local_radius_deg", c.local_radius_deg},
          {"local_translation_steps", c.local_translation_steps},
          {"local_translation_range", c.local_translation_range},
          {"seed", c.seed}};
}

RegistrationConfig registration_config_from_json(const json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("registration config must be a JSON object");
  }
  RegistrationConfig c;
  const json defaults = to_json(c);
  try {
    for (const auto& [key, value] : j.items()) {
      if (!defaults.contains(key)) {
        throw std::invalid_argument("unknown registration config key: " + key);
      }
    }
    c.orientation_samples = j.value("orientation_samples", c.orientation_samples);
    c.translation_steps = j.value("translation_steps", c.translation_steps);
    c.translation_range = j.value("translation_range", c.translation_range);
    c.max_refine_evaluations = j.value("max_refine_evaluations", c.max_refine_evaluations);
    c.keep_top_k = j.value("keep_top_k", c.keep_top_k);
    c.screen_candidates = j.value("screen_candidates", c.screen_candidates);
    c.screen_evaluations = j.value("screen_evaluations", c.screen_evaluations);
    c.extent = j.value("extent", c.extent);
    c.coarse_size = j.value("coarse_size", c.coarse_size);
    c.refine_size = j.value("refine_size", c.refine_size);
    c.polish_size = j.value("polish_size", c.polish_size);
    c.local_orientation_samples = j.value("local_orientation_samples", c.local_orientation_samples);
    c.local_radius_deg = j.value("local_radius_deg", c.local_radius_deg);
    c.local_translation_steps = j.value("local_translation_steps", c.local_translation_steps);
    c.local_translation_range = j.value("local_translation_range", c.local_translation_range);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("registration config: ") + e.what());
  }
  return c;
}

}  // namespace sonoguide
