#include "sonoguide/evaluation.hpp"
#include "sonoguide/registration.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace sonoguide;
using namespace testing_support;

namespace {

Pose offset_pose(std::mt19937_64& rng, const Quaternion& base, double max_deg) {
  std::uniform_real_distribution<double> ang(0.0, max_deg * kDeg);
  std::uniform_real_distribution<double> t(-0.15, 0.15);
  return {(base * eigen_axis_angle(random_unit_vector(rng), ang(rng))).normalized(),
          Vec3(t(rng), t(rng), t(rng))};
}

double mean_rotation_error(const std::vector<RegistrationResult>& r, const std::vector<Pose>& truth) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += rotation_angle_3d(r[i].pose.q, truth[i].q);
  return s / static_cast<double>(r.size());
}

}  // namespace

TEST_CASE("coarse orientation grid") {
  const auto g = coarse_orientations(256);
  // the hemisphere half of a 512-point spiral: roughly, not exactly, 256
  CHECK(std::abs(static_cast<int>(g.size()) - 256) <= 8);
  for (const auto& q : g) {
    CHECK(q.w >= 0.0);
    CHECK(std::abs(q.norm() - 1.0) < 1e-12);
  }
  // covering radius: every random rotation is within 35 degrees of a grid point
  std::mt19937_64 rng(80);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Quaternion r = random_unit_quaternion(rng);
    double best = kPi;
    for (const auto& q : g) best = std::min(best, rotation_angle_3d(r, q));
    worst = std::max(worst, best);
  }
  CHECK(worst < 35.0 * kDeg);
  CHECK(coarse_orientations(64, 3)[5] == coarse_orientations(64, 3)[5]);
  CHECK(coarse_orientations(64, 3)[5] != coarse_orientations(64, 4)[5]);
}

TEST_CASE("constant image is degenerate") {
  const RegistrationResult r = register_slice(phantom64().volume, SliceImage(kDefaultSliceSize, kDefaultSliceSize, 0.4f));
  CHECK(r.degenerate);
  CHECK(r.score == 0.0);
  CHECK(std::abs(r.pose.q.norm() - 1.0) < 1e-12);
}

TEST_CASE("input validation") {
  const Volume& v = phantom64().volume;
  CHECK_THROWS_AS(register_slice(v, SliceImage{}), std::invalid_argument);
  RegistrationConfig bad;
  bad.keep_top_k = 0;
  CHECK_THROWS_AS(register_slice(v, sample_slice(v, Pose{}), bad), std::invalid_argument);
  bad = {};
  bad.translation_range = 1.5;
  CHECK_THROWS_AS(register_slice(v, sample_slice(v, Pose{}), bad), std::invalid_argument);
}

TEST_CASE("register_slice recovers offset poses and never loses to its starts") {
  const Phantom& ph = phantom64();
  std::mt19937_64 rng(81);
  const auto grid = coarse_orientations(RegistrationConfig{}.orientation_samples);
  int ok = 0;
  const int trials = 8;
  for (int t = 0; t < trials; ++t) {
    const Pose truth = offset_pose(rng, grid[rng() % grid.size()], 40.0);
    const SliceImage img = sample_slice(ph.volume, truth);
    const RegistrationResult r = register_slice(ph.volume, img);
    CHECK_FALSE(r.degenerate);
    CHECK(r.score <= 1.0);
    CHECK(std::abs(r.pose.q.norm() - 1.0) < 1e-12);
    REQUIRE_FALSE(r.candidates.empty());
    for (const auto& c : r.candidates) CHECK(r.score >= c.score - 1e-12);
    CHECK(r.score == doctest::Approx(score_pose(ph.volume, img, r.pose)).epsilon(1e-12));
    ok += rotation_angle_3d(r.pose.q, truth.q) < 5.0 * kDeg && (r.pose.delta - truth.delta).norm() < 0.05;
  }
  CHECK(ok >= trials - 1);
}

TEST_CASE("slice at a standard plane yields zero guidance") {
  const Phantom& ph = phantom64();
  for (const auto& sp : ph.standard_planes) {
    const RegistrationResult r = register_slice(ph.volume, sample_slice(ph.volume, sp.pose()));
    CHECK(transform_to_sp(r.pose, sp).angle < 5.0 * kDeg);
  }
}

TEST_CASE("register_slice is deterministic") {
  const Phantom& ph = phantom64();
  std::mt19937_64 rng(82);
  const SliceImage img = sample_slice(ph.volume, offset_pose(rng, random_unit_quaternion(rng), 30.0));
  const RegistrationResult a = register_slice(ph.volume, img);
  const RegistrationResult b = register_slice(ph.volume, img);
  CHECK(a.pose.q == b.pose.q);
  CHECK(a.pose.delta == b.pose.delta);
  CHECK(a.score == b.score);
  CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("sign-flipped prior gives the same orientation") {
  const Phantom& ph = phantom64();
  std::mt19937_64 rng(83);
  for (int t = 0; t < 3; ++t) {
    const Pose truth = offset_pose(rng, random_unit_quaternion(rng), 0.0);
    const SliceImage img = sample_slice(ph.volume, truth);
    Pose prior{(truth.q * eigen_axis_angle(random_unit_vector(rng), 8.0 * kDeg)).normalized(), truth.delta};
    Pose flipped = prior;
    flipped.q = -flipped.q;
    const RegistrationResult a = register_slice_near(ph.volume, img, prior);
    const RegistrationResult b = register_slice_near(ph.volume, img, flipped);
    const bool same_basin = rotation_angle_3d(a.pose.q, b.pose.q) < 1e-6;
    CHECK((same_basin || std::abs(a.score - b.score) < 1e-6));
  }
}

TEST_CASE("configuration JSON") {
  RegistrationConfig c;
  c.keep_top_k = 4;
  c.seed = 99;
  c.local_radius_deg = 12.5;
  const RegistrationConfig back = registration_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  const RegistrationConfig partial = registration_config_from_json({{"keep_top_k", 3}});
  CHECK(partial.keep_top_k == 3);
  CHECK(partial.orientation_samples == RegistrationConfig{}.orientation_samples);
  CHECK_THROWS_AS(registration_config_from_json({{"no_such_key", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(registration_config_from_json({{"keep_top_k", "x"}}), std::invalid_argument);

  RegistrationResult r;
  r.score = 0.5;
  r.candidates.push_back({Pose{}, 0.25});
  const auto j = to_json(r);
  CHECK(j.at("score") == 0.5);
  CHECK(j.at("degenerate") == false);
  CHECK(j.at("candidates").size() == 1);
  CHECK(j.at("pose").at("q").size() == 4);
}

TEST_CASE("single-frame scan is register_slice plus in-plane refinement") {
  const Phantom& ph = phantom64();
  const StandardPlaneDef& sp = ph.standard_planes[1];
  std::mt19937_64 rng(84);
  ScanSequence scan;
  scan.sp_id = sp.id;
  scan.frames.push_back(sample_slice(ph.volume, offset_pose(rng, sp.q_pos, 15.0)));
  const auto r = register_scan(ph.volume, scan, sp);
  REQUIRE(r.size() == 1);
  const RegistrationResult single = register_slice(ph.volume, scan.frames[0]);
  const std::vector<Pose> init{single.pose};
  const auto refined = refine_scan_poses(scan, init, sp, {}, {});
  CHECK(r[0].pose.q == refined[0].q);
  CHECK(r[0].pose.delta == refined[0].delta);
}

TEST_CASE("SP frame matching the atlas plane is pulled onto the prior") {
  const Phantom& ph = phantom64();
  const StandardPlaneDef& sp = ph.standard_planes[0];
  TrajectoryConfig tc;
  tc.steps = 12;
  tc.rng_seed = 85;
  const SimulatedScan sim = simulate_scan(ph.volume, sp, tc);
  const auto r = register_scan(ph.volume, sim.scan, sp);
  CHECK(in_plane_loss(r[sim.scan.sp_index].pose.q, sp) < 1e-2);
}

TEST_CASE("register_scan is no worse than independent per-frame registration") {
  const Phantom& ph = phantom64();
  double scan_total = 0.0, frame_total = 0.0;
  for (int s = 0; s < 10; ++s) {
    const StandardPlaneDef& sp = ph.standard_planes[s % 2];
    TrajectoryConfig tc;
    tc.steps = 20;
    tc.rng_seed = 500 + s;
    const SimulatedScan sim = simulate_scan(ph.volume, sp, tc);
    const auto joint = register_scan(ph.volume, sim.scan, sp);
    std::vector<RegistrationResult> independent;
    for (const auto& f : sim.scan.frames) independent.push_back(register_slice(ph.volume, f));
    scan_total += mean_rotation_error(joint, sim.truth);
    frame_total += mean_rotation_error(independent, sim.truth);
  }
  MESSAGE("mean rotation error: register_scan " << scan_total / 10 / kDeg << " deg, per-frame "
                                                << frame_total / 10 / kDeg << " deg");
  CHECK(scan_total <= frame_total);
}
