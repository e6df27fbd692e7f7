#include "sonoguide/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sonoguide {

void ScanSequence::validate() const {
  if (frames.empty()) {
    throw std::invalid_argument("scan has no frames");
  }
  if (sp_index >= frames.size()) {
    throw std::invalid_argument("scan sp_index out of range");
  }
  if (probe_q && probe_q->size() != frames.size()) {
    throw std::invalid_argument("scan probe_q length differs from frame count");
  }
}

double in_plane_loss(const Quaternion& q_hat, const StandardPlaneDef& sp) {
  return std::min(geodesic_loss(sp.q_pos, q_hat), geodesic_loss(sp.q_neg, q_hat));
}

double contrastive_loss(const Quaternion& anchor, const Quaternion& positive,
                        std::span<const Quaternion> negatives, std::span<const double> weights,
                        double temperature) {
  if (negatives.empty() || negatives.size() != weights.size()) {
    throw std::invalid_argument("contrastive_loss: need one weight per negative");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("contrastive_loss: temperature must be positive");
  }
  // log-sum-exp with the positive logit as reference
  const double pos_logit = std::cos(geodesic_loss(anchor, positive)) / temperature;
  double denom = 0.0;
  for (std::size_t n = 0; n < negatives.size(); ++n) {
    const double logit = std::cos(geodesic_loss(anchor, negatives[n])) / temperature;
    denom += weights[n] * std::exp(logit - pos_logit);
  }
  return std::log(denom);
}

std::size_t positive_index(std::size_t anchor, std::size_t num_frames) {
  if (num_frames < 2) {
    throw std::invalid_argument("positive_index: need at least two frames");
  }
  return anchor + 1 < num_frames ? anchor + 1 : anchor - 1;
}

std::vector<std::size_t> draw_negatives(std::size_t anchor, std::size_t positive,
                                        std::size_t num_frames,
                                        std::optional<std::size_t> excluded,
                                        const ContrastiveConfig& cfg) {
  if (cfg.num_negatives < 1 || !(cfg.temperature > 0.0)) {
    throw std::invalid_argument("contrastive config needs N >= 1 and tau > 0");
  }
  const auto n = static_cast<std::size_t>(cfg.num_negatives);
  if (num_frames < n + 2) {
    throw std::invalid_argument("scan too short: " + std::to_string(num_frames) +
                                " frames, contrastive loss needs at least " +
                                std::to_string(n + 2));
  }
  std::vector<std::size_t> pool;
  pool.reserve(num_frames);
  for (std::size_t i = 0; i < num_frames; ++i) {
    if (i != anchor && i != positive) pool.push_back(i);
  }
  if (excluded && *excluded != anchor && *excluded != positive && pool.size() > n) {
    pool.erase(std::find(pool.begin(), pool.end(), *excluded));
  }
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed),
                    static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                    static_cast<std::uint32_t>(anchor)};
  std::mt19937_64 rng(seq);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  return pool;
}

double out_of_plane_loss(std::size_t anchor_idx, std::span<const Quaternion> poses,
                         std::span<const SemanticDescriptor> descriptors,
                         const ContrastiveConfig& cfg, std::optional<std::size_t> excluded) {
  if (poses.size() != descriptors.size()) {
    throw std::invalid_argument("out_of_plane_loss: one descriptor per pose required");
  }
  if (anchor_idx >= poses.size()) {
    throw std::invalid_argument("out_of_plane_loss: anchor out of range");
  }
  const std::size_t pos = positive_index(anchor_idx, poses.size());
  const auto neg_idx = draw_negatives(anchor_idx, pos, poses.size(), excluded, cfg);
  std::vector<Quaternion> negs;
  std::vector<double> weights;
  for (std::size_t j : neg_idx) {
    negs.push_back(poses[j]);
    weights.push_back(semantic_similarity(descriptors[anchor_idx], descriptors[j]));
  }
  return contrastive_loss(poses[anchor_idx], poses[pos], negs, weights, cfg.temperature);
}

// ---------------------------------------------------------------------------

AlignmentProblem::AlignmentProblem(const ScanSequence& scan, const StandardPlaneDef& sp,
                                   const ContrastiveConfig& cfg)
    : num_frames_(scan.size()), sp_index_(scan.sp_index), sp_(sp), cfg_(cfg) {
  scan.validate();
  std::vector<SemanticDescriptor> descriptors;
  descriptors.reserve(scan.size());
  for (const auto& f : scan.frames) descriptors.push_back(semantic_descriptor(f));
  build(std::move(descriptors));
}

AlignmentProblem::AlignmentProblem(std::vector<SemanticDescriptor> descriptors,
                                   std::size_t sp_index, const StandardPlaneDef& sp,
                                   const ContrastiveConfig& cfg)
    : num_frames_(descriptors.size()), sp_index_(sp_index), sp_(sp), cfg_(cfg) {
  if (sp_index >= descriptors.size()) {
    throw std::invalid_argument("AlignmentProblem: sp_index out of range");
  }
  build(std::move(descriptors));
}

void AlignmentProblem::build(std::vector<SemanticDescriptor> descriptors) {
  involvement_.assign(num_frames_, {});
  if (num_frames_ < static_cast<std::size_t>(cfg_.num_negatives) + 2) {
    return;
  }
  for (std::size_t a = 0; a < num_frames_; ++a) {
    if (a == sp_index_) continue;
    Term t;
    t.anchor = a;
    t.positive = positive_index(a, num_frames_);
    t.negatives = draw_negatives(a, t.positive, num_frames_, sp_index_, cfg_);
    for (std::size_t j : t.negatives) {
      t.weights.push_back(semantic_similarity(descriptors[a], descriptors[j]));
    }
    const std::size_t id = terms_.size();
    involvement_[a].push_back(id);
    involvement_[t.positive].push_back(id);
    for (std::size_t j : t.negatives) involvement_[j].push_back(id);
    terms_.push_back(std::move(t));
  }
  for (auto& v : involvement_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

double AlignmentProblem::term_value(std::size_t t, std::span<const Quaternion> q) const {
  const Term& term = terms_[t];
  std::vector<Quaternion> negs;
  negs.reserve(term.negatives.size());
  for (std::size_t j : term.negatives) negs.push_back(q[j]);
  return contrastive_loss(q[term.anchor], q[term.positive], negs, term.weights, cfg_.temperature);
}

double AlignmentProblem::in_plane(std::span<const Quaternion> q) const {
  return in_plane_loss(q[sp_index_], sp_);
}

double AlignmentProblem::objective(std::span<const Quaternion> q) const {
  if (q.size() != num_frames_) {
    throw std::invalid_argument("AlignmentProblem: one orientation per frame required");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < terms_.size(); ++t) total += term_value(t, q);
  const double mean = terms_.empty() ? 0.0 : total / static_cast<double>(terms_.size());
  return in_plane(q) + mean;
}

namespace {

std::vector<Quaternion> orientations(std::span<const Pose> poses) {
  std::vector<Quaternion> q;
  q.reserve(poses.size());
  for (const auto& p : poses) q.push_back(p.q.normalized());
  return q;
}

}  // namespace

double scan_objective(const ScanSequence& scan, std::span<const Pose> poses,
                      const StandardPlaneDef& sp, const ContrastiveConfig& cfg) {
  if (poses.size() != scan.size()) {
    throw std::invalid_argument("scan_objective: one pose per frame required");
  }
  const AlignmentProblem problem(scan, sp, cfg);
  return problem.objective(orientations(poses));
}

std::vector<Pose> refine_scan_poses(const ScanSequence& scan, std::span<const Pose> init_poses,
                                    const StandardPlaneDef& sp, const ContrastiveConfig& cfg,
                                    const OptimizerConfig& opt, RefinementTrace* trace) {
  const AlignmentProblem problem(scan, sp, cfg);
  return refine_scan_poses(problem, init_poses, opt, trace);
}

std::vector<Pose> refine_scan_poses(const AlignmentProblem& problem,
                                    std::span<const Pose> init_poses, const OptimizerConfig& opt,
                                    RefinementTrace* trace) {
  const std::size_t n = problem.num_frames();
  if (init_poses.size() != n) {
    throw std::invalid_argument("refine_scan_poses: one pose per frame required");
  }
  std::vector<Pose> out(init_poses.begin(), init_poses.end());
  const std::vector<Quaternion> anchor = orientations(init_poses);
  std::vector<Quaternion> q = anchor;

  const double n_terms = std::max<double>(1.0, static_cast<double>(problem.terms().size()));
  const double prox_scale = opt.proximal_weight / static_cast<double>(n);
  auto proximal = [&](std::size_t i, const Quaternion& qi) {
    const double g = geodesic_loss(anchor[i], qi);
    return prox_scale * g * g;
  };
  auto augmented = [&](std::span<const Quaternion> qs) {
    double j = problem.objective(qs);
    for (std::size_t i = 0; i < n; ++i) j += proximal(i, qs[i]);
    return j;
  };
  // contribution of frame i to the augmented objective, up to terms that do
  // not depend on it
  auto local = [&](std::size_t i, std::span<const Quaternion> qs) {
    double v = 0.0;
    for (std::size_t t : problem.terms_of(i)) v += problem.term_value(t, qs);
    v /= n_terms;
    if (i == problem.sp_index()) v += problem.in_plane(qs);
    return v + proximal(i, qs[i]);
  };

  double current = augmented(q);
  const double initial_scan = problem.objective(q);
  RefinementTrace tr;
  tr.initial_objective = initial_scan;

  std::deque<double> history{current};
  double step = opt.learning_rate;
  std::vector<Vec3> grad(n);
  std::vector<Quaternion> candidate(n);
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    double max_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Quaternion qi = q[i];
      for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = opt.fd_step;
        q[i] = (qi * quat_exp(e)).normalized();
        const double plus = local(i, q);
        q[i] = (qi * quat_exp(-e)).normalized();
        const double minus = local(i, q);
        grad[i][k] = (plus - minus) / (2.0 * opt.fd_step);
      }
      q[i] = qi;
      max_norm = std::max(max_norm, grad[i].norm());
    }
    if (max_norm < 1e-12) {
      break;
    }
    bool accepted = false;
    while (step > 1e-7) {
      for (std::size_t i = 0; i < n; ++i) {
        candidate[i] = (q[i] * quat_exp(-step / max_norm * grad[i])).normalized();
      }
      const double value = augmented(candidate);
      if (value < current) {
        q.swap(candidate);
        current = value;
        accepted = true;
        step = std::min(step * 1.5, opt.learning_rate);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      break;
    }
    ++tr.accepted_steps;
    history.push_back(current);
    if (static_cast<int>(history.size()) > opt.patience) {
      const double past = history.front();
      history.pop_front();
      if ((past - current) / std::max(std::abs(past), 1e-12) < opt.min_relative_improvement) {
        ++it;
        break;
      }
    }
  }
  tr.iterations = it;
  tr.final_objective = problem.objective(q);
  // proximal term is non-negative and zero at the start, so the scan
  // objective can only have decreased; guard against rounding anyway
  if (tr.accepted_steps == 0 || tr.final_objective > initial_scan) {
    tr.final_objective = initial_scan;
    if (trace) *trace = tr;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i].q = q[i];
  if (trace) *trace = tr;
  return out;
}

}  // namespace sonoguide
