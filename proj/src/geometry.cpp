#include "sonoguide/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sonoguide {

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("cannot normalize a zero or non-finite quaternion");
  }
  return {w / n, x / n, y / n, z / n};
}

bool Quaternion::is_finite() const {
  return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

Quaternion quat_multiply(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quaternion quat_conjugate(const Quaternion& q) { return {q.w, -q.x, -q.y, -q.z}; }

double quat_dot(const Quaternion& a, const Quaternion& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

Mat3 to_rotation_matrix(const Quaternion& q) {
  if (!q.is_finite() || std::abs(q.norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("to_rotation_matrix requires a unit quaternion");
  }
  const double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  Mat3 r;
  r << ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy),
      2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx),
      2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz;
  return r;
}

Vec3 rotate(const Quaternion& q, const Vec3& v) { return to_rotation_matrix(q) * v; }

double geodesic_loss(const Quaternion& a, const Quaternion& b) {
  // arccos(|<a,b>|) written as 2*atan2(|a-b|, |a+b|) after sign alignment;
  // same value, but accurate near zero where arccos loses half the digits.
  const Quaternion bb = align_sign(a, b);
  const double dw = a.w - bb.w, dx = a.x - bb.x, dy = a.y - bb.y, dz = a.z - bb.z;
  const double sw = a.w + bb.w, sx = a.x + bb.x, sy = a.y + bb.y, sz = a.z + bb.z;
  const double diff = std::sqrt(dw * dw + dx * dx + dy * dy + dz * dz);
  const double sum = std::sqrt(sw * sw + sx * sx + sy * sy + sz * sz);
  const double angle = 2.0 * std::atan2(diff, sum);
  return std::clamp(angle, 0.0, std::numbers::pi / 2.0);
}

double rotation_angle_3d(const Quaternion& a, const Quaternion& b) {
  return geodesic_loss(a, b) / AlignmentConstants::alpha;
}

AxisAngle to_axis_angle(const Quaternion& q) {
  Quaternion c = q.w < 0.0 ? -q : q;
  const double s = std::sqrt(c.x * c.x + c.y * c.y + c.z * c.z);
  const double angle = 2.0 * std::atan2(s, c.w);
  if (angle < 1e-9 || s == 0.0) {
    return {Vec3::UnitZ(), 0.0};
  }
  return {Vec3(c.x, c.y, c.z) / s, angle};
}

Quaternion from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0 || angle == 0.0) {
    return Quaternion::identity();
  }
  const Vec3 u = axis / n;
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), u.x() * s, u.y() * s, u.z() * s};
}

Quaternion quat_exp(const Vec3& rotation_vector) {
  const double angle = rotation_vector.norm();
  if (angle < 1e-12) {
    // first order; keeps tiny finite-difference steps exact enough
    return Quaternion{1.0, 0.5 * rotation_vector.x(), 0.5 * rotation_vector.y(),
                      0.5 * rotation_vector.z()}
        .normalized();
  }
  return from_axis_angle(rotation_vector, angle);
}

Vec3 quat_log(const Quaternion& q) {
  const AxisAngle aa = to_axis_angle(q);
  return aa.axis * aa.angle;
}

Quaternion align_sign(const Quaternion& reference, const Quaternion& q) {
  return quat_dot(reference, q) < 0.0 ? -q : q;
}

Quaternion slerp(const Quaternion& a, const Quaternion& b, double t) {
  const Quaternion rel = quat_conjugate(a) * align_sign(a, b);
  return (a * quat_exp(t * quat_log(rel))).normalized();
}

std::string_view to_string(SpId id) { return id == SpId::TVP ? "TVP" : "TCP"; }

SpId sp_id_from_string(std::string_view s) {
  if (s == "TVP") return SpId::TVP;
  if (s == "TCP") return SpId::TCP;
  throw std::invalid_argument("unknown standard plane id: " + std::string(s));
}

StandardPlaneDef StandardPlaneDef::from_primary(SpId id, const Quaternion& q_pos,
                                                const Vec3& delta_sp) {
  const Quaternion qp = q_pos.normalized();
  const Quaternion flip{0.0, 0.0, 1.0, 0.0};
  return {id, qp, (qp * flip).normalized(), delta_sp};
}

GuidanceInstruction transform_to_sp(const Pose& pose, const StandardPlaneDef& sp,
                                    SpDirection direction) {
  SpDirection chosen = direction;
  if (direction == SpDirection::Auto) {
    const double d_pos = geodesic_loss(pose.q, sp.q_pos);
    const double d_neg = geodesic_loss(pose.q, sp.q_neg);
    chosen = d_neg < d_pos ? SpDirection::Neg : SpDirection::Pos;
  }
  const Quaternion& q_sp = chosen == SpDirection::Neg ? sp.q_neg : sp.q_pos;

  GuidanceInstruction g;
  g.target_sp = sp.id;
  g.chosen_direction = chosen;
  g.rotation = quat_conjugate(pose.q) * q_sp;
  g.translation = sp.delta_sp - rotate(g.rotation.normalized(), pose.delta);
  const AxisAngle aa = to_axis_angle(g.rotation);
  g.axis = aa.axis;
  g.angle = aa.angle;
  return g;
}

Pose apply_guidance(const Pose& pose, const GuidanceInstruction& g) {
  const Quaternion r = g.rotation.normalized();
  return {pose.q * r, rotate(r, pose.delta) + g.translation};
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const Quaternion& q) { return nlohmann::json::array({q.w, q.x, q.y, q.z}); }

nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

nlohmann::json to_json(const Pose& p) { return {{"q", to_json(p.q)}, {"delta", to_json(p.delta)}}; }

nlohmann::json to_json(const StandardPlaneDef& sp) {
  return {{"id", std::string(to_string(sp.id))},
          {"q_pos", to_json(sp.q_pos)},
          {"q_neg", to_json(sp.q_neg)},
          {"delta_sp", to_json(sp.delta_sp)}};
}

nlohmann::json to_json(const GuidanceInstruction& g) {
  return {{"target_sp", std::string(to_string(g.target_sp))},
          {"axis", to_json(g.axis)},
          {"angle", g.angle},
          {"angle_deg", g.angle * 180.0 / std::numbers::pi},
          {"translation", to_json(g.translation)},
          {"chosen_direction", g.chosen_direction == SpDirection::Neg ? "neg" : "pos"},
          {"rotation", to_json(g.rotation)}};
}

namespace {

template <std::size_t N>
std::array<double, N> numbers_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != N) {
    throw std::invalid_argument(std::string(what) + " must be an array of " +
                                std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[i].is_number()) {
      throw std::invalid_argument(std::string(what) + " must contain only numbers");
    }
    out[i] = j[i].get<double>();
    if (!std::isfinite(out[i])) {
      throw std::invalid_argument(std::string(what) + " must be finite");
    }
  }
  return out;
}

}  // namespace

Quaternion quaternion_from_json(const nlohmann::json& j) {
  return Quaternion::from_array(numbers_from_json<4>(j, "quaternion"));
}

Vec3 vec3_from_json(const nlohmann::json& j) {
  const auto a = numbers_from_json<3>(j, "vector");
  return {a[0], a[1], a[2]};
}

Pose pose_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("q")) {
    throw std::invalid_argument("pose must be an object with \"q\" and optional \"delta\"");
  }
  Pose p;
  const Quaternion q = quaternion_from_json(j.at("q"));
  if (q.norm() < 1e-12) {
    throw std::invalid_argument("pose quaternion must be non-zero");
  }
  // unit input is kept bit-exact so JSON round trips preserve values
  p.q = std::abs(q.norm() - 1.0) < 1e-12 ? q : q.normalized();
  p.delta = j.contains("delta") ? vec3_from_json(j.at("delta")) : Vec3::Zero();
  return p;
}

StandardPlaneDef sp_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("standard plane definition must be an object");
  }
  StandardPlaneDef sp;
  sp.id = sp_id_from_string(j.at("id").get<std::string>());
  sp.q_pos = quaternion_from_json(j.at("q_pos")).normalized();
  sp.q_neg = quaternion_from_json(j.at("q_neg")).normalized();
  sp.delta_sp = vec3_from_json(j.at("delta_sp"));
  return sp;
}

}  // namespace sonoguide
