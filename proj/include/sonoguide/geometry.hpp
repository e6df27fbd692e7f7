#pragma once

// Quaternion algebra on SO(3) and the rigid transformation from a plane pose
// toward a standard plane.
//
// Conventions: Hamilton product, scalar-first (w, x, y, z), active rotations.
// q and -q describe the same orientation; every orientation distance in this
// header is invariant under a sign flip of either argument.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <nlohmann/json.hpp>

#include <array>
#include <string>
#include <string_view>
#include <utility>

namespace sonoguide {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static constexpr Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

  double norm() const;
  Quaternion normalized() const;
  Quaternion operator-() const { return {-w, -x, -y, -z}; }
  Vec3 vec() const { return {x, y, z}; }
  bool is_finite() const;

  std::array<double, 4> to_array() const { return {w, x, y, z}; }
  static Quaternion from_array(const std::array<double, 4>& a) {
    return {a[0], a[1], a[2], a[3]};
  }

  friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

Quaternion quat_multiply(const Quaternion& a, const Quaternion& b);
inline Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return quat_multiply(a, b);
}
Quaternion quat_conjugate(const Quaternion& q);
double quat_dot(const Quaternion& a, const Quaternion& b);

/// Rotation matrix of a unit quaternion. Throws std::invalid_argument when
/// |q| deviates from 1 by more than 1e-6.
Mat3 to_rotation_matrix(const Quaternion& q);

/// Rotates v by unit quaternion q.
Vec3 rotate(const Quaternion& q, const Vec3& v);

/// arccos(|<a,b>|): half the 3D rotation angle between a and b, in [0, pi/2].
/// This is the alpha * d_G term with alpha = 0.5.
double geodesic_loss(const Quaternion& a, const Quaternion& b);

/// Full 3D rotation angle between a and b, in [0, pi].
double rotation_angle_3d(const Quaternion& a, const Quaternion& b);

struct AxisAngle {
  Vec3 axis = Vec3::UnitZ();
  double angle = 0.0;
};

/// angle in [0, pi]; axis defaults to +z when angle < 1e-9.
AxisAngle to_axis_angle(const Quaternion& q);
Quaternion from_axis_angle(const Vec3& axis, double angle);

/// Exponential map: rotation vector (axis * angle) to unit quaternion.
Quaternion quat_exp(const Vec3& rotation_vector);
/// Logarithm on the w >= 0 hemisphere; |result| in [0, pi].
Vec3 quat_log(const Quaternion& q);

/// Spherical linear interpolation along the shorter arc.
Quaternion slerp(const Quaternion& a, const Quaternion& b, double t);

/// Returns b or -b, whichever has a non-negative inner product with a.
Quaternion align_sign(const Quaternion& reference, const Quaternion& q);

struct AlignmentConstants {
  static constexpr double alpha = 0.5;
};

struct Pose {
  Quaternion q;
  Vec3 delta = Vec3::Zero();
};

enum class SpId { TVP, TCP };

std::string_view to_string(SpId id);
SpId sp_id_from_string(std::string_view s);

struct StandardPlaneDef {
  SpId id = SpId::TVP;
  Quaternion q_pos;
  Quaternion q_neg;
  Vec3 delta_sp = Vec3::Zero();

  /// Builds both directions from q_pos: q_neg is q_pos turned by pi about the
  /// plane's local y axis, which maps the plane onto itself with reversed
  /// heading.
  static StandardPlaneDef from_primary(SpId id, const Quaternion& q_pos,
                                       const Vec3& delta_sp);

  Pose pose(bool negative = false) const {
    return {negative ? q_neg : q_pos, delta_sp};
  }
};

enum class SpDirection { Pos, Neg, Auto };

struct GuidanceInstruction {
  SpId target_sp = SpId::TVP;
  Vec3 axis = Vec3::UnitZ();
  double angle = 0.0;
  Vec3 translation = Vec3::Zero();
  SpDirection chosen_direction = SpDirection::Pos;
  Quaternion rotation;  // q_I^sp before axis-angle decomposition
};

/// q_I^sp = q* q_sp and delta_I^sp = delta_sp - R(q_I^sp) delta. With
/// SpDirection::Auto the SP direction closest to pose.q is used (ties go to
/// Pos).
GuidanceInstruction transform_to_sp(const Pose& pose,
                                    const StandardPlaneDef& sp,
                                    SpDirection direction = SpDirection::Auto);

/// Applies a guidance instruction to a pose: (q q_I^sp, R(q_I^sp) delta +
/// delta_I^sp). Lands on the SP pose.
Pose apply_guidance(const Pose& pose, const GuidanceInstruction& g);

// JSON: quaternions as [w,x,y,z], vectors as [x,y,z].
nlohmann::json to_json(const Quaternion& q);
nlohmann::json to_json(const Vec3& v);
nlohmann::json to_json(const Pose& p);
nlohmann::json to_json(const StandardPlaneDef& sp);
nlohmann::json to_json(const GuidanceInstruction& g);

/// Parsers throw std::invalid_argument on malformed input.
Quaternion quaternion_from_json(const nlohmann::json& j);
Vec3 vec3_from_json(const nlohmann::json& j);
Pose pose_from_json(const nlohmann::json& j);
StandardPlaneDef sp_from_json(const nlohmann::json& j);

}  // namespace sonoguide
