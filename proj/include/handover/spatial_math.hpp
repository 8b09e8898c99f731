#pragma once

#include <Eigen/Dense>

namespace handover {

using Vector3 = Eigen::Vector3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

using RotationMatrix3 = Matrix3;
using RateMap3 = Matrix3;

/// Guard on |cos(pitch)| below which Euler-rate maps are treated as singular.
inline constexpr double kSingularityEpsilon = 1e-3;

/// Roll-pitch-yaw angles, extrinsic X-Y-Z: R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerAnglesRPY {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  static EulerAnglesRPY from_vector(const Vector3& v) { return {v.x(), v.y(), v.z()}; }
  Vector3 to_vector() const { return {roll, pitch, yaw}; }
  bool near_singular(double eps = kSingularityEpsilon) const;
};

RotationMatrix3 rpy_to_rotation(const EulerAnglesRPY& angles);

/// Inverse of rpy_to_rotation with pitch in [-pi/2, pi/2].
EulerAnglesRPY rotation_to_rpy(const RotationMatrix3& rotation);

/// N such that the inertial-frame angular velocity is N * d(rpy)/dt.
/// Throws NearSingularError when |cos(pitch)| < kSingularityEpsilon.
RateMap3 euler_rate_map(const EulerAnglesRPY& angles);

/// Q = R^T N, mapping rpy rates to body-frame angular velocity.
RateMap3 body_rate_map(const EulerAnglesRPY& angles);

Matrix3 skew(const Vector3& v);

/// Rotation by `angle` about the unit vector `axis` (Rodrigues).
RotationMatrix3 axis_angle_rotation(const Vector3& axis, double angle);

/// Wraps to (-pi, pi].
double wrap_angle(double angle);

struct HomogeneousTransform {
  RotationMatrix3 rotation = RotationMatrix3::Identity();
  Vector3 translation = Vector3::Zero();

  static HomogeneousTransform identity() { return {}; }
  static HomogeneousTransform from_xyz_rpy(const Vector3& xyz, const EulerAnglesRPY& rpy);
  static HomogeneousTransform from_matrix(const Matrix4& m);

  Matrix4 matrix() const;
  HomogeneousTransform inverse() const;
  Vector3 apply(const Vector3& point) const { return rotation * point + translation; }
};

HomogeneousTransform compose(const HomogeneousTransform& a, const HomogeneousTransform& b);

inline HomogeneousTransform operator*(const HomogeneousTransform& a, const HomogeneousTransform& b) {
  return compose(a, b);
}

/// Pose as [position; rpy] with the rotation converted by rotation_to_rpy.
Vector6 pose_vector(const HomogeneousTransform& t);

/// desired - actual, angular components wrapped to (-pi, pi].
Vector6 pose_error(const Vector6& desired, const Vector6& actual);

}  // namespace handover
