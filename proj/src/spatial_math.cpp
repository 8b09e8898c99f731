#include "handover/spatial_math.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "handover/errors.hpp"

namespace handover {

bool EulerAnglesRPY::near_singular(double eps) const { return std::abs(std::cos(pitch)) < eps; }

RotationMatrix3 rpy_to_rotation(const EulerAnglesRPY& a) {
  const double cr = std::cos(a.roll), sr = std::sin(a.roll);
  const double cp = std::cos(a.pitch), sp = std::sin(a.pitch);
  const double cy = std::cos(a.yaw), sy = std::sin(a.yaw);
  RotationMatrix3 r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp,     cp * sr,                cp * cr;
  return r;
}

EulerAnglesRPY rotation_to_rpy(const RotationMatrix3& r) {
  EulerAnglesRPY a;
  a.pitch = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  a.roll = std::atan2(r(2, 1), r(2, 2));
  a.yaw = std::atan2(r(1, 0), r(0, 0));
  return a;
}

namespace {

void check_guard(const EulerAnglesRPY& a) {
  if (a.near_singular()) {
    throw NearSingularError("Euler-angle rate map singular at pitch = " + std::to_string(a.pitch));
  }
}

}  // namespace

RateMap3 euler_rate_map(const EulerAnglesRPY& a) {
  check_guard(a);
  // omega = yaw_dot * z + Rz * pitch_dot * y + Rz * Ry * roll_dot * x
  const double cp = std::cos(a.pitch), sp = std::sin(a.pitch);
  const double cy = std::cos(a.yaw), sy = std::sin(a.yaw);
  RateMap3 n;
  n << cy * cp, -sy, 0.0,
       sy * cp,  cy, 0.0,
       -sp,     0.0, 1.0;
  return n;
}

RateMap3 body_rate_map(const EulerAnglesRPY& a) { return rpy_to_rotation(a).transpose() * euler_rate_map(a); }

Matrix3 skew(const Vector3& v) {
  Matrix3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

RotationMatrix3 axis_angle_rotation(const Vector3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(angle, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

HomogeneousTransform HomogeneousTransform::from_xyz_rpy(const Vector3& xyz, const EulerAnglesRPY& rpy) {
  return {rpy_to_rotation(rpy), xyz};
}

HomogeneousTransform HomogeneousTransform::from_matrix(const Matrix4& m) {
  if (m.row(3) != Eigen::RowVector4d(0.0, 0.0, 0.0, 1.0)) {
    throw std::invalid_argument("homogeneous transform needs a [0 0 0 1] bottom row");
  }
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

Matrix4 HomogeneousTransform::matrix() const {
  Matrix4 m = Matrix4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

HomogeneousTransform HomogeneousTransform::inverse() const {
  const RotationMatrix3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

HomogeneousTransform compose(const HomogeneousTransform& a, const HomogeneousTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Vector6 pose_vector(const HomogeneousTransform& t) {
  Vector6 x;
  x.head<3>() = t.translation;
  x.tail<3>() = rotation_to_rpy(t.rotation).to_vector();
  return x;
}

Vector6 pose_error(const Vector6& desired, const Vector6& actual) {
  Vector6 e = desired - actual;
  for (int i = 3; i < 6; ++i) e[i] = wrap_angle(e[i]);
  return e;
}

}  // namespace handover
