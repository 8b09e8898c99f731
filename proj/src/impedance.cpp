#include "handover/impedance.hpp"

#include <cmath>

#include "handover/errors.hpp"

namespace handover {

namespace {

constexpr double kMinReciprocalCondition = 1e-12;

bool is_spd(const Matrix6& m) {
  if (!m.allFinite() || !m.isApprox(m.transpose(), 1e-12)) return false;
  return Eigen::LLT<Matrix6>(m).info() == Eigen::Success;
}

// Right inverse of J: J^-1 when square, J^T (J J^T)^-1 otherwise.
Eigen::MatrixXd right_inverse(const Eigen::MatrixXd& j) {
  // LU's condition estimate is unreliable on exactly singular input, so the
  // rank check uses singular values.
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(j).singularValues();
  if (!(sv.size() > 0 && sv.minCoeff() >= kMinReciprocalCondition * sv.maxCoeff())) {
    throw SolveFailure("Jacobian is singular or has lost rank");
  }
  if (j.rows() == j.cols()) return j.partialPivLu().inverse();
  const Eigen::MatrixXd jjt = j * j.transpose();
  return j.transpose() * jjt.llt().solve(Eigen::MatrixXd::Identity(j.rows(), j.rows()));
}

}  // namespace

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::Rigid: return "rigid";
    case Behavior::Compliant: return "compliant";
    case Behavior::Custom: return "custom";
  }
  return "custom";
}

std::optional<Behavior> parse_behavior(std::string_view name) {
  if (name == "rigid") return Behavior::Rigid;
  if (name == "compliant") return Behavior::Compliant;
  if (name == "custom") return Behavior::Custom;
  return std::nullopt;
}

void GainSet::validate() const {
  if (!is_spd(stiffness)) throw ConfigError("stiffness K_D must be symmetric positive definite");
  if (!is_spd(damping)) throw ConfigError("damping K_B must be symmetric positive definite");
}

PresetSpec default_preset(Behavior behavior) {
  PresetSpec spec;
  switch (behavior) {
    case Behavior::Rigid:
      spec.stiffness << 800.0, 800.0, 800.0, 200.0, 200.0, 200.0;
      break;
    case Behavior::Compliant:
      spec.stiffness << 80.0, 80.0, 80.0, 20.0, 20.0, 20.0;
      break;
    case Behavior::Custom:
      throw ConfigError("custom gains have no preset");
  }
  return spec;
}

GainSet make_gains(const PresetSpec& spec, const Vector6& effective_inertia, Behavior label) {
  GainSet g;
  g.label = label;
  g.stiffness = spec.stiffness.asDiagonal();
  Vector6 damping;
  for (int i = 0; i < 6; ++i) {
    damping[i] = 2.0 * spec.damping_ratio * std::sqrt(spec.stiffness[i] * effective_inertia[i]);
  }
  g.damping = damping.asDiagonal();
  g.validate();
  return g;
}

GainSet preset_gains(Behavior behavior, const Vector6& effective_inertia) {
  return make_gains(default_preset(behavior), effective_inertia, behavior);
}

Vector6 impedance_wrench(const GainSet& gains, const EndEffectorState& ee) {
  return gains.stiffness * ee.error() - gains.damping * ee.x_dot;
}

Eigen::VectorXd control_force(const GainSet& gains, const EndEffectorState& ee, const JacobianMatrix& jac) {
  return jac.J.transpose() * impedance_wrench(gains, ee);
}

CartesianDynamics cartesian_projection(const DynamicsMatrices& dyn, const JacobianMatrix& jac) {
  const Eigen::MatrixXd j_inv = right_inverse(jac.J);
  const Eigen::MatrixXd j_inv_t = j_inv.transpose();
  CartesianDynamics out;
  out.inertia = j_inv_t * dyn.B * j_inv;
  out.inertia = 0.5 * (out.inertia + out.inertia.transpose()).eval();
  out.coriolis = j_inv_t * (dyn.C - dyn.B * j_inv * jac.J_dot) * j_inv;
  return out;
}

Vector6 expected_error_oracle(const CartesianDynamics& dyn, const GainSet& gains, const EndEffectorState& ee,
                              const ExternalWrench& f_ext) {
  Eigen::LLT<Matrix6> llt(gains.stiffness);
  if (llt.info() != Eigen::Success) throw SolveFailure("stiffness K_D is not positive definite");
  const Vector6 rhs = dyn.inertia * ee.x_ddot + (dyn.coriolis + gains.damping) * ee.x_dot - f_ext;
  return llt.solve(rhs);
}

double impedance_storage(const CartesianDynamics& dyn, const GainSet& gains, const EndEffectorState& ee) {
  const Vector6 e = ee.error();
  return 0.5 * ee.x_dot.dot(dyn.inertia * ee.x_dot) + 0.5 * e.dot(gains.stiffness * e);
}

}  // namespace handover
