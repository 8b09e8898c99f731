#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "handover/robot_model.hpp"
#include "handover/spatial_math.hpp"

namespace handover {

enum class Behavior { Rigid, Compliant, Custom };

std::string_view to_string(Behavior b);
std::optional<Behavior> parse_behavior(std::string_view name);

/// Cartesian stiffness K_D and damping K_B. Units: N/m and N*m/rad for the
/// stiffness, N*s/m and N*m*s/rad for the damping.
struct GainSet {
  Matrix6 stiffness = Matrix6::Identity();
  Matrix6 damping = Matrix6::Identity();
  Behavior label = Behavior::Custom;

  /// Throws ConfigError unless both matrices are symmetric positive definite.
  void validate() const;
};

/// Diagonal stiffness and damping ratio of a preset.
struct PresetSpec {
  Vector6 stiffness;
  double damping_ratio = 0.9;
};

PresetSpec default_preset(Behavior behavior);

/// K_D = diag(spec.stiffness), K_B = diag(2 * zeta * sqrt(k_i * m_i)) where
/// m_i is the diagonal of the Cartesian inertia the preset is tuned against.
GainSet make_gains(const PresetSpec& spec, const Vector6& effective_inertia, Behavior label);

GainSet preset_gains(Behavior behavior, const Vector6& effective_inertia);

/// Inertia and Coriolis matrices with respect to the end-effector pose.
struct CartesianDynamics {
  Matrix6 inertia;
  Matrix6 coriolis;
};

using ExternalWrench = Vector6;  // [force (N); rpy-dual torque (N*m)]

/// u = J^T (-K_B x_dot + K_D x_tilde), assuming a rest target.
Eigen::VectorXd control_force(const GainSet& gains, const EndEffectorState& ee, const JacobianMatrix& jac);

/// Cartesian wrench K_D x_tilde - K_B x_dot before the J^T mapping.
Vector6 impedance_wrench(const GainSet& gains, const EndEffectorState& ee);

/// B_x = J^-T B J^-1, C_x = J^-T (C - B J^-1 J_dot) J^-1. A square J is
/// inverted directly; a wide J uses the right pseudo-inverse. Throws
/// SolveFailure near Jacobian singularities.
CartesianDynamics cartesian_projection(const DynamicsMatrices& dyn, const JacobianMatrix& jac);

/// Error predicted by the closed-loop impedance model from observed motion:
/// K_D^-1 [B_x x_ddot + (C_x + K_B) x_dot - f_ext]. Validation only.
Vector6 expected_error_oracle(const CartesianDynamics& dyn, const GainSet& gains, const EndEffectorState& ee,
                              const ExternalWrench& f_ext);

/// Storage function 1/2 x_dot^T B_x x_dot + 1/2 x_tilde^T K_D x_tilde.
double impedance_storage(const CartesianDynamics& dyn, const GainSet& gains, const EndEffectorState& ee);

}  // namespace handover
