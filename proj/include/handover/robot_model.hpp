#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "handover/spatial_math.hpp"

namespace handover {

/// One revolute arm link. The joint frame is the parent frame moved by
/// `origin`; the link rotates about `axis` (expressed in the joint frame)
/// and carries its mass at `com` (link frame).
struct Link {
  double mass = 0.0;
  Matrix3 inertia = Matrix3::Zero();  // about the COM, link frame
  Vector3 axis = Vector3::UnitZ();
  HomogeneousTransform origin;
  Vector3 com = Vector3::Zero();
};

/// Mass and geometry of the free-flying base plus its serial arm.
struct LinkParameters {
  double base_mass = 0.0;
  Matrix3 base_inertia = Matrix3::Zero();  // about the base COM (= base frame origin)
  std::vector<Link> links;
  HomogeneousTransform tool;  // end-effector (palm point) in the last link frame

  std::size_t joint_count() const { return links.size(); }
  std::size_t dof() const { return 6 + links.size(); }

  /// Throws ConfigError on non-positive masses, non-SPD inertias, non-unit axes or an empty arm.
  void validate() const;
};

/// 9.58 kg, 0.25 m cube base with a 3-link arm of 0.1 kg / 0.1 m links on
/// alternating z-y-z axes, mounted on the +x face.
LinkParameters default_free_flyer();

enum class JointMode {
  Free,    // arm joints integrate with the base
  Locked,  // arm joints held fixed, joint rates identically zero
};

/// xi = [p_b (m); rpy_b (rad); q (rad)] and its rate.
struct GeneralizedState {
  Eigen::VectorXd xi;
  Eigen::VectorXd xi_dot;

  static GeneralizedState zero(std::size_t joints);

  std::size_t joint_count() const { return static_cast<std::size_t>(xi.size()) - 6; }
  Vector3 base_position() const { return xi.head<3>(); }
  EulerAnglesRPY base_attitude() const { return EulerAnglesRPY::from_vector(xi.segment<3>(3)); }
};

/// Cartesian end-effector quantities; x = [p_e; rpy_e].
struct EndEffectorState {
  Vector6 x = Vector6::Zero();
  Vector6 x_dot = Vector6::Zero();
  Vector6 x_ddot = Vector6::Zero();
  Vector6 x_desired = Vector6::Zero();

  /// x_desired - x, recomputed on every call.
  Vector6 error() const { return pose_error(x_desired, x); }
};

/// Analytical Jacobian: angular rows are in rpy-rate coordinates.
struct JacobianMatrix {
  Eigen::MatrixXd J;
  Eigen::MatrixXd J_dot;
};

struct DynamicsMatrices {
  Eigen::MatrixXd B;  // inertia
  Eigen::MatrixXd C;  // Coriolis and centrifugal
};

struct GeneralizedForce {
  Eigen::VectorXd u;
  Eigen::VectorXd u_ext;

  static GeneralizedForce zero(std::size_t dof);
  Eigen::VectorXd total() const { return u + u_ext; }
};

HomogeneousTransform forward_kinematics(const LinkParameters& params, const GeneralizedState& state);

/// [p_e; rpy_e] of forward_kinematics.
Vector6 end_effector_pose(const LinkParameters& params, const GeneralizedState& state);

/// Geometric Jacobian (linear velocity, inertial angular velocity) of the palm point.
Eigen::MatrixXd geometric_jacobian(const LinkParameters& params, const Eigen::VectorXd& xi);

/// J maps xi_dot to [p_e_dot; rpy_e_dot]. J_dot is a central difference of J
/// along xi_dot. Throws NearSingularError when either the base or the
/// end-effector attitude is inside the singularity guard.
JacobianMatrix jacobian(const LinkParameters& params, const GeneralizedState& state);

Eigen::MatrixXd mass_matrix(const LinkParameters& params, const Eigen::VectorXd& xi);

/// Coriolis matrix from Christoffel symbols of the first kind of B, with
/// dB/dxi by central differences. In Locked mode only the 6x6 base block is
/// filled (joint rows and columns are zero) since joint rates vanish.
Eigen::MatrixXd coriolis_matrix(const LinkParameters& params, const GeneralizedState& state,
                                JointMode mode = JointMode::Free);

DynamicsMatrices dynamics_matrices(const LinkParameters& params, const GeneralizedState& state,
                                   JointMode mode = JointMode::Free);

/// d/dt B along xi_dot, using the same difference quotients as coriolis_matrix.
Eigen::MatrixXd mass_matrix_rate(const LinkParameters& params, const GeneralizedState& state);

double kinetic_energy(const LinkParameters& params, const GeneralizedState& state);

/// xi_ddot = B^-1 (u + u_ext - C xi_dot). Locked mode solves the base block
/// only and returns zero joint accelerations. Throws SolveFailure.
Eigen::VectorXd generalized_acceleration(const LinkParameters& params, const GeneralizedState& state,
                                         const GeneralizedForce& force, JointMode mode);

/// One classical RK4 step with the force held constant over the step.
GeneralizedState forward_dynamics_step(const LinkParameters& params, const GeneralizedState& state,
                                       const GeneralizedForce& force, double dt,
                                       JointMode mode = JointMode::Locked);

/// Maps a (stage) state to the generalized control force u.
using StateFeedback = std::function<Eigen::VectorXd(const GeneralizedState&)>;

/// RK4 step with u evaluated at every stage state, so state feedback is
/// integrated as a continuous-time law. u_ext is held over the step.
GeneralizedState forward_dynamics_step(const LinkParameters& params, const GeneralizedState& state,
                                       const StateFeedback& control, const Eigen::VectorXd& u_ext, double dt,
                                       JointMode mode = JointMode::Locked);

/// Columns of J (and J_dot) belonging to the base coordinates.
JacobianMatrix restrict_to_base(const JacobianMatrix& jac);
DynamicsMatrices restrict_to_base(const DynamicsMatrices& dyn);

}  // namespace handover
