#include "handover/robot_model.hpp"

#include <cmath>
#include <string>

#include "handover/errors.hpp"

namespace handover {

namespace {

constexpr double kMassMatrixStep = 1e-6;  // rad (attitude) or rad (joints)
constexpr double kJacobianRateStep = 1e-6;  // s, along xi_dot

bool is_spd(const Matrix3& m) {
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Matrix3> llt(m);
  return llt.info() == Eigen::Success;
}

// Inertial-frame kinematic quantities of every body of the chain.
struct ChainFrames {
  HomogeneousTransform base;
  std::vector<HomogeneousTransform> links;  // link frames
  std::vector<Vector3> joint_axes;          // inertial
  std::vector<Vector3> joint_origins;       // inertial
  HomogeneousTransform end_effector;
  Matrix3 base_rate_map;
};

ChainFrames compute_frames(const LinkParameters& params, const Eigen::VectorXd& xi) {
  ChainFrames f;
  const auto attitude = EulerAnglesRPY::from_vector(xi.segment<3>(3));
  f.base = HomogeneousTransform::from_xyz_rpy(xi.head<3>(), attitude);
  f.base_rate_map = euler_rate_map(attitude);

  const std::size_t n = params.joint_count();
  f.links.reserve(n);
  f.joint_axes.reserve(n);
  f.joint_origins.reserve(n);
  HomogeneousTransform parent = f.base;
  for (std::size_t k = 0; k < n; ++k) {
    const Link& link = params.links[k];
    const HomogeneousTransform joint = parent * link.origin;
    f.joint_axes.push_back(joint.rotation * link.axis);
    f.joint_origins.push_back(joint.translation);
    parent = joint * HomogeneousTransform{axis_angle_rotation(link.axis, xi[6 + static_cast<Eigen::Index>(k)]),
                                          Vector3::Zero()};
    f.links.push_back(parent);
  }
  f.end_effector = parent * params.tool;
  return f;
}

// Linear (top) and angular (bottom) velocity Jacobian of a point rigidly
// attached to body `body` (0 = base, k = link k).
Eigen::MatrixXd point_jacobian(const ChainFrames& f, std::size_t dof, std::size_t body, const Vector3& point) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6, static_cast<Eigen::Index>(dof));
  jac.block<3, 3>(0, 0).setIdentity();
  jac.block<3, 3>(0, 3) = -skew(point - f.base.translation) * f.base_rate_map;
  jac.block<3, 3>(3, 3) = f.base_rate_map;
  for (std::size_t j = 0; j < body; ++j) {
    const auto col = static_cast<Eigen::Index>(6 + j);
    jac.block<3, 1>(0, col) = f.joint_axes[j].cross(point - f.joint_origins[j]);
    jac.block<3, 1>(3, col) = f.joint_axes[j];
  }
  return jac;
}

Eigen::MatrixXd analytical_jacobian(const LinkParameters& params, const Eigen::VectorXd& xi) {
  const ChainFrames f = compute_frames(params, xi);
  Eigen::MatrixXd jac = point_jacobian(f, params.dof(), params.joint_count(), f.end_effector.translation);
  const Matrix3 n_e = euler_rate_map(rotation_to_rpy(f.end_effector.rotation));
  jac.bottomRows<3>() = n_e.inverse() * jac.bottomRows<3>();
  return jac;
}

// dB/dxi_k for every coordinate k; position derivatives are identically zero
// because B does not depend on the base position.
std::vector<Eigen::MatrixXd> mass_matrix_derivatives(const LinkParameters& params, const Eigen::VectorXd& xi,
                                                     std::size_t coordinate_count) {
  const auto dof = static_cast<Eigen::Index>(params.dof());
  std::vector<Eigen::MatrixXd> d(static_cast<std::size_t>(dof), Eigen::MatrixXd::Zero(dof, dof));
  Eigen::VectorXd probe = xi;
  for (std::size_t k = 3; k < coordinate_count; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    probe[i] = xi[i] + kMassMatrixStep;
    const Eigen::MatrixXd plus = mass_matrix(params, probe);
    probe[i] = xi[i] - kMassMatrixStep;
    const Eigen::MatrixXd minus = mass_matrix(params, probe);
    probe[i] = xi[i];
    d[k] = (plus - minus) / (2.0 * kMassMatrixStep);
  }
  return d;
}

void check_state(const LinkParameters& params, const GeneralizedState& state) {
  const auto dof = static_cast<Eigen::Index>(params.dof());
  if (state.xi.size() != dof || state.xi_dot.size() != dof) {
    throw std::invalid_argument("state dimension " + std::to_string(state.xi.size()) + " does not match model dof " +
                                std::to_string(dof));
  }
}

}  // namespace

void LinkParameters::validate() const {
  if (links.empty()) throw ConfigError("model needs at least one arm joint");
  if (!(base_mass > 0.0) || !std::isfinite(base_mass)) throw ConfigError("base mass must be positive");
  if (!is_spd(base_inertia)) throw ConfigError("base inertia must be symmetric positive definite");
  for (std::size_t k = 0; k < links.size(); ++k) {
    const Link& l = links[k];
    const std::string which = "link " + std::to_string(k + 1);
    if (!(l.mass > 0.0) || !std::isfinite(l.mass)) throw ConfigError(which + ": mass must be positive");
    if (!is_spd(l.inertia)) throw ConfigError(which + ": inertia must be symmetric positive definite");
    if (std::abs(l.axis.norm() - 1.0) > 1e-12) throw ConfigError(which + ": joint axis must be unit length");
  }
}

LinkParameters default_free_flyer() {
  LinkParameters p;
  constexpr double side = 0.25;
  p.base_mass = 9.58;
  p.base_inertia = Matrix3::Identity() * (p.base_mass * side * side / 6.0);

  constexpr double link_mass = 0.1;
  constexpr double link_length = 0.1;
  constexpr double link_radius = 0.01;
  const double axial = 0.5 * link_mass * link_radius * link_radius;
  const double transverse = link_mass * (3.0 * link_radius * link_radius + link_length * link_length) / 12.0;
  const Vector3 axes[] = {Vector3::UnitZ(), Vector3::UnitY(), Vector3::UnitZ()};
  for (int k = 0; k < 3; ++k) {
    Link l;
    l.mass = link_mass;
    l.inertia = Vector3(axial, transverse, transverse).asDiagonal();
    l.axis = axes[k];
    l.origin.translation = Vector3(k == 0 ? side / 2.0 : link_length, 0.0, 0.0);
    l.com = Vector3(link_length / 2.0, 0.0, 0.0);
    p.links.push_back(l);
  }
  p.tool.translation = Vector3(link_length, 0.0, 0.0);
  return p;
}

GeneralizedState GeneralizedState::zero(std::size_t joints) {
  const auto dof = static_cast<Eigen::Index>(6 + joints);
  return {Eigen::VectorXd::Zero(dof), Eigen::VectorXd::Zero(dof)};
}

GeneralizedForce GeneralizedForce::zero(std::size_t dof) {
  const auto n = static_cast<Eigen::Index>(dof);
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
}

HomogeneousTransform forward_kinematics(const LinkParameters& params, const GeneralizedState& state) {
  check_state(params, state);
  return compute_frames(params, state.xi).end_effector;
}

Vector6 end_effector_pose(const LinkParameters& params, const GeneralizedState& state) {
  return pose_vector(forward_kinematics(params, state));
}

Eigen::MatrixXd geometric_jacobian(const LinkParameters& params, const Eigen::VectorXd& xi) {
  const ChainFrames f = compute_frames(params, xi);
  return point_jacobian(f, params.dof(), params.joint_count(), f.end_effector.translation);
}

JacobianMatrix jacobian(const LinkParameters& params, const GeneralizedState& state) {
  check_state(params, state);
  JacobianMatrix out;
  out.J = analytical_jacobian(params, state.xi);
  const Eigen::VectorXd step = kJacobianRateStep * state.xi_dot;
  out.J_dot = (analytical_jacobian(params, state.xi + step) - analytical_jacobian(params, state.xi - step)) /
              (2.0 * kJacobianRateStep);
  return out;
}

Eigen::MatrixXd mass_matrix(const LinkParameters& params, const Eigen::VectorXd& xi) {
  const ChainFrames f = compute_frames(params, xi);
  const std::size_t dof = params.dof();
  const auto n = static_cast<Eigen::Index>(dof);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);

  // Base: v = p_b_dot, omega = N_b rpy_dot.
  b.topLeftCorner<3, 3>() = params.base_mass * Matrix3::Identity();
  const Matrix3 base_inertia = f.base.rotation * params.base_inertia * f.base.rotation.transpose();
  b.block<3, 3>(3, 3) = f.base_rate_map.transpose() * base_inertia * f.base_rate_map;

  for (std::size_t k = 0; k < params.joint_count(); ++k) {
    const Link& link = params.links[k];
    const HomogeneousTransform& frame = f.links[k];
    const Eigen::MatrixXd jac = point_jacobian(f, dof, k + 1, frame.apply(link.com));
    const Matrix3 inertia = frame.rotation * link.inertia * frame.rotation.transpose();
    const auto jv = jac.topRows<3>();
    const auto jw = jac.bottomRows<3>();
    b.noalias() += link.mass * jv.transpose() * jv;
    b.noalias() += jw.transpose() * inertia * jw;
  }
  return 0.5 * (b + b.transpose());
}

Eigen::MatrixXd coriolis_matrix(const LinkParameters& params, const GeneralizedState& state, JointMode mode) {
  check_state(params, state);
  const std::size_t dof = params.dof();
  const std::size_t active = mode == JointMode::Locked ? 6 : dof;
  const auto d = mass_matrix_derivatives(params, state.xi, active);
  const auto& v = state.xi_dot;

  const auto n = static_cast<Eigen::Index>(dof);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < active; ++i) {
    for (std::size_t j = 0; j < active; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < active; ++k) {
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j),
                   kk = static_cast<Eigen::Index>(k);
        sum += (d[k](ii, jj) + d[j](ii, kk) - d[i](jj, kk)) * v[kk];
      }
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.5 * sum;
    }
  }
  return c;
}

DynamicsMatrices dynamics_matrices(const LinkParameters& params, const GeneralizedState& state, JointMode mode) {
  return {mass_matrix(params, state.xi), coriolis_matrix(params, state, mode)};
}

Eigen::MatrixXd mass_matrix_rate(const LinkParameters& params, const GeneralizedState& state) {
  check_state(params, state);
  const auto d = mass_matrix_derivatives(params, state.xi, params.dof());
  const auto n = static_cast<Eigen::Index>(params.dof());
  Eigen::MatrixXd rate = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) rate += d[static_cast<std::size_t>(k)] * state.xi_dot[k];
  return rate;
}

double kinetic_energy(const LinkParameters& params, const GeneralizedState& state) {
  check_state(params, state);
  return 0.5 * state.xi_dot.dot(mass_matrix(params, state.xi) * state.xi_dot);
}

Eigen::VectorXd generalized_acceleration(const LinkParameters& params, const GeneralizedState& state,
                                         const GeneralizedForce& force, JointMode mode) {
  const DynamicsMatrices dyn = dynamics_matrices(params, state, mode);
  const Eigen::VectorXd rhs = force.total() - dyn.C * state.xi_dot;
  const auto n = static_cast<Eigen::Index>(params.dof());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);

  if (mode == JointMode::Locked) {
    const Matrix6 b = dyn.B.topLeftCorner<6, 6>();
    Eigen::LLT<Matrix6> llt(b);
    if (llt.info() != Eigen::Success) throw SolveFailure("base inertia block is not positive definite");
    acc.head<6>() = llt.solve(rhs.head<6>());
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(dyn.B);
    if (llt.info() != Eigen::Success) throw SolveFailure("inertia matrix is not positive definite");
    acc = llt.solve(rhs);
  }
  if (!acc.allFinite()) throw SolveFailure("non-finite generalized acceleration");
  return acc;
}

GeneralizedState forward_dynamics_step(const LinkParameters& params, const GeneralizedState& state,
                                       const GeneralizedForce& force, double dt, JointMode mode) {
  return forward_dynamics_step(
      params, state, [&force](const GeneralizedState&) { return force.u; }, force.u_ext, dt, mode);
}

GeneralizedState forward_dynamics_step(const LinkParameters& params, const GeneralizedState& state,
                                       const StateFeedback& control, const Eigen::VectorXd& u_ext, double dt,
                                       JointMode mode) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  check_state(params, state);

  GeneralizedState s0 = state;
  if (mode == JointMode::Locked) s0.xi_dot.tail(static_cast<Eigen::Index>(params.joint_count())).setZero();

  struct Derivative {
    Eigen::VectorXd dxi, dxi_dot;
  };
  auto eval = [&](const GeneralizedState& s) {
    return Derivative{s.xi_dot, generalized_acceleration(params, s, GeneralizedForce{control(s), u_ext}, mode)};
  };
  auto advance = [&](const Derivative& k, double h) {
    return GeneralizedState{s0.xi + h * k.dxi, s0.xi_dot + h * k.dxi_dot};
  };

  const Derivative k1 = eval(s0);
  const Derivative k2 = eval(advance(k1, dt / 2.0));
  const Derivative k3 = eval(advance(k2, dt / 2.0));
  const Derivative k4 = eval(advance(k3, dt));

  GeneralizedState next;
  next.xi = s0.xi + dt / 6.0 * (k1.dxi + 2.0 * k2.dxi + 2.0 * k3.dxi + k4.dxi);
  next.xi_dot = s0.xi_dot + dt / 6.0 * (k1.dxi_dot + 2.0 * k2.dxi_dot + 2.0 * k3.dxi_dot + k4.dxi_dot);
  if (mode == JointMode::Locked) {
    const auto n = static_cast<Eigen::Index>(params.joint_count());
    next.xi.tail(n) = s0.xi.tail(n);
    next.xi_dot.tail(n).setZero();
  }
  return next;
}

JacobianMatrix restrict_to_base(const JacobianMatrix& jac) {
  return {jac.J.leftCols<6>(), jac.J_dot.leftCols<6>()};
}

DynamicsMatrices restrict_to_base(const DynamicsMatrices& dyn) {
  return {dyn.B.topLeftCorner<6, 6>(), dyn.C.topLeftCorner<6, 6>()};
}

}  // namespace handover
