#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "handover/errors.hpp"
#include "handover/robot_model.hpp"

using namespace handover;

namespace {

// Rodrigues' formula, written out independently of the library.
Matrix4 naive_rotation(const Vector3& k, double a) {
  Matrix3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  Matrix4 m = Matrix4::Identity();
  m.topLeftCorner<3, 3>() = Matrix3::Identity() + std::sin(a) * kx + (1 - std::cos(a)) * kx * kx;
  return m;
}

Matrix4 naive_translation(const Vector3& p) {
  Matrix4 m = Matrix4::Identity();
  m.topRightCorner<3, 1>() = p;
  return m;
}

// Frames of every body (base first) by multiplying raw 4x4 matrices down the chain.
std::vector<Matrix4> naive_chain(const LinkParameters& p, const Eigen::VectorXd& xi) {
  std::vector<Matrix4> frames;
  Matrix4 t = naive_translation(xi.head<3>()) * naive_rotation(Vector3::UnitZ(), xi[5]) *
              naive_rotation(Vector3::UnitY(), xi[4]) * naive_rotation(Vector3::UnitX(), xi[3]);
  frames.push_back(t);
  for (std::size_t k = 0; k < p.links.size(); ++k) {
    t = t * p.links[k].origin.matrix() * naive_rotation(p.links[k].axis, xi[6 + static_cast<Eigen::Index>(k)]);
    frames.push_back(t);
  }
  return frames;
}

Matrix4 naive_fk(const LinkParameters& p, const Eigen::VectorXd& xi) {
  return naive_chain(p, xi).back() * p.tool.matrix();
}

// Sum over bodies of 1/2 m |v_com|^2 + 1/2 w^T I_world w, with twists from
// central differences of the naive chain.
double naive_kinetic_energy(const LinkParameters& p, const GeneralizedState& s) {
  const double h = 1e-6;
  const auto plus = naive_chain(p, s.xi + h * s.xi_dot);
  const auto minus = naive_chain(p, s.xi - h * s.xi_dot);
  const auto now = naive_chain(p, s.xi);
  double energy = 0.0;
  for (std::size_t b = 0; b < now.size(); ++b) {
    const double m = b == 0 ? p.base_mass : p.links[b - 1].mass;
    const Matrix3 inertia = b == 0 ? p.base_inertia : p.links[b - 1].inertia;
    const Vector3 com = b == 0 ? Vector3::Zero() : p.links[b - 1].com;
    auto world_com = [&](const Matrix4& f) { return Vector3(f.topLeftCorner<3, 3>() * com + f.topRightCorner<3, 1>()); };
    const Vector3 v = (world_com(plus[b]) - world_com(minus[b])) / (2 * h);
    const Matrix3 r = now[b].topLeftCorner<3, 3>();
    const Matrix3 w_hat = (plus[b].topLeftCorner<3, 3>() - minus[b].topLeftCorner<3, 3>()) / (2 * h) * r.transpose();
    const Vector3 w(w_hat(2, 1), w_hat(0, 2), w_hat(1, 0));
    energy += 0.5 * m * v.squaredNorm() + 0.5 * w.dot(r * inertia * r.transpose() * w);
  }
  return energy;
}

struct Sampler {
  std::mt19937 rng;
  explicit Sampler(unsigned seed) : rng(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

  GeneralizedState state(std::size_t joints, double rate_scale = 1.0) {
    GeneralizedState s = GeneralizedState::zero(joints);
    for (int i = 0; i < 3; ++i) s.xi[i] = uniform(-1.0, 1.0);
    s.xi[3] = uniform(-0.6, 0.6);
    s.xi[4] = uniform(-0.6, 0.6);
    s.xi[5] = uniform(-0.6, 0.6);
    for (std::size_t j = 0; j < joints; ++j) s.xi[6 + static_cast<Eigen::Index>(j)] = uniform(-0.6, 0.6);
    for (Eigen::Index i = 0; i < s.xi_dot.size(); ++i) s.xi_dot[i] = rate_scale * uniform(-0.5, 0.5);
    return s;
  }
};

}  // namespace

TEST_CASE("default model parameters") {
  const auto p = default_free_flyer();
  CHECK_NOTHROW(p.validate());
  CHECK(p.joint_count() == 3);
  CHECK(p.dof() == 9);
  CHECK(p.base_mass == doctest::Approx(9.58));
  for (const auto& l : p.links) {
    CHECK(l.mass == doctest::Approx(0.1));
    CHECK(std::abs(l.axis.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("model validation rejects bad parameters") {
  auto p = default_free_flyer();
  SUBCASE("negative mass") { p.links[1].mass = -0.1; }
  SUBCASE("indefinite inertia") { p.base_inertia(2, 2) = -1.0; }
  SUBCASE("asymmetric inertia") { p.links[0].inertia(0, 1) = 1e-3; }
  SUBCASE("axis not unit") { p.links[2].axis = Vector3(0, 0, 2); }
  SUBCASE("no arm") { p.links.clear(); }
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("forward kinematics") {
  const auto p = default_free_flyer();
  auto s = GeneralizedState::zero(3);

  SUBCASE("straight chain") {
    const auto t = forward_kinematics(p, s);
    CHECK((t.translation - Vector3(0.425, 0, 0)).norm() < 1e-15);
    CHECK(t.rotation.isApprox(Matrix3::Identity(), 0));
  }

  SUBCASE("base translation superposes") {
    const Vector3 before = forward_kinematics(p, s).translation;
    s.xi.head<3>() = Vector3(1, 2, 3);
    CHECK((forward_kinematics(p, s).translation - before - Vector3(1, 2, 3)).norm() < 1e-15);
  }

  SUBCASE("random states match the naive chain walker") {
    Sampler rnd(21);
    for (int i = 0; i < 100; ++i) {
      const auto r = rnd.state(3);
      CHECK((forward_kinematics(p, r).matrix() - naive_fk(p, r.xi)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }

  SUBCASE("singular base attitude") {
    s.xi[4] = M_PI / 2;
    CHECK_THROWS_AS(jacobian(p, s), NearSingularError);
  }
}

TEST_CASE("jacobian") {
  const auto p = default_free_flyer();

  SUBCASE("rigid translation") {
    auto s = GeneralizedState::zero(3);
    s.xi_dot.head<3>() = Vector3(0.3, -0.1, 0.2);
    const Vector6 xdot = jacobian(p, s).J * s.xi_dot;
    CHECK((xdot.head<3>() - Vector3(0.3, -0.1, 0.2)).norm() < 1e-15);
    CHECK(xdot.tail<3>().norm() < 1e-15);
  }

  SUBCASE("zero rate") {
    Sampler rnd(5);
    auto s = rnd.state(3);
    s.xi_dot.setZero();
    const auto jac = jacobian(p, s);
    CHECK((jac.J * s.xi_dot).norm() == 0.0);
    CHECK(jac.J_dot.norm() == 0.0);
  }

  SUBCASE("finite-difference forward kinematics") {
    Sampler rnd(9);
    const double h = 1e-6;
    for (int i = 0; i < 100; ++i) {
      auto s = rnd.state(3);
      GeneralizedState a = s, b = s;
      a.xi += h * s.xi_dot;
      b.xi -= h * s.xi_dot;
      const Vector6 fd = pose_error(end_effector_pose(p, a), end_effector_pose(p, b)) / (2 * h);
      const Vector6 xdot = jacobian(p, s).J * s.xi_dot;
      CHECK((xdot - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
  }

  SUBCASE("J_dot is the rate of J") {
    Sampler rnd(10);
    auto s = rnd.state(3);
    const double h = 1e-5;
    GeneralizedState a = s, b = s;
    a.xi += h * s.xi_dot;
    b.xi -= h * s.xi_dot;
    const Eigen::MatrixXd fd = (jacobian(p, a).J - jacobian(p, b).J) / (2 * h);
    CHECK((jacobian(p, s).J_dot - fd).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("restriction keeps the base columns") {
    Sampler rnd(12);
    const auto s = rnd.state(3);
    const auto full = jacobian(p, s);
    const auto base = restrict_to_base(full);
    CHECK(base.J.cols() == 6);
    CHECK(base.J == full.J.leftCols<6>());
    CHECK(base.J_dot == full.J_dot.leftCols<6>());
  }
}

TEST_CASE("mass matrix") {
  const auto p = default_free_flyer();

  SUBCASE("single body translation block") {
    LinkParameters single = p;
    single.links.resize(1);
    single.links[0].mass = 0.0;
    single.links[0].inertia.setZero();
    const auto b = mass_matrix(single, GeneralizedState::zero(1).xi);
    CHECK((b.topLeftCorner<3, 3>() - 9.58 * Matrix3::Identity()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((b.block<3, 3>(3, 3) - single.base_inertia).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("symmetric positive definite") {
    Sampler rnd(31);
    for (int i = 0; i < 100; ++i) {
      const auto b = mass_matrix(p, rnd.state(3).xi);
      CHECK((b - b.transpose()).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b).eigenvalues().minCoeff() > 0.0);
    }
  }

  SUBCASE("kinetic energy equals the per-body sum") {
    Sampler rnd(32);
    for (int i = 0; i < 50; ++i) {
      const auto s = rnd.state(3, 2.0);
      const double t = kinetic_energy(p, s);
      CHECK(t == doctest::Approx(0.5 * s.xi_dot.dot(mass_matrix(p, s.xi) * s.xi_dot)).epsilon(1e-14));
      CHECK(t == doctest::Approx(naive_kinetic_energy(p, s)).epsilon(1e-8));
    }
  }

  SUBCASE("linear in mass") {
    Sampler rnd(33);
    const auto xi = rnd.state(3).xi;
    LinkParameters scaled = p;
    scaled.base_mass *= 2.0;
    scaled.base_inertia *= 2.0;
    for (auto& l : scaled.links) {
      l.mass *= 2.0;
      l.inertia *= 2.0;
    }
    CHECK((mass_matrix(scaled, xi) - 2.0 * mass_matrix(p, xi)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("coriolis matrix") {
  const auto p = default_free_flyer();
  Sampler rnd(41);

  SUBCASE("vanishes at rest") {
    auto s = rnd.state(3);
    s.xi_dot.setZero();
    CHECK((coriolis_matrix(p, s) * s.xi_dot).norm() == 0.0);
  }

  SUBCASE("B_dot - 2C is skew along the motion") {
    for (int i = 0; i < 100; ++i) {
      const auto s = rnd.state(3, 2.0);
      const Eigen::MatrixXd n = mass_matrix_rate(p, s) - 2.0 * coriolis_matrix(p, s);
      CHECK(std::abs(s.xi_dot.dot(n * s.xi_dot)) < 1e-8 * s.xi_dot.squaredNorm());
    }
  }

  SUBCASE("B_dot matches a finite difference of B") {
    const auto s = rnd.state(3);
    const double h = 1e-5;
    const Eigen::MatrixXd fd = (mass_matrix(p, s.xi + h * s.xi_dot) - mass_matrix(p, s.xi - h * s.xi_dot)) / (2 * h);
    CHECK((mass_matrix_rate(p, s) - fd).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("locked mode fills only the base block") {
    auto s = rnd.state(3);
    s.xi_dot.tail<3>().setZero();
    const Eigen::MatrixXd full = coriolis_matrix(p, s, JointMode::Free);
    const Eigen::MatrixXd locked = coriolis_matrix(p, s, JointMode::Locked);
    CHECK((locked.topLeftCorner<6, 6>() - full.topLeftCorner<6, 6>()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(locked.bottomRows<3>().norm() == 0.0);
    CHECK(locked.rightCols<3>().norm() == 0.0);
  }
}

TEST_CASE("forward dynamics") {
  const auto p = default_free_flyer();
  const double total_mass = 9.58 + 0.3;

  SUBCASE("equilibrium") {
    auto s = GeneralizedState::zero(3);
    s.xi << 0.1, 0.2, 0.3, 0.1, -0.2, 0.3, 0.2, 0.1, -0.3;
    const auto next = forward_dynamics_step(p, s, GeneralizedForce::zero(9), 1e-3, JointMode::Free);
    CHECK(next.xi == s.xi);
    CHECK(next.xi_dot == s.xi_dot);
  }

  SUBCASE("Newton's second law on the locked body") {
    auto s = GeneralizedState::zero(3);
    auto f = GeneralizedForce::zero(9);
    f.u[0] = 2.0;
    for (int k = 0; k < 1000; ++k) s = forward_dynamics_step(p, s, f, 1e-3);
    const double expected = 0.5 * (2.0 / total_mass) * 1.0 * 1.0;
    CHECK(s.xi[0] == doctest::Approx(expected).epsilon(1e-6));
    CHECK(std::abs(s.xi[1]) < 1e-12);
    CHECK(s.xi.segment<3>(3).norm() < 1e-12);
  }

  SUBCASE("locked joints stay bit-identical") {
    Sampler rnd(51);
    auto s = rnd.state(3);
    const Eigen::VectorXd q0 = s.xi.tail<3>();
    auto f = GeneralizedForce::zero(9);
    f.u << 0.5, -0.2, 0.1, 0.01, 0.02, -0.01, 0.3, 0.3, 0.3;
    for (int k = 0; k < 200; ++k) {
      s = forward_dynamics_step(p, s, f, 1e-3, JointMode::Locked);
      REQUIRE(s.xi.tail<3>() == q0);
      REQUIRE(s.xi_dot.tail<3>().norm() == 0.0);
    }
  }

  SUBCASE("passive energy conservation over 1 s") {
    Sampler rnd(52);
    for (JointMode mode : {JointMode::Free, JointMode::Locked}) {
      auto s = rnd.state(3);
      if (mode == JointMode::Locked) s.xi_dot.tail<3>().setZero();
      const double t0 = kinetic_energy(p, s);
      for (int k = 0; k < 1000; ++k) s = forward_dynamics_step(p, s, GeneralizedForce::zero(9), 1e-3, mode);
      CHECK(std::abs(kinetic_energy(p, s) - t0) / t0 < 1e-6);
    }
  }

  SUBCASE("fourth-order convergence under step halving") {
    Sampler rnd(53);
    const auto s0 = rnd.state(3, 4.0);
    auto f = GeneralizedForce::zero(9);
    f.u << 1.0, 0.5, -0.5, 0.05, -0.02, 0.03, 0.002, -0.001, 0.001;
    auto run = [&](double dt) {
      auto s = s0;
      const int steps = static_cast<int>(std::lround(0.4 / dt));
      for (int k = 0; k < steps; ++k) s = forward_dynamics_step(p, s, f, dt, JointMode::Free);
      return s.xi;
    };
    const Eigen::VectorXd a = run(0.04), b = run(0.02), c = run(0.01);
    const double ratio = (a - b).norm() / (b - c).norm();
    // 2^4 for an O(dt^4) method
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
  }

  SUBCASE("state feedback integrates a spring as a continuous law") {
    // Undamped spring on the base x coordinate: energy must be conserved to
    // RK4 accuracy, which needs u re-evaluated at every stage.
    const double k_spring = 400.0;
    const auto spring = [&](const GeneralizedState& s) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(9);
      u[0] = -k_spring * s.xi[0];
      return u;
    };
    auto energy = [&](const GeneralizedState& s) { return kinetic_energy(p, s) + 0.5 * k_spring * s.xi[0] * s.xi[0]; };
    auto s = GeneralizedState::zero(3);
    s.xi[0] = 0.05;
    const double e0 = energy(s);
    for (int k = 0; k < 1000; ++k) {
      const double before = energy(s);
      s = forward_dynamics_step(p, s, spring, Eigen::VectorXd::Zero(9), 1e-3);
      CHECK(energy(s) <= before + 1e-12);
    }
    CHECK(std::abs(energy(s) - e0) / e0 < 1e-8);

    auto f = GeneralizedForce::zero(9);
    f.u << 0.3, 0, 0.1, 0, 0.01, 0, 0, 0, 0;
    f.u_ext[1] = -0.2;
    const auto held = [&](const GeneralizedState&) { return f.u; };
    const auto a = forward_dynamics_step(p, s, f, 1e-3);
    const auto b = forward_dynamics_step(p, s, held, f.u_ext, 1e-3);
    CHECK(a.xi == b.xi);
    CHECK(a.xi_dot == b.xi_dot);
  }

  SUBCASE("acceleration solve") {
    Sampler rnd(54);
    const auto s = rnd.state(3);
    auto f = GeneralizedForce::zero(9);
    f.u_ext << 0.2, 0.1, 0.0, 0.01, 0.0, 0.0, 0.001, 0.0, 0.0;
    const auto dyn = dynamics_matrices(p, s);
    const Eigen::VectorXd acc = generalized_acceleration(p, s, f, JointMode::Free);
    CHECK((dyn.B * acc + dyn.C * s.xi_dot - f.total()).norm() < 1e-12);

    LinkParameters broken = p;
    broken.base_mass = 0.0;
    broken.base_inertia.setZero();
    for (auto& l : broken.links) {
      l.mass = 0.0;
      l.inertia.setZero();
    }
    CHECK_THROWS_AS(generalized_acceleration(broken, s, f, JointMode::Free), SolveFailure);
  }
}
