#include "handover/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <ostream>
#include <sstream>

#include "handover/errors.hpp"
#include "handover/impedance.hpp"

namespace handover {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Minimum-jerk reference between two poses for the waypoint controller.
struct MotionPlan {
  Vector6 start = Vector6::Zero();
  Vector6 goal = Vector6::Zero();
  double t0 = 0.0;
  double duration = 0.0;
  bool has_goal = false;

  static MotionPlan hold(const Vector6& pose, double t) { return {pose, pose, t, 0.0, false}; }

  static MotionPlan to(const Vector6& from, const Vector6& goal, double t, const MotionConfig& cfg) {
    const Vector6 delta = pose_error(goal, from);
    // Peak speed of a minimum-jerk profile is 1.875x its mean speed.
    const double linear = 1.875 * delta.head<3>().norm() / cfg.max_speed;
    const double angular = 1.875 * delta.tail<3>().cwiseAbs().maxCoeff() / cfg.max_angular_speed;
    return {from, goal, t, std::max({cfg.min_duration, linear, angular}), true};
  }

  Vector6 reference(double t) const {
    const double s = duration > 0.0 ? std::clamp((t - t0) / duration, 0.0, 1.0) : 1.0;
    const double blend = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    return start + blend * pose_error(goal, start);
  }

  bool finished(double t) const { return t >= t0 + duration; }
};

class ScenarioRun {
 public:
  explicit ScenarioRun(const ScenarioConfig& cfg) : cfg_(cfg), mode_(cfg.joint_mode()) {}

  RunResult run();

 private:
  struct Kinematics {
    JacobianMatrix full;
    JacobianMatrix used;  // base columns in locked mode
    Eigen::VectorXd rates_used;
    Vector6 x;
    Vector6 x_dot;
  };

  Kinematics kinematics(const GeneralizedState& s) const;
  void setup();
  void apply(const FsmCommand& cmd, double t, std::size_t step, const Kinematics& k);
  void update_possession(bool hand_gripping, const Vector3& hand_position, double t, std::size_t step);
  void log(double t, std::size_t step, std::string source, std::string event, int attempt);

  const ScenarioConfig& cfg_;
  const JointMode mode_;

  GainSet gains_;
  GainSet motion_gains_;
  FsmConfig fsm_config_;
  std::vector<Direction> legs_;
  std::size_t leg_ = 0;
  FsmState fsm_;

  GeneralizedState state_;
  GripperState gripper_;
  Possession possession_ = Possession::Free;
  Vector3 object_position_ = Vector3::Zero();
  bool ic_active_ = false;
  Vector6 rest_pose_ = Vector6::Zero();
  MotionPlan plan_;

  double transfer_start_ = -1.0;
  RunResult result_;
  std::vector<std::string> step_events_;
};

ScenarioRun::Kinematics ScenarioRun::kinematics(const GeneralizedState& s) const {
  Kinematics k;
  k.full = jacobian(cfg_.model, s);
  if (mode_ == JointMode::Locked) {
    k.used = restrict_to_base(k.full);
    k.rates_used = s.xi_dot.head<6>();
  } else {
    k.used = k.full;
    k.rates_used = s.xi_dot;
  }
  k.x = end_effector_pose(cfg_.model, s);
  k.x_dot = k.used.J * k.rates_used;
  return k;
}

void ScenarioRun::setup() {
  state_ = cfg_.initial_state;
  if (mode_ == JointMode::Locked) state_.xi_dot.tail(static_cast<Eigen::Index>(cfg_.model.joint_count())).setZero();

  // Gains are tuned against the Cartesian inertia at the initial pose.
  GeneralizedState at_rest = state_;
  at_rest.xi_dot.setZero();
  const Kinematics k0 = kinematics(at_rest);
  DynamicsMatrices dyn = dynamics_matrices(cfg_.model, at_rest, mode_);
  if (mode_ == JointMode::Locked) dyn = restrict_to_base(dyn);
  const Vector6 effective_inertia = cartesian_projection(dyn, k0.used).inertia.diagonal();

  switch (cfg_.behavior) {
    case Behavior::Rigid: gains_ = make_gains(cfg_.rigid, effective_inertia, Behavior::Rigid); break;
    case Behavior::Compliant: gains_ = make_gains(cfg_.compliant, effective_inertia, Behavior::Compliant); break;
    case Behavior::Custom: gains_ = *cfg_.custom_gains; break;
  }
  result_.gains = gains_;
  motion_gains_ = make_gains({cfg_.motion.stiffness, cfg_.motion.damping_ratio}, effective_inertia, Behavior::Custom);

  fsm_config_.trigger = {cfg_.thresholds.alpha, cfg_.thresholds.window};
  fsm_config_.max_retries = cfg_.thresholds.max_retries;
  switch (cfg_.mode) {
    case ScenarioMode::Validation: break;
    case ScenarioMode::RobotToHuman: legs_ = {Direction::RobotToHuman}; break;
    case ScenarioMode::HumanToRobot: legs_ = {Direction::HumanToRobot}; break;
    case ScenarioMode::Collaborative: legs_ = {Direction::RobotToHuman, Direction::HumanToRobot}; break;
  }
  if (!legs_.empty()) fsm_ = FsmState::start(legs_.front());

  gripper_.beta_threshold = cfg_.thresholds.beta;
  object_position_ = cfg_.object.position;
  if (cfg_.hand.initially_holding) {
    possession_ = Possession::Hand;
    object_position_ = cfg_.hand.initial_pose.head<3>();
  }

  ic_active_ = cfg_.mode == ScenarioMode::Validation;
  rest_pose_ = k0.x + cfg_.desired_offset;
  plan_ = MotionPlan::hold(k0.x, 0.0);
}

void ScenarioRun::log(double t, std::size_t step, std::string source, std::string event, int attempt) {
  step_events_.push_back(event);
  result_.events.push_back({t, step, std::move(source), std::move(event), attempt});
}

void ScenarioRun::apply(const FsmCommand& cmd, double t, std::size_t step, const Kinematics& k) {
  for (const auto& e : cmd.events) log(t, step, "fsm", e, fsm_.attempt_count);
  if (cmd.gripper) {
    if (*cmd.gripper == GripperCommand::Open) {
      gripper_.command_open();
    } else {
      const bool captured = possession_ != Possession::Robot &&
                            (object_position_ - k.x.head<3>()).norm() <= cfg_.gripper.capture_radius;
      gripper_.command_close(captured, cfg_.object.width);
    }
  }
  if (cmd.waypoint) {
    Vector6 goal = cfg_.handover_pose;
    if (*cmd.waypoint == WaypointGoal::Object) goal = cfg_.object_pose();
    if (*cmd.waypoint == WaypointGoal::Retract) goal = cfg_.retract_pose;
    plan_ = MotionPlan::to(k.x, goal, t, cfg_.motion);
  }
  if (cmd.impedance) {
    ic_active_ = *cmd.impedance;
    if (ic_active_) {
      rest_pose_ = k.x;
    } else {
      plan_ = MotionPlan::hold(k.x, t);
    }
  }
  if (cmd.signal) {
    const SignalEvent s = signal_user(*cmd.signal, t, fsm_.attempt_count);
    if (s.kind == SignalKind::Ready && transfer_start_ < 0.0) transfer_start_ = t;
  }
  if (fsm_.node == FsmNode::DeactivateIC && transfer_start_ >= 0.0) {
    result_.summary.transfer_duration += t - transfer_start_;
    transfer_start_ = -1.0;
  }
}

void ScenarioRun::update_possession(bool hand_gripping, const Vector3& hand_position, double t, std::size_t step) {
  Possession next = Possession::Free;
  if (gripper_.object_attached) {
    next = Possession::Robot;
  } else if (hand_gripping &&
             (possession_ == Possession::Hand ||
              (object_position_ - hand_position).norm() <= cfg_.hand.contact_radius)) {
    next = Possession::Hand;
  }
  if (next != possession_) {
    log(t, step, "harness", "possession_" + std::string(to_string(next)), fsm_.attempt_count);
    possession_ = next;
  }
}

RunResult ScenarioRun::run() {
  setup();
  auto& summary = result_.summary;
  summary.scenario = cfg_.name;
  summary.mode = cfg_.mode;
  summary.behavior = cfg_.behavior;

  const std::size_t steps = horizon_steps(cfg_);
  result_.records.reserve(steps);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  int attempts_before_leg = 0;

  for (std::size_t step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) * cfg_.dt;
    step_events_.clear();
    try {
      const Kinematics k = kinematics(state_);

      // The agent sees the object where its current holder carries it.
      const HandOutput pose_only = run_hand_script(cfg_.hand, t, cfg_.dt, WorldView{});
      if (possession_ == Possession::Robot) object_position_ = k.x.head<3>();
      if (possession_ == Possession::Hand) object_position_ = pose_only.hand_pose.head<3>();
      const HandOutput hand = run_hand_script(cfg_.hand, t, cfg_.dt, {k.x, possession_, object_position_});
      for (const auto& e : hand.events) log(t, step, "agent", e.name, fsm_.attempt_count);
      const Vector3 hand_position = hand.hand_pose.head<3>();
      update_possession(hand.gripping, hand_position, t, step);

      const bool ic_this_step = ic_active_;
      EndEffectorState ee;
      ee.x = k.x;
      ee.x_dot = k.x_dot;
      Vector6 wrench;
      if (ic_this_step) {
        ee.x_desired = rest_pose_;
        wrench = impedance_wrench(gains_, ee);
      } else {
        ee.x_desired = plan_.reference(t);
        wrench = impedance_wrench(motion_gains_, ee);
      }
      GeneralizedForce force{k.full.J.transpose() * wrench, k.full.J.transpose() * hand.f_ext};

      const Eigen::VectorXd xi_ddot = generalized_acceleration(cfg_.model, state_, force, mode_);
      const Eigen::VectorXd acc = mode_ == JointMode::Locked ? Eigen::VectorXd(xi_ddot.head<6>()) : xi_ddot;
      ee.x_ddot = k.used.J * acc + k.used.J_dot * k.rates_used;

      TrajectoryRecord rec;
      rec.t = t;
      rec.xi = state_.xi;
      rec.xi_dot = state_.xi_dot;
      rec.x = ee.x;
      rec.x_desired = ee.x_desired;
      rec.x_dot = ee.x_dot;
      rec.x_ddot = ee.x_ddot;
      rec.x_tilde = ee.error();
      rec.f_ext = hand.f_ext;
      rec.ic_active = ic_this_step;
      rec.gripper_aperture = gripper_.aperture;
      rec.object_attached = gripper_.object_attached;
      if (ic_this_step) {
        DynamicsMatrices dyn = dynamics_matrices(cfg_.model, state_, mode_);
        if (mode_ == JointMode::Locked) dyn = restrict_to_base(dyn);
        const CartesianDynamics cd = cartesian_projection(dyn, k.used);
        rec.x_tilde_oracle = expected_error_oracle(cd, gains_, ee, hand.f_ext);
        summary.peak_error = summary.peak_error.cwiseMax(rec.x_tilde.cwiseAbs());
      } else {
        rec.x_tilde_oracle.setConstant(nan);
      }

      if (!legs_.empty() && !fsm_.terminal()) {
        FsmObservation obs;
        obs.ee_velocity_norm = ee.x_dot.head<3>().norm();
        obs.gripper = gripper_;
        obs.gripper_settled = gripper_.settled(cfg_.gripper);
        obs.robot_at_waypoint = plan_.has_goal && plan_.finished(t) &&
                                pose_error(plan_.goal, ee.x).cwiseAbs().maxCoeff() <= cfg_.motion.position_tolerance &&
                                ee.x_dot.cwiseAbs().maxCoeff() <= cfg_.motion.velocity_tolerance;
        obs.ic_active = ic_active_;
        const FsmStep next = step_fsm(fsm_, obs, fsm_config_);
        fsm_ = next.state;
        apply(next.command, t, step, k);
        update_possession(hand.gripping, hand_position, t, step);

        if (fsm_.node == FsmNode::Done && leg_ + 1 < legs_.size()) {
          attempts_before_leg += fsm_.attempt_count;
          ++leg_;
          fsm_ = FsmState::start(legs_[leg_]);
          log(t, step, "harness", "leg_start_" + std::string(to_string(legs_[leg_])), 0);
        }
      }
      summary.attempts = attempts_before_leg + fsm_.attempt_count;
      rec.fsm_node = fsm_.node;
      rec.possession = possession_;
      for (std::size_t i = 0; i < step_events_.size(); ++i) {
        if (i > 0) rec.event += ';';
        rec.event += step_events_[i];
      }
      result_.records.push_back(std::move(rec));

      if (!legs_.empty() && fsm_.terminal()) {
        summary.early_termination = step + 1 < steps;
        break;
      }

      // The control law is re-evaluated at every RK4 stage; the setpoint and
      // the agent wrench are held over the step.
      const GainSet& law = ic_this_step ? gains_ : motion_gains_;
      const Vector6 setpoint = ee.x_desired;
      const auto control = [&](const GeneralizedState& s) -> Eigen::VectorXd {
        const Kinematics ks = kinematics(s);
        EndEffectorState e;
        e.x = ks.x;
        e.x_dot = ks.x_dot;
        e.x_desired = setpoint;
        return ks.full.J.transpose() * impedance_wrench(law, e);
      };
      state_ = forward_dynamics_step(cfg_.model, state_, control, force.u_ext, cfg_.dt, mode_);
      gripper_.step(cfg_.gripper, cfg_.dt);
    } catch (const NearSingularError& e) {
      throw NearSingularError("step " + std::to_string(step) + " (t = " + fmt(t) + " s): " + e.what());
    } catch (const SolveFailure& e) {
      throw SolveFailure("step " + std::to_string(step) + " (t = " + fmt(t) + " s): " + e.what());
    } catch (const IllegalTransition& e) {
      throw IllegalTransition("step " + std::to_string(step) + " (t = " + fmt(t) + " s): " + e.what());
    }
  }

  summary.steps = result_.records.size();
  if (legs_.empty()) {
    summary.outcome = Outcome::Success;
  } else {
    summary.outcome = fsm_.node == FsmNode::Done && leg_ + 1 == legs_.size() ? Outcome::Success : Outcome::Failed;
  }
  return std::move(result_);
}

const char* kAxes[6] = {"x", "y", "z", "roll", "pitch", "yaw"};
const char* kPoseUnits[6] = {"m", "m", "m", "rad", "rad", "rad"};

}  // namespace

std::string_view to_string(Outcome o) { return o == Outcome::Success ? "Success" : "Failed"; }

std::size_t horizon_steps(const ScenarioConfig& config) {
  const double ratio = config.duration / config.dt;
  // Guard against ratios like 10.000000000000002 from decimal dt.
  return static_cast<std::size_t>(std::max(1.0, std::ceil(ratio - 1e-9)));
}

RunResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  return ScenarioRun(config).run();
}

void write_trajectory_csv(std::ostream& out, const RunResult& run) {
  const std::size_t joints = run.records.empty() ? 0 : static_cast<std::size_t>(run.records.front().xi.size()) - 6;
  std::vector<std::string> cols = {"t_s", "p_b_x_m", "p_b_y_m", "p_b_z_m", "phi_b_roll_rad", "phi_b_pitch_rad",
                                   "phi_b_yaw_rad"};
  for (std::size_t j = 1; j <= joints; ++j) cols.push_back("q" + std::to_string(j) + "_rad");
  for (const char* c : {"v_b_x_m_s", "v_b_y_m_s", "v_b_z_m_s", "dphi_b_roll_rad_s", "dphi_b_pitch_rad_s",
                        "dphi_b_yaw_rad_s"}) {
    cols.emplace_back(c);
  }
  for (std::size_t j = 1; j <= joints; ++j) cols.push_back("dq" + std::to_string(j) + "_rad_s");
  const std::pair<const char*, const char*> groups[] = {{"", ""},    {"d_", ""},   {"dot_", "_s"},
                                                        {"ddot_", "_s2"}, {"err_", ""}, {"oracle_err_", ""}};
  for (const auto& [prefix, suffix] : groups) {
    for (int i = 0; i < 6; ++i) {
      cols.push_back(std::string(prefix) + kAxes[i] + "_e_" + kPoseUnits[i] + suffix);
    }
  }
  for (const char* c : {"fx_ext_N", "fy_ext_N", "fz_ext_N", "troll_ext_Nm", "tpitch_ext_Nm", "tyaw_ext_Nm",
                        "fsm_node", "gripper_aperture_m", "object_attached", "ic_active", "possession", "event"}) {
    cols.emplace_back(c);
  }
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';

  std::string line;
  for (const auto& r : run.records) {
    line = fmt(r.t);
    auto put = [&line](const auto& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) line += ',' + fmt(v[i]);
    };
    put(r.xi);
    put(r.xi_dot);
    put(r.x);
    put(r.x_desired);
    put(r.x_dot);
    put(r.x_ddot);
    put(r.x_tilde);
    put(r.x_tilde_oracle);
    put(r.f_ext);
    line += ',';
    line += to_string(r.fsm_node);
    line += ',' + fmt(r.gripper_aperture);
    line += r.object_attached ? ",1" : ",0";
    line += r.ic_active ? ",1" : ",0";
    line += ',';
    line += to_string(r.possession);
    line += ',' + r.event;
    out << line << '\n';
  }
}

void write_events_csv(std::ostream& out, const RunResult& run) {
  out << "t_s,step,source,event,attempt\n";
  for (const auto& e : run.events) {
    out << fmt(e.t) << ',' << e.step << ',' << e.source << ',' << e.event << ',' << e.attempt << '\n';
  }
}

std::string run_stem(const RunSummary& summary) {
  return summary.scenario + "-" + std::string(to_string(summary.behavior));
}

void write_summary_text(std::ostream& out, const RunSummary& s) {
  out << "scenario:          " << s.scenario << '\n'
      << "task:              " << task_name(s.mode) << '\n'
      << "behavior:          " << to_string(s.behavior) << '\n'
      << "outcome:           " << to_string(s.outcome) << '\n'
      << "attempts:          " << s.attempts << '\n'
      << "transfer duration: " << fmt(s.transfer_duration) << " s\n"
      << "steps:             " << s.steps << (s.early_termination ? " (terminated early)" : "") << '\n'
      << "peak error:       ";
  for (int i = 0; i < 6; ++i) out << ' ' << kAxes[i] << '=' << fmt(s.peak_error[i]);
  out << '\n';
  if (!s.error.empty()) out << "error:             " << s.error << '\n';
}

void write_run_outputs(const RunResult& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = run_stem(run.summary);
  std::ofstream traj(dir / (stem + "_trajectory.csv"), std::ios::binary);
  write_trajectory_csv(traj, run);
  std::ofstream events(dir / (stem + "_events.csv"), std::ios::binary);
  write_events_csv(events, run);
  if (!traj || !events) throw std::runtime_error("failed writing run outputs to " + dir.string());
}

std::vector<RunSummary> run_suite(const std::vector<ScenarioConfig>& configs, const std::filesystem::path& out_dir,
                                  bool parallel) {
  if (configs.empty()) throw ConfigError("suite needs at least one scenario");
  if (!out_dir.empty()) {
    // Two runs with one stem would write the same files.
    std::vector<std::string> stems;
    for (const auto& c : configs) stems.push_back(c.name + "-" + std::string(to_string(c.behavior)));
    std::sort(stems.begin(), stems.end());
    const auto dup = std::adjacent_find(stems.begin(), stems.end());
    if (dup != stems.end()) throw ConfigError("two suite runs share the output stem '" + *dup + "'");
  }
  auto one = [&out_dir](const ScenarioConfig& cfg) {
    try {
      RunResult r = run_scenario(cfg);
      if (!out_dir.empty()) write_run_outputs(r, out_dir);
      return r.summary;
    } catch (const std::exception& e) {
      RunSummary s;
      s.scenario = cfg.name;
      s.mode = cfg.mode;
      s.behavior = cfg.behavior;
      s.outcome = Outcome::Failed;
      s.error = e.what();
      return s;
    }
  };
  std::vector<RunSummary> rows;
  rows.reserve(configs.size());
  if (!parallel) {
    for (const auto& c : configs) rows.push_back(one(c));
    return rows;
  }
  std::vector<std::future<RunSummary>> jobs;
  jobs.reserve(configs.size());
  for (const auto& c : configs) jobs.push_back(std::async(std::launch::async, one, std::cref(c)));
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

void write_suite_csv(std::ostream& out, const std::vector<RunSummary>& rows) {
  out << "scenario,task,behavior,outcome,attempts,transfer_duration_s,peak_x_m,peak_y_m,peak_z_m,peak_roll_rad,"
         "peak_pitch_rad,peak_yaw_rad,steps,early_termination,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.scenario << ',' << task_name(r.mode) << ',' << to_string(r.behavior) << ',' << to_string(r.outcome)
        << ',' << r.attempts << ',' << fmt(r.transfer_duration);
    for (int i = 0; i < 6; ++i) out << ',' << fmt(r.peak_error[i]);
    out << ',' << r.steps << ',' << (r.early_termination ? 1 : 0) << ',' << err << '\n';
  }
}

void write_suite_table(std::ostream& out, const std::vector<RunSummary>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %-26s %-10s %-8s %8s %12s %12s\n", "scenario", "task", "behavior", "outcome",
                "attempts", "transfer[s]", "peak|x|[m]");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-22s %-26s %-10s %-8s %8d %12.3f %12.6f\n", r.scenario.c_str(),
                  std::string(task_name(r.mode)).c_str(), std::string(to_string(r.behavior)).c_str(),
                  std::string(to_string(r.outcome)).c_str(), r.attempts, r.transfer_duration,
                  r.peak_error.head<3>().maxCoeff());
    out << buf;
    if (!r.error.empty()) out << "    error: " << r.error << '\n';
  }
}

}  // namespace handover
