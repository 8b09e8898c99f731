#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace handover {

enum class Direction { RobotToHuman, HumanToRobot };

enum class HandoverPhase { Approach, Transfer, Retraction };

enum class FsmNode {
  Idle,
  OpenGripper,
  MoveToObject,
  GraspObject,
  MoveToHandoverPose,
  ActivateIC,
  SignalUser,
  AwaitTrigger,
  ReleaseObject,
  CloseGripper,
  VerifyGrasp,
  SignalFailure,
  DeactivateIC,
  Retract,
  Done,
  Failed,  // retry bound exhausted
};

std::string_view to_string(Direction d);
std::string_view to_string(HandoverPhase p);
std::string_view to_string(FsmNode n);

enum class GripperCommand { Open, Close };

struct GripperConfig {
  double max_aperture = 0.05;    // m
  double rate = 0.1;             // m/s
  double capture_radius = 0.02;  // m, palm point to object
};

/// First-order, rate-limited gripper. When closed on a captured object the
/// aperture stops at the object width.
struct GripperState {
  double aperture = 0.0;  // m
  bool object_attached = false;
  double beta_threshold = 0.005;  // m
  GripperCommand commanded = GripperCommand::Close;
  double held_width = 0.0;  // m, valid while attached

  double target(const GripperConfig& cfg) const;
  bool settled(const GripperConfig& cfg) const;

  /// Starts closing; `captured` decides attachment at close time.
  void command_close(bool captured, double object_width);
  void command_open();
  void step(const GripperConfig& cfg, double dt);
};

/// End-effector speed threshold alpha (m/s) that must hold for `window`
/// consecutive steps.
struct ReleaseTrigger {
  double alpha_threshold = 0.02;
  int window = 10;
};

/// Debounced alpha-threshold monitor.
struct TriggerMonitor {
  int streak = 0;

  /// Feeds one sample; true once the speed held >= alpha for `window` samples.
  bool update(double ee_velocity_norm, const ReleaseTrigger& trigger);
};

/// Placement into an open, empty gripper is sensed as the end-effector being
/// pushed above alpha, the same mechanism that senses the receiver's pull.
bool detect_placement(const GripperState& gripper, double ee_velocity_norm, const ReleaseTrigger& trigger,
                      TriggerMonitor& monitor);

struct FsmConfig {
  ReleaseTrigger trigger;
  int max_retries = 3;  // failed transfers retried before giving up
};

struct FsmState {
  FsmNode node = FsmNode::Idle;
  Direction direction = Direction::RobotToHuman;
  int attempt_count = 0;
  HandoverPhase phase = HandoverPhase::Approach;
  TriggerMonitor monitor;

  static FsmState start(Direction direction) {
    FsmState s;
    s.direction = direction;
    return s;
  }
  bool terminal() const { return node == FsmNode::Done || node == FsmNode::Failed; }
};

struct FsmObservation {
  double ee_velocity_norm = 0.0;  // m/s
  GripperState gripper;
  bool gripper_settled = false;
  bool robot_at_waypoint = false;
  bool ic_active = false;
};

enum class WaypointGoal { Object, HandoverPose, Retract };
enum class SignalKind { Ready, Failure };

std::string_view to_string(WaypointGoal w);

/// Commands emitted on entry to the new node; empty when no transition fired.
struct FsmCommand {
  std::optional<GripperCommand> gripper;
  std::optional<WaypointGoal> waypoint;
  std::optional<bool> impedance;
  std::optional<SignalKind> signal;
  std::vector<std::string> events;
};

struct FsmStep {
  FsmState state;
  FsmCommand command;
};

/// Advances the handover state machine by at most one transition.
/// Throws IllegalTransition when the observation contradicts the node
/// (impedance control state inconsistent with the phase).
FsmStep step_fsm(const FsmState& state, const FsmObservation& obs, const FsmConfig& config);

struct SignalEvent {
  double t = 0.0;
  SignalKind kind = SignalKind::Ready;
  int attempt = 0;

  std::string name() const { return kind == SignalKind::Ready ? "signal_ready" : "signal_failure"; }
};

/// Simulated flashlight: a timestamped signal record for the run log.
SignalEvent signal_user(SignalKind kind, double t, int attempt);

}  // namespace handover
