#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "handover/spatial_math.hpp"

namespace handover {

enum class Interpolation {
  Step,        // full wrench over [t_start, t_end)
  LinearRamp,  // zero at t_start rising to the full wrench at t_end
};

struct ForceSegment {
  double t_start = 0.0;  // s
  double t_end = 0.0;    // s
  Vector6 wrench = Vector6::Zero();
  Interpolation interpolation = Interpolation::Step;
};

struct ForceProfile {
  std::vector<ForceSegment> segments;

  /// Throws ConfigError unless segments are non-empty intervals, time-ordered,
  /// non-overlapping and finite.
  void validate() const;
};

/// Piecewise wrench; zero outside all segments.
Vector6 wrench_at(const ForceProfile& profile, double t);

/// How a scripted wrench reaches the end-effector.
enum class Coupling {
  Direct,   // always applied (bench validation pushes)
  Grasp,    // only while the hand grips an object the robot holds (pull)
  Contact,  // only while the hand holds the object against the palm (push)
};

enum class Possession { Free, Robot, Hand };

std::string_view to_string(Possession p);

enum class HandActionKind { MoveTo, Apply, PlaceObject, TakeObject, Retract };

struct HandAction {
  double t = 0.0;  // s
  HandActionKind kind = HandActionKind::MoveTo;
  Vector6 pose = Vector6::Zero();  // MoveTo / Retract target
  double duration = 0.0;           // s, MoveTo / Retract
  ForceProfile profile;            // Apply, absolute times
  Coupling coupling = Coupling::Direct;
};

struct HandScript {
  Vector6 initial_pose = Vector6::Zero();
  bool initially_holding = false;
  double contact_radius = 0.08;  // m
  std::vector<HandAction> actions;

  void validate() const;
};

/// What the agent can see of the simulated world this step.
struct WorldView {
  Vector6 ee_pose = Vector6::Zero();
  Possession possession = Possession::Free;
  Vector3 object_position = Vector3::Zero();
};

struct HandEvent {
  double t = 0.0;
  std::string name;  // "hand_move", "place_object", "take_object", "hand_retract", "apply_force"
};

struct HandOutput {
  Vector6 hand_pose = Vector6::Zero();
  Vector6 f_ext = Vector6::Zero();
  bool gripping = false;
  std::vector<HandEvent> events;  // actions whose first step at or after t_action is this one
};

/// Scripted hand at time t = k * dt. Deterministic in (script, t, dt, world); after
/// the last action the hand holds its pose with zero wrench.
HandOutput run_hand_script(const HandScript& script, double t, double dt, const WorldView& world);

}  // namespace handover
