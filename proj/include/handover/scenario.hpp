#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "handover/handover_fsm.hpp"
#include "handover/human_agent.hpp"
#include "handover/impedance.hpp"
#include "handover/robot_model.hpp"

namespace handover {

enum class ScenarioMode {
  Validation,     // impedance control active from t = 0, no handover
  RobotToHuman,
  HumanToRobot,
  Collaborative,  // robot-to-human, then human-to-robot
};

std::string_view to_string(ScenarioMode m);

/// Label used in suite tables.
std::string_view task_name(ScenarioMode m);

struct Thresholds {
  double alpha = 0.02;  // m/s
  int window = 10;      // steps
  double beta = 0.005;  // m
  int max_retries = 3;
};

/// Waypoint controller used outside the transfer phase: a Cartesian PD on a
/// minimum-jerk reference.
struct MotionConfig {
  Vector6 stiffness = (Vector6() << 800.0, 800.0, 800.0, 200.0, 200.0, 200.0).finished();
  double damping_ratio = 0.9;
  double max_speed = 0.2;           // m/s, peak of the reference
  double max_angular_speed = 0.5;   // rad/s
  double min_duration = 0.5;        // s
  double position_tolerance = 2e-3;  // m or rad
  double velocity_tolerance = 5e-3;  // m/s or rad/s
};

struct ObjectConfig {
  Vector3 position = Vector3::Zero();
  double width = 0.03;  // m, aperture when grasped
};

struct ScenarioConfig {
  std::string name = "scenario";
  ScenarioMode mode = ScenarioMode::Validation;

  Behavior behavior = Behavior::Rigid;
  PresetSpec rigid = default_preset(Behavior::Rigid);
  PresetSpec compliant = default_preset(Behavior::Compliant);
  std::optional<GainSet> custom_gains;

  double dt = 1e-3;        // s
  double duration = 10.0;  // s
  bool locked_joints = true;

  LinkParameters model = default_free_flyer();
  GeneralizedState initial_state = GeneralizedState::zero(3);

  Thresholds thresholds;
  GripperConfig gripper;
  ObjectConfig object;
  Vector6 handover_pose = Vector6::Zero();
  std::optional<Vector6> object_waypoint;  // defaults to the object position, level
  Vector6 retract_pose = Vector6::Zero();
  MotionConfig motion;
  Vector6 desired_offset = Vector6::Zero();  // validation: rest pose relative to the start pose
  HandScript hand;

  std::string output_path;

  /// Throws ConfigError on any schema or range violation.
  void validate() const;

  JointMode joint_mode() const { return locked_joints ? JointMode::Locked : JointMode::Free; }
  Vector6 object_pose() const;
  void set_behavior(Behavior b);
};

/// Parses one scenario document. Unknown keys are errors.
ScenarioConfig parse_scenario(std::string_view yaml_text, std::string_view fallback_name = "scenario");
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Directory of the shipped scenarios (HANDOVER_SCENARIO_DIR env var overrides).
std::filesystem::path scenario_dir();

/// Sorted *.yaml files of a directory.
std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir);

/// An existing file path, or the name of a shipped scenario.
std::filesystem::path resolve_scenario(std::string_view name_or_path);

}  // namespace handover
