#include "handover/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "handover/errors.hpp"

namespace handover {

std::string_view to_string(ScenarioMode m) {
  switch (m) {
    case ScenarioMode::Validation: return "validation";
    case ScenarioMode::RobotToHuman: return "robot_to_human";
    case ScenarioMode::HumanToRobot: return "human_to_robot";
    case ScenarioMode::Collaborative: return "collaborative";
  }
  return "validation";
}

std::string_view task_name(ScenarioMode m) {
  switch (m) {
    case ScenarioMode::Validation: return "Impedance Validation";
    case ScenarioMode::RobotToHuman: return "Robot-to-Human Handover";
    case ScenarioMode::HumanToRobot: return "Human-to-Robot Handover";
    case ScenarioMode::Collaborative: return "Collaborative";
  }
  return "Impedance Validation";
}

namespace {

using Keys = std::initializer_list<std::string_view>;

void check_keys(const YAML::Node& node, const std::string& where, Keys allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

double number(const YAML::Node& node, const std::string& where) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": expected a number");
  }
}

int integer(const YAML::Node& node, const std::string& where) {
  try {
    return node.as<int>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": expected an integer");
  }
}

bool boolean(const YAML::Node& node, const std::string& where) {
  try {
    return node.as<bool>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": expected true or false");
  }
}

std::string text(const YAML::Node& node, const std::string& where) {
  if (!node.IsScalar()) throw ConfigError(where + ": expected a string");
  return node.as<std::string>();
}

Eigen::VectorXd vector(const YAML::Node& node, const std::string& where, std::optional<int> size = std::nullopt) {
  if (!node.IsSequence()) throw ConfigError(where + ": expected a list of numbers");
  const auto n = static_cast<int>(node.size());
  if (size && n != *size) {
    throw ConfigError(where + ": expected " + std::to_string(*size) + " numbers, got " + std::to_string(n));
  }
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = number(node[static_cast<std::size_t>(i)], where);
  return v;
}

Vector3 vec3(const YAML::Node& node, const std::string& where) { return vector(node, where, 3); }
Vector6 vec6(const YAML::Node& node, const std::string& where) { return vector(node, where, 6); }

// Either three diagonal entries or a 3x3 nested list.
Matrix3 inertia(const YAML::Node& node, const std::string& where) {
  if (node.IsSequence() && node.size() == 3 && node[0].IsSequence()) {
    Matrix3 m;
    for (int r = 0; r < 3; ++r) m.row(r) = vec3(node[static_cast<std::size_t>(r)], where).transpose();
    return m;
  }
  return vec3(node, where).asDiagonal();
}

HomogeneousTransform transform(const YAML::Node& node, const std::string& where) {
  check_keys(node, where, {"xyz", "rpy"});
  HomogeneousTransform t;
  if (node["xyz"]) t.translation = vec3(node["xyz"], where + ".xyz");
  if (node["rpy"]) t.rotation = rpy_to_rotation(EulerAnglesRPY::from_vector(vec3(node["rpy"], where + ".rpy")));
  return t;
}

LinkParameters parse_model(const YAML::Node& node) {
  check_keys(node, "model", {"base", "links", "tool"});
  LinkParameters p;
  if (!node["base"] || !node["links"]) throw ConfigError("model: 'base' and 'links' are required");
  const auto base = node["base"];
  check_keys(base, "model.base", {"mass", "inertia"});
  p.base_mass = number(base["mass"], "model.base.mass");
  p.base_inertia = inertia(base["inertia"], "model.base.inertia");
  if (!node["links"].IsSequence()) throw ConfigError("model.links: expected a list");
  for (std::size_t k = 0; k < node["links"].size(); ++k) {
    const auto l = node["links"][k];
    const std::string where = "model.links[" + std::to_string(k) + "]";
    check_keys(l, where, {"mass", "inertia", "axis", "origin", "com"});
    Link link;
    link.mass = number(l["mass"], where + ".mass");
    link.inertia = inertia(l["inertia"], where + ".inertia");
    link.axis = vec3(l["axis"], where + ".axis");
    if (l["origin"]) link.origin = transform(l["origin"], where + ".origin");
    if (l["com"]) link.com = vec3(l["com"], where + ".com");
    p.links.push_back(link);
  }
  if (node["tool"]) p.tool = transform(node["tool"], "model.tool");
  return p;
}

PresetSpec parse_preset(const YAML::Node& node, const std::string& where, PresetSpec spec) {
  check_keys(node, where, {"stiffness", "damping_ratio"});
  if (node["stiffness"]) spec.stiffness = vec6(node["stiffness"], where + ".stiffness");
  if (node["damping_ratio"]) spec.damping_ratio = number(node["damping_ratio"], where + ".damping_ratio");
  return spec;
}

Interpolation parse_interpolation(const YAML::Node& node, const std::string& where) {
  const auto s = text(node, where);
  if (s == "step") return Interpolation::Step;
  if (s == "linear_ramp") return Interpolation::LinearRamp;
  throw ConfigError(where + ": interpolation must be 'step' or 'linear_ramp'");
}

HandAction parse_action(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap() || !node["action"] || !node["t"]) throw ConfigError(where + ": needs 't' and 'action'");
  HandAction a;
  a.t = number(node["t"], where + ".t");
  const auto kind = text(node["action"], where + ".action");
  if (kind == "move_to" || kind == "retract") {
    check_keys(node, where, {"t", "action", "pose", "duration"});
    a.kind = kind == "move_to" ? HandActionKind::MoveTo : HandActionKind::Retract;
    if (!node["pose"]) throw ConfigError(where + ": " + kind + " needs a pose");
    a.pose = vec6(node["pose"], where + ".pose");
    if (node["duration"]) a.duration = number(node["duration"], where + ".duration");
  } else if (kind == "apply") {
    check_keys(node, where, {"t", "action", "coupling", "interpolation", "segments"});
    a.kind = HandActionKind::Apply;
    Interpolation fallback = Interpolation::Step;
    if (node["interpolation"]) fallback = parse_interpolation(node["interpolation"], where + ".interpolation");
    if (node["coupling"]) {
      const auto c = text(node["coupling"], where + ".coupling");
      if (c == "direct") {
        a.coupling = Coupling::Direct;
      } else if (c == "grasp") {
        a.coupling = Coupling::Grasp;
      } else if (c == "contact") {
        a.coupling = Coupling::Contact;
      } else {
        throw ConfigError(where + ".coupling: must be 'direct', 'grasp' or 'contact'");
      }
    }
    if (!node["segments"] || !node["segments"].IsSequence()) throw ConfigError(where + ": apply needs segments");
    for (std::size_t i = 0; i < node["segments"].size(); ++i) {
      const auto s = node["segments"][i];
      const std::string sw = where + ".segments[" + std::to_string(i) + "]";
      check_keys(s, sw, {"start", "end", "wrench", "interpolation"});
      ForceSegment seg;
      seg.t_start = number(s["start"], sw + ".start");
      seg.t_end = number(s["end"], sw + ".end");
      seg.wrench = vec6(s["wrench"], sw + ".wrench");
      seg.interpolation = s["interpolation"] ? parse_interpolation(s["interpolation"], sw + ".interpolation") : fallback;
      a.profile.segments.push_back(seg);
    }
  } else if (kind == "place_object" || kind == "take_object") {
    check_keys(node, where, {"t", "action"});
    a.kind = kind == "place_object" ? HandActionKind::PlaceObject : HandActionKind::TakeObject;
  } else {
    throw ConfigError(where + ": unknown action '" + kind + "'");
  }
  return a;
}

HandScript parse_hand(const YAML::Node& node) {
  check_keys(node, "hand", {"initial_pose", "holding", "contact_radius", "actions"});
  HandScript h;
  if (node["initial_pose"]) h.initial_pose = vec6(node["initial_pose"], "hand.initial_pose");
  if (node["holding"]) h.initially_holding = boolean(node["holding"], "hand.holding");
  if (node["contact_radius"]) h.contact_radius = number(node["contact_radius"], "hand.contact_radius");
  if (node["actions"]) {
    if (!node["actions"].IsSequence()) throw ConfigError("hand.actions: expected a list");
    for (std::size_t i = 0; i < node["actions"].size(); ++i) {
      h.actions.push_back(parse_action(node["actions"][i], "hand.actions[" + std::to_string(i) + "]"));
    }
  }
  return h;
}

ScenarioMode parse_mode(const std::string& s) {
  if (s == "validation") return ScenarioMode::Validation;
  if (s == "robot_to_human") return ScenarioMode::RobotToHuman;
  if (s == "human_to_robot") return ScenarioMode::HumanToRobot;
  if (s == "collaborative") return ScenarioMode::Collaborative;
  throw ConfigError("mode: must be validation, robot_to_human, human_to_robot or collaborative");
}

void parse_initial_state(const YAML::Node& node, ScenarioConfig& cfg) {
  check_keys(node, "initial_state",
             {"base_position", "base_attitude", "joints", "base_velocity", "base_rates", "joint_rates"});
  const auto n = static_cast<int>(cfg.model.joint_count());
  auto& s = cfg.initial_state;
  if (node["base_position"]) s.xi.head<3>() = vec3(node["base_position"], "initial_state.base_position");
  if (node["base_attitude"]) s.xi.segment<3>(3) = vec3(node["base_attitude"], "initial_state.base_attitude");
  if (node["joints"]) s.xi.tail(n) = vector(node["joints"], "initial_state.joints", n);
  if (node["base_velocity"]) s.xi_dot.head<3>() = vec3(node["base_velocity"], "initial_state.base_velocity");
  if (node["base_rates"]) s.xi_dot.segment<3>(3) = vec3(node["base_rates"], "initial_state.base_rates");
  if (node["joint_rates"]) s.xi_dot.tail(n) = vector(node["joint_rates"], "initial_state.joint_rates", n);
}

}  // namespace

Vector6 ScenarioConfig::object_pose() const {
  if (object_waypoint) return *object_waypoint;
  Vector6 p = Vector6::Zero();
  p.head<3>() = object.position;
  return p;
}

void ScenarioConfig::set_behavior(Behavior b) {
  if (b == Behavior::Custom && !custom_gains) throw ConfigError("custom behavior needs explicit gains");
  behavior = b;
}

void ScenarioConfig::validate() const {
  if (name.empty()) throw ConfigError("name must not be empty");
  if (!(dt > 0.0 && dt <= 0.01)) throw ConfigError("dt must lie in (0, 0.01]");
  if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("duration must be positive");
  model.validate();
  const auto dof = static_cast<Eigen::Index>(model.dof());
  if (initial_state.xi.size() != dof || initial_state.xi_dot.size() != dof) {
    throw ConfigError("initial state does not match the model's joint count");
  }
  if (!initial_state.xi.allFinite() || !initial_state.xi_dot.allFinite()) {
    throw ConfigError("initial state must be finite");
  }
  if (initial_state.base_attitude().near_singular()) throw ConfigError("initial base attitude is singular");
  if (behavior == Behavior::Custom) {
    if (!custom_gains) throw ConfigError("custom behavior needs explicit gains");
    custom_gains->validate();
  }
  for (const auto* p : {&rigid, &compliant}) {
    if (!(p->stiffness.array() > 0.0).all() || !(p->damping_ratio > 0.0)) {
      throw ConfigError("preset stiffness and damping ratio must be positive");
    }
  }
  if (!(thresholds.alpha > 0.0)) throw ConfigError("thresholds.alpha must be positive");
  if (thresholds.window < 1) throw ConfigError("thresholds.window must be at least 1");
  if (!(thresholds.beta > 0.0) || thresholds.beta > gripper.max_aperture) {
    throw ConfigError("thresholds.beta must lie in (0, max_aperture]");
  }
  if (thresholds.max_retries < 0) throw ConfigError("thresholds.max_retries must be non-negative");
  if (!(gripper.max_aperture > 0.0) || !(gripper.rate > 0.0) || !(gripper.capture_radius > 0.0)) {
    throw ConfigError("gripper parameters must be positive");
  }
  if (!(object.width > 0.0) || object.width > gripper.max_aperture) {
    throw ConfigError("object.width must lie in (0, max_aperture]");
  }
  if (!(motion.stiffness.array() > 0.0).all() || !(motion.damping_ratio > 0.0) || !(motion.max_speed > 0.0) ||
      !(motion.max_angular_speed > 0.0) || !(motion.position_tolerance > 0.0) ||
      !(motion.velocity_tolerance > 0.0) || motion.min_duration < 0.0) {
    throw ConfigError("motion parameters must be positive");
  }
  for (const Vector6* pose : {&handover_pose, &retract_pose, &desired_offset}) {
    if (!pose->allFinite()) throw ConfigError("poses must be finite");
  }
  hand.validate();
}

ScenarioConfig parse_scenario(std::string_view yaml_text, std::string_view fallback_name) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML syntax: ") + e.what());
  }
  check_keys(root, "scenario",
             {"name", "mode", "gains", "presets", "dt", "duration", "locked_joints", "model", "initial_state",
              "thresholds", "gripper", "object", "handover_pose", "waypoints", "motion", "hand", "desired_offset",
              "output_path"});

  ScenarioConfig cfg;
  cfg.name = root["name"] ? text(root["name"], "name") : std::string(fallback_name);
  if (!root["mode"]) throw ConfigError("mode is required");
  cfg.mode = parse_mode(text(root["mode"], "mode"));

  if (root["model"]) {
    cfg.model = parse_model(root["model"]);
    cfg.model.validate();
  }
  cfg.initial_state = GeneralizedState::zero(cfg.model.joint_count());
  if (root["initial_state"]) parse_initial_state(root["initial_state"], cfg);

  if (root["presets"]) {
    check_keys(root["presets"], "presets", {"rigid", "compliant"});
    if (root["presets"]["rigid"]) cfg.rigid = parse_preset(root["presets"]["rigid"], "presets.rigid", cfg.rigid);
    if (root["presets"]["compliant"]) {
      cfg.compliant = parse_preset(root["presets"]["compliant"], "presets.compliant", cfg.compliant);
    }
  }
  if (root["gains"]) {
    const auto g = root["gains"];
    if (g.IsScalar()) {
      const auto b = parse_behavior(g.as<std::string>());
      if (!b || *b == Behavior::Custom) throw ConfigError("gains: preset must be 'rigid' or 'compliant'");
      cfg.behavior = *b;
    } else {
      check_keys(g, "gains", {"stiffness", "damping"});
      GainSet custom;
      custom.label = Behavior::Custom;
      custom.stiffness = vec6(g["stiffness"], "gains.stiffness").asDiagonal();
      custom.damping = vec6(g["damping"], "gains.damping").asDiagonal();
      cfg.custom_gains = custom;
      cfg.behavior = Behavior::Custom;
    }
  }

  if (root["dt"]) cfg.dt = number(root["dt"], "dt");
  if (root["duration"]) cfg.duration = number(root["duration"], "duration");
  if (root["locked_joints"]) cfg.locked_joints = boolean(root["locked_joints"], "locked_joints");

  if (const auto t = root["thresholds"]) {
    check_keys(t, "thresholds", {"alpha", "window", "beta", "max_retries"});
    if (t["alpha"]) cfg.thresholds.alpha = number(t["alpha"], "thresholds.alpha");
    if (t["window"]) cfg.thresholds.window = integer(t["window"], "thresholds.window");
    if (t["beta"]) cfg.thresholds.beta = number(t["beta"], "thresholds.beta");
    if (t["max_retries"]) cfg.thresholds.max_retries = integer(t["max_retries"], "thresholds.max_retries");
  }
  if (const auto g = root["gripper"]) {
    check_keys(g, "gripper", {"max_aperture", "rate", "capture_radius"});
    if (g["max_aperture"]) cfg.gripper.max_aperture = number(g["max_aperture"], "gripper.max_aperture");
    if (g["rate"]) cfg.gripper.rate = number(g["rate"], "gripper.rate");
    if (g["capture_radius"]) cfg.gripper.capture_radius = number(g["capture_radius"], "gripper.capture_radius");
  }
  if (const auto o = root["object"]) {
    check_keys(o, "object", {"position", "width"});
    if (o["position"]) cfg.object.position = vec3(o["position"], "object.position");
    if (o["width"]) cfg.object.width = number(o["width"], "object.width");
  }
  if (root["handover_pose"]) cfg.handover_pose = vec6(root["handover_pose"], "handover_pose");
  if (const auto w = root["waypoints"]) {
    check_keys(w, "waypoints", {"object", "retract"});
    if (w["object"]) cfg.object_waypoint = vec6(w["object"], "waypoints.object");
    if (w["retract"]) cfg.retract_pose = vec6(w["retract"], "waypoints.retract");
  }
  if (const auto m = root["motion"]) {
    check_keys(m, "motion",
               {"stiffness", "damping_ratio", "max_speed", "max_angular_speed", "min_duration", "position_tolerance",
                "velocity_tolerance"});
    auto& mc = cfg.motion;
    if (m["stiffness"]) mc.stiffness = vec6(m["stiffness"], "motion.stiffness");
    if (m["damping_ratio"]) mc.damping_ratio = number(m["damping_ratio"], "motion.damping_ratio");
    if (m["max_speed"]) mc.max_speed = number(m["max_speed"], "motion.max_speed");
    if (m["max_angular_speed"]) mc.max_angular_speed = number(m["max_angular_speed"], "motion.max_angular_speed");
    if (m["min_duration"]) mc.min_duration = number(m["min_duration"], "motion.min_duration");
    if (m["position_tolerance"]) mc.position_tolerance = number(m["position_tolerance"], "motion.position_tolerance");
    if (m["velocity_tolerance"]) mc.velocity_tolerance = number(m["velocity_tolerance"], "motion.velocity_tolerance");
  }
  if (root["desired_offset"]) cfg.desired_offset = vec6(root["desired_offset"], "desired_offset");
  if (root["hand"]) cfg.hand = parse_hand(root["hand"]);
  if (root["output_path"]) cfg.output_path = text(root["output_path"], "output_path");

  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str(), path.stem().string());
  } catch (const ConfigError& e) {
    throw ConfigError(path.filename().string() + ": " + e.what());
  }
}

std::filesystem::path scenario_dir() {
  if (const char* env = std::getenv("HANDOVER_SCENARIO_DIR"); env != nullptr && *env != '\0') return env;
  return HANDOVER_SCENARIO_DIR;
}

std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".yaml") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::filesystem::path resolve_scenario(std::string_view name_or_path) {
  const std::filesystem::path direct(name_or_path);
  if (std::filesystem::is_regular_file(direct)) return direct;
  const auto shipped = scenario_dir() / (std::string(name_or_path) + ".yaml");
  if (std::filesystem::is_regular_file(shipped)) return shipped;
  throw ConfigError("no scenario file or shipped scenario named '" + std::string(name_or_path) + "'");
}

}  // namespace handover
