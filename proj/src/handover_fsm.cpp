#include "handover/handover_fsm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "handover/errors.hpp"

namespace handover {

std::string_view to_string(Direction d) {
  return d == Direction::RobotToHuman ? "robot_to_human" : "human_to_robot";
}

std::string_view to_string(HandoverPhase p) {
  switch (p) {
    case HandoverPhase::Approach: return "approach";
    case HandoverPhase::Transfer: return "transfer";
    case HandoverPhase::Retraction: return "retraction";
  }
  return "approach";
}

std::string_view to_string(FsmNode n) {
  switch (n) {
    case FsmNode::Idle: return "Idle";
    case FsmNode::OpenGripper: return "OpenGripper";
    case FsmNode::MoveToObject: return "MoveToObject";
    case FsmNode::GraspObject: return "GraspObject";
    case FsmNode::MoveToHandoverPose: return "MoveToHandoverPose";
    case FsmNode::ActivateIC: return "ActivateIC";
    case FsmNode::SignalUser: return "SignalUser";
    case FsmNode::AwaitTrigger: return "AwaitTrigger";
    case FsmNode::ReleaseObject: return "ReleaseObject";
    case FsmNode::CloseGripper: return "CloseGripper";
    case FsmNode::VerifyGrasp: return "VerifyGrasp";
    case FsmNode::SignalFailure: return "SignalFailure";
    case FsmNode::DeactivateIC: return "DeactivateIC";
    case FsmNode::Retract: return "Retract";
    case FsmNode::Done: return "Done";
    case FsmNode::Failed: return "Failed";
  }
  return "Idle";
}

std::string_view to_string(WaypointGoal w) {
  switch (w) {
    case WaypointGoal::Object: return "object";
    case WaypointGoal::HandoverPose: return "handover";
    case WaypointGoal::Retract: return "retract";
  }
  return "object";
}

double GripperState::target(const GripperConfig& cfg) const {
  if (commanded == GripperCommand::Open) return cfg.max_aperture;
  return object_attached ? held_width : 0.0;
}

bool GripperState::settled(const GripperConfig& cfg) const { return std::abs(aperture - target(cfg)) < 1e-12; }

void GripperState::command_close(bool captured, double object_width) {
  commanded = GripperCommand::Close;
  object_attached = captured;
  held_width = captured ? object_width : 0.0;
}

void GripperState::command_open() {
  commanded = GripperCommand::Open;
  object_attached = false;
  held_width = 0.0;
}

void GripperState::step(const GripperConfig& cfg, double dt) {
  const double goal = target(cfg);
  const double max_move = cfg.rate * dt;
  const double delta = std::clamp(goal - aperture, -max_move, max_move);
  // Snap onto the target to make settling exact.
  aperture = std::abs(goal - aperture) <= max_move ? goal : aperture + delta;
  aperture = std::clamp(aperture, 0.0, cfg.max_aperture);
}

bool TriggerMonitor::update(double ee_velocity_norm, const ReleaseTrigger& trigger) {
  streak = ee_velocity_norm >= trigger.alpha_threshold ? streak + 1 : 0;
  return streak >= trigger.window;
}

bool detect_placement(const GripperState& gripper, double ee_velocity_norm, const ReleaseTrigger& trigger,
                      TriggerMonitor& monitor) {
  const bool pushed = monitor.update(ee_velocity_norm, trigger);
  return pushed && !gripper.object_attached;
}

SignalEvent signal_user(SignalKind kind, double t, int attempt) { return {t, kind, attempt}; }

namespace {

bool requires_impedance(const FsmState& s) {
  switch (s.node) {
    case FsmNode::SignalUser:
    case FsmNode::AwaitTrigger:
    case FsmNode::ReleaseObject:
    case FsmNode::CloseGripper:
    case FsmNode::VerifyGrasp:
    case FsmNode::SignalFailure:
      return true;
    case FsmNode::OpenGripper:
      return s.phase == HandoverPhase::Transfer;
    default:
      return false;
  }
}

bool forbids_impedance(const FsmState& s) {
  switch (s.node) {
    case FsmNode::Idle:
    case FsmNode::MoveToObject:
    case FsmNode::GraspObject:
    case FsmNode::MoveToHandoverPose:
    case FsmNode::Retract:
    case FsmNode::Done:
      return true;
    case FsmNode::OpenGripper:
      return s.phase == HandoverPhase::Approach;
    default:
      return false;
  }
}

void enter(FsmStep& out, FsmNode node) {
  FsmState& s = out.state;
  FsmCommand& c = out.command;
  s.node = node;
  switch (node) {
    case FsmNode::OpenGripper:
      c.gripper = GripperCommand::Open;
      c.events.emplace_back("gripper_open");
      break;
    case FsmNode::MoveToObject:
      c.waypoint = WaypointGoal::Object;
      c.events.emplace_back("goto_object");
      break;
    case FsmNode::GraspObject:
      c.gripper = GripperCommand::Close;
      c.events.emplace_back("grasp");
      break;
    case FsmNode::MoveToHandoverPose:
      c.waypoint = WaypointGoal::HandoverPose;
      c.events.emplace_back("goto_handover");
      break;
    case FsmNode::ActivateIC:
      s.phase = HandoverPhase::Transfer;
      c.impedance = true;
      c.events.emplace_back("ic_on");
      break;
    case FsmNode::SignalUser:
      ++s.attempt_count;
      c.signal = SignalKind::Ready;
      c.events.emplace_back("signal_ready");
      break;
    case FsmNode::AwaitTrigger:
      s.monitor = {};
      c.events.emplace_back("await_trigger");
      break;
    case FsmNode::ReleaseObject:
      c.gripper = GripperCommand::Open;
      c.events.emplace_back("release");
      break;
    case FsmNode::CloseGripper:
      c.gripper = GripperCommand::Close;
      c.events.emplace_back("gripper_close");
      break;
    case FsmNode::VerifyGrasp:
      c.events.emplace_back("verify_grasp");
      break;
    case FsmNode::SignalFailure:
      c.signal = SignalKind::Failure;
      c.events.emplace_back("signal_failure");
      break;
    case FsmNode::DeactivateIC:
      s.phase = HandoverPhase::Retraction;
      c.impedance = false;
      c.events.emplace_back("ic_off");
      break;
    case FsmNode::Retract:
      c.waypoint = WaypointGoal::Retract;
      c.events.emplace_back("retract");
      break;
    case FsmNode::Done:
      c.events.emplace_back("done");
      break;
    case FsmNode::Failed:
      c.events.emplace_back("failed");
      break;
    case FsmNode::Idle:
      break;
  }
}

}  // namespace

FsmStep step_fsm(const FsmState& state, const FsmObservation& obs, const FsmConfig& config) {
  if (requires_impedance(state) && !obs.ic_active) {
    throw IllegalTransition(std::string(to_string(state.node)) + " observed impedance control inactive");
  }
  if (forbids_impedance(state) && obs.ic_active) {
    throw IllegalTransition(std::string(to_string(state.node)) + " observed impedance control active");
  }

  FsmStep out{state, {}};
  const bool r2h = state.direction == Direction::RobotToHuman;
  const GripperState& g = obs.gripper;

  switch (state.node) {
    case FsmNode::Idle:
      enter(out, FsmNode::OpenGripper);
      break;
    case FsmNode::OpenGripper:
      if (g.commanded == GripperCommand::Open && obs.gripper_settled) {
        if (state.phase == HandoverPhase::Transfer) {
          enter(out, FsmNode::SignalUser);
        } else {
          enter(out, r2h ? FsmNode::MoveToObject : FsmNode::MoveToHandoverPose);
        }
      }
      break;
    case FsmNode::MoveToObject:
      if (obs.robot_at_waypoint) enter(out, FsmNode::GraspObject);
      break;
    case FsmNode::GraspObject:
      if (obs.gripper_settled) enter(out, FsmNode::MoveToHandoverPose);
      break;
    case FsmNode::MoveToHandoverPose:
      if (obs.robot_at_waypoint) enter(out, FsmNode::ActivateIC);
      break;
    case FsmNode::ActivateIC:
      if (obs.ic_active) enter(out, FsmNode::SignalUser);
      break;
    case FsmNode::SignalUser:
      enter(out, FsmNode::AwaitTrigger);
      break;
    case FsmNode::AwaitTrigger:
      if (r2h) {
        const bool pulled = out.state.monitor.update(obs.ee_velocity_norm, config.trigger);
        if (pulled && g.object_attached) enter(out, FsmNode::ReleaseObject);
      } else if (detect_placement(g, obs.ee_velocity_norm, config.trigger, out.state.monitor)) {
        enter(out, FsmNode::CloseGripper);
      }
      break;
    case FsmNode::ReleaseObject:
      if (obs.gripper_settled) enter(out, FsmNode::DeactivateIC);
      break;
    case FsmNode::CloseGripper:
      if (obs.gripper_settled) enter(out, FsmNode::VerifyGrasp);
      break;
    case FsmNode::VerifyGrasp:
      if (g.aperture > 0.0 && g.aperture >= g.beta_threshold) {
        out.command.events.emplace_back("grasp_ok");
        enter(out, FsmNode::DeactivateIC);
      } else {
        out.command.events.emplace_back("grasp_failed");
        enter(out, FsmNode::SignalFailure);
      }
      break;
    case FsmNode::SignalFailure:
      if (state.attempt_count > config.max_retries) {
        enter(out, FsmNode::Failed);
      } else {
        enter(out, FsmNode::OpenGripper);
      }
      break;
    case FsmNode::DeactivateIC:
      if (!obs.ic_active) enter(out, FsmNode::Retract);
      break;
    case FsmNode::Retract:
      if (obs.robot_at_waypoint) enter(out, FsmNode::Done);
      break;
    case FsmNode::Done:
    case FsmNode::Failed:
      break;
  }
  return out;
}

}  // namespace handover
