#include "handover/human_agent.hpp"

#include <algorithm>
#include <cmath>

#include "handover/errors.hpp"

namespace handover {

namespace {

Vector6 interpolate_pose(const Vector6& from, const Vector6& to, double fraction) {
  // Minimum-jerk blend.
  const double s = std::clamp(fraction, 0.0, 1.0);
  const double blend = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
  Vector6 p = from + blend * (to - from);
  for (int i = 3; i < 6; ++i) p[i] = from[i] + blend * wrap_angle(to[i] - from[i]);
  return p;
}

bool moves(HandActionKind k) { return k == HandActionKind::MoveTo || k == HandActionKind::Retract; }

std::string event_name(HandActionKind k) {
  switch (k) {
    case HandActionKind::MoveTo: return "hand_move";
    case HandActionKind::Apply: return "apply_force";
    case HandActionKind::PlaceObject: return "place_object";
    case HandActionKind::TakeObject: return "take_object";
    case HandActionKind::Retract: return "hand_retract";
  }
  return "hand_move";
}

}  // namespace

std::string_view to_string(Possession p) {
  switch (p) {
    case Possession::Free: return "free";
    case Possession::Robot: return "robot";
    case Possession::Hand: return "hand";
  }
  return "free";
}

void ForceProfile::validate() const {
  double last_end = -INFINITY;
  for (const auto& s : segments) {
    if (!std::isfinite(s.t_start) || !std::isfinite(s.t_end) || !(s.t_end > s.t_start)) {
      throw ConfigError("force segment must satisfy t_start < t_end");
    }
    if (s.t_start < last_end) throw ConfigError("force segments must be time-ordered and non-overlapping");
    if (!s.wrench.allFinite()) throw ConfigError("force segment wrench must be finite");
    last_end = s.t_end;
  }
}

Vector6 wrench_at(const ForceProfile& profile, double t) {
  for (const auto& s : profile.segments) {
    if (t < s.t_start || t >= s.t_end) continue;
    if (s.interpolation == Interpolation::Step) return s.wrench;
    return s.wrench * ((t - s.t_start) / (s.t_end - s.t_start));
  }
  return Vector6::Zero();
}

void HandScript::validate() const {
  if (!initial_pose.allFinite()) throw ConfigError("hand initial pose must be finite");
  if (!(contact_radius > 0.0)) throw ConfigError("hand contact radius must be positive");
  double last = 0.0;
  for (const auto& a : actions) {
    if (!std::isfinite(a.t) || a.t < last) throw ConfigError("hand actions must be time-ordered from t = 0");
    last = a.t;
    if (moves(a.kind) && (!(a.duration >= 0.0) || !a.pose.allFinite())) {
      throw ConfigError("hand move needs a finite pose and non-negative duration");
    }
    if (a.kind == HandActionKind::Apply) a.profile.validate();
  }
}

HandOutput run_hand_script(const HandScript& script, double t, double dt, const WorldView& world) {
  HandOutput out;
  out.hand_pose = script.initial_pose;
  out.gripping = script.initially_holding;

  // A move starts from wherever the previous move had brought the hand at
  // the moment the new one begins.
  const HandAction* last_move = nullptr;
  Vector6 move_start = script.initial_pose;
  auto pose_along = [&](double time) {
    if (last_move == nullptr) return script.initial_pose;
    const double fraction = last_move->duration > 0.0 ? (time - last_move->t) / last_move->duration : 1.0;
    return interpolate_pose(move_start, last_move->pose, fraction);
  };

  if (!(dt > 0.0)) throw ConfigError("hand script needs a positive step size");
  // Actions take effect on the first step at or after their time; integer
  // step indices keep that exact for decimal dt.
  const auto step_of = [dt](double time) { return static_cast<long long>(std::ceil(time / dt - 1e-9)); };
  const long long now = std::llround(t / dt);
  for (const auto& a : script.actions) {
    const long long due = step_of(a.t);
    if (due > now) break;
    if (due == now) out.events.push_back({a.t, event_name(a.kind)});
    switch (a.kind) {
      case HandActionKind::MoveTo:
      case HandActionKind::Retract:
        move_start = pose_along(a.t);
        last_move = &a;
        break;
      case HandActionKind::TakeObject:
        out.gripping = true;
        break;
      case HandActionKind::PlaceObject:
        out.gripping = false;
        break;
      case HandActionKind::Apply:
        break;
    }
  }
  out.hand_pose = pose_along(t);

  const Vector3 palm = world.ee_pose.head<3>();
  for (const auto& a : script.actions) {
    if (a.kind != HandActionKind::Apply || step_of(a.t) > now) continue;
    bool coupled = false;
    switch (a.coupling) {
      case Coupling::Direct:
        coupled = true;
        break;
      case Coupling::Grasp:
        coupled = out.gripping && world.possession == Possession::Robot;
        break;
      case Coupling::Contact:
        coupled = out.gripping && world.possession != Possession::Free &&
                  (world.object_position - palm).norm() <= script.contact_radius;
        break;
    }
    if (coupled) out.f_ext += wrench_at(a.profile, t);
  }
  return out;
}

}  // namespace handover
