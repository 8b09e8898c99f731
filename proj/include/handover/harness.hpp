#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "handover/handover_fsm.hpp"
#include "handover/human_agent.hpp"
#include "handover/impedance.hpp"
#include "handover/scenario.hpp"

namespace handover {

/// One logged simulation step. Every quantity is sampled at time t, before
/// the step is integrated; commands issued at t act from t + dt.
struct TrajectoryRecord {
  double t = 0.0;
  Eigen::VectorXd xi;
  Eigen::VectorXd xi_dot;
  Vector6 x = Vector6::Zero();
  Vector6 x_desired = Vector6::Zero();
  Vector6 x_dot = Vector6::Zero();
  Vector6 x_ddot = Vector6::Zero();
  Vector6 x_tilde = Vector6::Zero();
  Vector6 x_tilde_oracle = Vector6::Constant(std::numeric_limits<double>::quiet_NaN());  // NaN: IC inactive
  Vector6 f_ext = Vector6::Zero();
  FsmNode fsm_node = FsmNode::Idle;
  double gripper_aperture = 0.0;
  bool object_attached = false;
  bool ic_active = false;
  Possession possession = Possession::Free;
  std::string event;  // ';'-separated, empty when nothing happened

  bool has_oracle() const { return ic_active; }
};

struct EventRecord {
  double t = 0.0;
  std::size_t step = 0;
  std::string source;  // fsm, agent, harness
  std::string event;
  int attempt = 0;
};

enum class Outcome { Success, Failed };

std::string_view to_string(Outcome o);

struct RunSummary {
  std::string scenario;
  ScenarioMode mode = ScenarioMode::Validation;
  Behavior behavior = Behavior::Rigid;
  Outcome outcome = Outcome::Failed;
  int attempts = 0;
  double transfer_duration = 0.0;  // s, summed over transfer phases that ended in success
  Vector6 peak_error = Vector6::Zero();  // max |x_tilde| per axis while IC active
  bool early_termination = false;
  std::size_t steps = 0;
  std::string error;  // set when the run aborted (suite rows only)
};

struct RunResult {
  std::vector<TrajectoryRecord> records;
  std::vector<EventRecord> events;
  RunSummary summary;
  GainSet gains;  // impedance gains in effect while IC is active
};

/// Steps the closed loop: agent wrench, u_ext = J^T f_ext, controller,
/// RK4 dynamics, state machine, log. Stops at Done/Failed or the horizon.
/// Errors from the model are rethrown with the offending step attached.
RunResult run_scenario(const ScenarioConfig& config);

/// Number of records a full-horizon run produces: ceil(duration / dt).
std::size_t horizon_steps(const ScenarioConfig& config);

void write_trajectory_csv(std::ostream& out, const RunResult& run);
void write_events_csv(std::ostream& out, const RunResult& run);
void write_summary_text(std::ostream& out, const RunSummary& summary);

/// "<name>-<behavior>", the stem of every output file of a run.
std::string run_stem(const RunSummary& summary);

/// Writes <stem>_trajectory.csv and <stem>_events.csv into dir.
void write_run_outputs(const RunResult& run, const std::filesystem::path& dir);

/// Runs every config independently (in parallel when `parallel`), keeping
/// input order. A failing run becomes a Failed row with its error message.
/// When out_dir is non-empty each run's logs are written there.
std::vector<RunSummary> run_suite(const std::vector<ScenarioConfig>& configs, const std::filesystem::path& out_dir = {},
                                  bool parallel = true);

void write_suite_csv(std::ostream& out, const std::vector<RunSummary>& rows);
void write_suite_table(std::ostream& out, const std::vector<RunSummary>& rows);

}  // namespace handover
