// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance <path to handover_sim> <scratch dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "handover/harness.hpp"

using namespace handover;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

ScenarioConfig shipped(const std::string& name) { return load_scenario(resolve_scenario(name)); }

double inf_norm(const Vector6& v) { return v.cwiseAbs().maxCoeff(); }

struct Fig2Run {
  RunResult run;
  double seconds = 0.0;
};

Fig2Run run_timed(const ScenarioConfig& cfg) {
  const auto start = Clock::now();
  Fig2Run out{run_scenario(cfg), 0.0};
  out.seconds = seconds_since(start);
  return out;
}

// 1. Oracle overlap on both fig2 runs, and runtime.
Verdict oracle_overlap(const std::vector<Fig2Run>& runs) {
  Verdict v;
  for (const auto& r : runs) {
    const auto& recs = r.run.records;
    double peak = 0.0;
    Vector6 worst = Vector6::Zero();
    for (const auto& rec : recs) {
      peak = std::max(peak, inf_norm(rec.x_tilde));
      worst = worst.cwiseMax((rec.x_tilde_oracle - rec.x_tilde).cwiseAbs());
    }
    const std::string tag = std::string(to_string(r.run.summary.behavior));
    v.require(recs.size() == 10000, tag + ": expected 10000 records");
    v.require(std::all_of(recs.begin(), recs.end(), [](const auto& x) { return x.has_oracle(); }),
              tag + ": oracle missing");
    v.require(worst.maxCoeff() <= 1e-3 * peak, tag + ": overlap " + num(worst.maxCoeff()) + " > " + num(1e-3 * peak));
    v.require(r.seconds < 5.0, tag + ": runtime " + num(r.seconds) + " s");
    v.note(tag + " max|x~'-x~| = " + num(worst.maxCoeff()) + " (bound " + num(1e-3 * peak) + "), " + num(r.seconds) +
           " s");
  }
  return v;
}

// 2. Statics under a force held for 5 s.
Verdict statics() {
  Verdict v;
  const Vector6 forces[] = {(Vector6() << 5, 0, 0, 0, 0, 0).finished(), (Vector6() << 0, 5, 0, 0, 0, 0).finished(),
                            (Vector6() << 0, 0, 5, 0, 0, 0).finished()};
  double worst = 0.0;
  for (Behavior b : {Behavior::Rigid, Behavior::Compliant}) {
    for (const Vector6& f : forces) {
      auto cfg = shipped("fig2-rigid");
      cfg.set_behavior(b);
      cfg.duration = 5.0;
      HandAction push;
      push.kind = HandActionKind::Apply;
      push.coupling = Coupling::Direct;
      push.profile.segments = {{0.0, 10.0, f, Interpolation::Step}};
      cfg.hand.actions = {push};
      const auto run = run_scenario(cfg);
      const auto& last = run.records.back();
      const Vector6 deflection = run.gains.stiffness.llt().solve(f);
      const double residual = inf_norm(last.x_tilde + deflection);
      worst = std::max(worst, residual);
      v.require(residual < 1e-4, std::string(to_string(b)) + " residual " + num(residual));
    }
  }
  v.note("worst |x~ + K_D^-1 f|inf = " + num(worst) + " m (bound 1e-4)");
  return v;
}

double peak_x(const RunResult& run) {
  double p = 0.0;
  for (const auto& r : run.records) p = std::max(p, std::abs(r.x_tilde[0]));
  return p;
}

// 3. Compliant peak X deflection at least 5x rigid.
Verdict ordering(const RunResult& rigid, const RunResult& compliant) {
  Verdict v;
  const double ratio = peak_x(compliant) / peak_x(rigid);
  v.require(ratio >= 5.0, "ratio " + num(ratio));
  v.note("peak x: rigid " + num(peak_x(rigid)) + " m, compliant " + num(peak_x(compliant)) + " m, ratio " + num(ratio));
  return v;
}

// 4. After the force is removed the error falls below 1e-3 of its peak within 5 s and stays there.
Verdict rest_convergence(const std::vector<Fig2Run>& runs) {
  Verdict v;
  for (const auto& r : runs) {
    const auto& recs = r.run.records;
    double peak = 0.0, release = -1.0;
    for (std::size_t k = 0; k < recs.size(); ++k) {
      peak = std::max(peak, inf_norm(recs[k].x_tilde));
      if (release < 0.0 && k > 0 && recs[k - 1].f_ext.norm() > 0.0 && recs[k].f_ext.norm() == 0.0) release = recs[k].t;
    }
    double after = 0.0;
    for (const auto& rec : recs) {
      if (rec.t >= release + 5.0 - 1e-9) after = std::max(after, inf_norm(rec.x_tilde));
    }
    const std::string tag = std::string(to_string(r.run.summary.behavior));
    v.require(release > 0.0, tag + ": force never removed");
    v.require(after < 1e-3 * peak, tag + ": residual ratio " + num(after / peak));
    v.note(tag + " ratio at +5 s " + num(after / peak));
  }
  return v;
}

// 5. Storage function non-increasing with no external force.
Verdict passivity() {
  Verdict v;
  const auto model = default_free_flyer();
  for (Behavior b : {Behavior::Rigid, Behavior::Compliant}) {
    auto cfg = shipped("fig2-rigid");
    cfg.set_behavior(b);
    cfg.hand.actions.clear();
    cfg.duration = 5.0;
    cfg.desired_offset << 0.05, -0.03, 0.02, 0.1, -0.05, 0.08;
    const auto run = run_scenario(cfg);
    double previous = 0.0, worst_rise = -1e300;
    for (std::size_t k = 0; k < run.records.size(); ++k) {
      const auto& rec = run.records[k];
      GeneralizedState s{rec.xi, rec.xi_dot};
      const auto jac = restrict_to_base(jacobian(cfg.model, s));
      const auto dyn = restrict_to_base(dynamics_matrices(cfg.model, s, JointMode::Locked));
      EndEffectorState ee;
      ee.x = rec.x;
      ee.x_desired = rec.x_desired;
      ee.x_dot = rec.x_dot;
      const double storage = impedance_storage(cartesian_projection(dyn, jac), run.gains, ee);
      if (k > 0) worst_rise = std::max(worst_rise, storage - previous);
      previous = storage;
    }
    v.require(worst_rise <= 1e-6, std::string(to_string(b)) + " rise " + num(worst_rise));
    v.note(std::string(to_string(b)) + " max dV " + num(worst_rise));
  }
  return v;
}

// 6. Model properties over 100 random states.
Verdict dynamics_properties() {
  Verdict v;
  const auto start = Clock::now();
  const auto p = default_free_flyer();
  std::mt19937 rng(20240601);
  std::uniform_real_distribution<double> pos(-1.0, 1.0), ang(-0.6, 0.6), rate(-0.5, 0.5);
  double sym = 0.0, min_eig = 1e300, skew = 0.0, jac_err = 0.0, drift = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto s = GeneralizedState::zero(3);
    for (int k = 0; k < 3; ++k) s.xi[k] = pos(rng);
    for (int k = 3; k < 9; ++k) s.xi[k] = ang(rng);
    for (int k = 0; k < 9; ++k) s.xi_dot[k] = rate(rng);

    const Eigen::MatrixXd b = mass_matrix(p, s.xi);
    sym = std::max(sym, (b - b.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b).eigenvalues().minCoeff());

    const Eigen::MatrixXd n = mass_matrix_rate(p, s) - 2.0 * coriolis_matrix(p, s);
    skew = std::max(skew, std::abs(s.xi_dot.dot(n * s.xi_dot)) / s.xi_dot.squaredNorm());

    const double h = 1e-6;
    GeneralizedState fwd = s, bwd = s;
    fwd.xi += h * s.xi_dot;
    bwd.xi -= h * s.xi_dot;
    const Vector6 fd = pose_error(end_effector_pose(p, fwd), end_effector_pose(p, bwd)) / (2 * h);
    const Vector6 xdot = jacobian(p, s).J * s.xi_dot;
    jac_err = std::max(jac_err, (xdot - fd).norm() / std::max(fd.norm(), 1e-12));

    const double t0 = kinetic_energy(p, s);
    GeneralizedState run = s;
    for (int k = 0; k < 1000; ++k) run = forward_dynamics_step(p, run, GeneralizedForce::zero(9), 1e-3, JointMode::Free);
    drift = std::max(drift, std::abs(kinetic_energy(p, run) - t0) / t0);
  }
  const double elapsed = seconds_since(start);
  v.require(sym < 1e-10, "asymmetry " + num(sym));
  v.require(min_eig > 0.0, "B not positive definite");
  v.require(skew < 1e-8, "skew residual " + num(skew));
  v.require(jac_err < 1e-5, "Jacobian error " + num(jac_err));
  v.require(drift < 1e-6, "energy drift " + num(drift));
  v.require(elapsed < 30.0, "runtime " + num(elapsed) + " s");
  v.note("asym " + num(sym) + ", min eig " + num(min_eig) + ", skew " + num(skew) + ", J err " + num(jac_err) +
         ", drift " + num(drift) + ", " + num(elapsed) + " s");
  return v;
}

std::vector<std::string> fsm_events(const RunResult& run) {
  std::vector<std::string> out;
  for (const auto& e : run.events) {
    if (e.source == "fsm") out.push_back(e.event);
  }
  return out;
}

bool subsequence(const std::vector<std::string>& events, const std::vector<std::string>& wanted) {
  std::size_t k = 0;
  for (const auto& e : events) {
    if (k < wanted.size() && e == wanted[k]) ++k;
  }
  return k == wanted.size();
}

int count_triples(const std::vector<std::string>& e, const std::string& a, const std::string& b,
                  const std::string& c) {
  int n = 0;
  for (std::size_t i = 0; i + 2 < e.size(); ++i) n += e[i] == a && e[i + 1] == b && e[i + 2] == c;
  return n;
}

// 7. Handover traces, under both presets.
Verdict fsm_traces() {
  Verdict v;
  std::size_t releases = 0;
  for (Behavior b : {Behavior::Rigid, Behavior::Compliant}) {
    const std::string tag = std::string(to_string(b)) + " ";
    auto load = [&](const std::string& name) {
      auto cfg = shipped(name);
      cfg.set_behavior(b);
      return run_scenario(cfg);
    };
    const RunResult r2h = load("r2h-success");
    const RunResult h2r = load("h2r-success");
    const RunResult retry = load("h2r-fail-retry");
    const RunResult collab = load("collaborative");

    v.require(r2h.summary.outcome == Outcome::Success && r2h.records.back().fsm_node == FsmNode::Done,
              tag + "r2h did not finish");
    v.require(subsequence(fsm_events(r2h), {"gripper_open", "grasp", "goto_handover", "ic_on", "signal_ready",
                                            "release", "ic_off", "retract", "done"}),
              tag + "r2h event order");

    v.require(h2r.summary.outcome == Outcome::Success, tag + "h2r did not finish");
    bool verified = false;
    for (const auto& rec : h2r.records) {
      if (rec.event.find("grasp_ok") != std::string::npos) {
        verified = rec.gripper_aperture >= 0.005;
      }
    }
    v.require(verified, tag + "h2r verify aperture below beta");

    const auto re = fsm_events(retry);
    v.require(retry.summary.outcome == Outcome::Success, tag + "retry did not finish");
    v.require(count_triples(re, "signal_failure", "gripper_open", "signal_ready") == 1,
              tag + "retry sequence count " + std::to_string(count_triples(re, "signal_failure", "gripper_open",
                                                                            "signal_ready")));
    v.require(std::count(re.begin(), re.end(), "grasp_failed") == 1, tag + "expected one failed grasp");
    v.require(retry.summary.attempts == 2, tag + "attempts " + std::to_string(retry.summary.attempts));

    const auto ce = fsm_events(collab);
    v.require(collab.summary.outcome == Outcome::Success && std::count(ce.begin(), ce.end(), "done") == 2,
              tag + "collaborative incomplete");
    v.require(std::count(ce.begin(), ce.end(), "release") == 1 && std::count(ce.begin(), ce.end(), "grasp_ok") == 1,
              tag + "collaborative legs");

    for (const RunResult* run : {&r2h, &h2r, &retry, &collab}) {
      for (const auto& rec : run->records) {
        if (rec.event.find("release") == std::string::npos) continue;
        ++releases;
        v.require(rec.object_attached, tag + run->summary.scenario + ": release without attachment at t=" +
                                           num(rec.t));
      }
    }
  }
  v.note("8 runs, " + std::to_string(releases) + " releases, all with the object attached");
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. Two suite invocations through the CLI write identical files.
Verdict determinism(const std::string& cli, const fs::path& scratch) {
  Verdict v;
  const fs::path a = scratch / "suite-a", b = scratch / "suite-b";
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string dir = scenario_dir().string();
  for (const fs::path& out : {a, b}) {
    const std::string cmd = "\"" + cli + "\" suite \"" + dir + "\" --out \"" + out.string() + "\" > /dev/null";
    const int rc = std::system(cmd.c_str());
    v.require(rc == 0, "suite exited with " + std::to_string(rc));
  }
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    const fs::path twin = b / entry.path().filename();
    v.require(fs::exists(twin) && slurp(entry.path()) == slurp(twin),
              entry.path().filename().string() + " differs");
  }
  v.require(files > 0, "no CSV written");
  v.note(std::to_string(files) + " CSV files compared");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <handover_sim> <scratch dir>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path scratch = argv[2];
  fs::create_directories(scratch);

  int failures = 0;
  auto report = [&failures](int id, const char* title, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    failures += v.pass ? 0 : 1;
    std::printf("[%s] %d. %s -- %s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str());
    std::fflush(stdout);
  };

  std::vector<Fig2Run> fig2;
  try {
    fig2.push_back(run_timed(shipped("fig2-rigid")));
    fig2.push_back(run_timed(shipped("fig2-compliant")));
  } catch (const std::exception& e) {
    std::printf("fig2 runs failed: %s\n", e.what());
  }
  const bool have_fig2 = fig2.size() == 2;
  auto needs_fig2 = [&](const std::function<Verdict()>& f) {
    return [&, f] {
      if (!have_fig2) {
        Verdict v;
        v.require(false, "fig2 runs unavailable");
        return v;
      }
      return f();
    };
  };

  report(1, "Oracle overlap (fig2 rigid and compliant)", needs_fig2([&] { return oracle_overlap(fig2); }));
  report(2, "Steady-state statics", statics);
  report(3, "Behavior ordering", needs_fig2([&] { return ordering(fig2[0].run, fig2[1].run); }));
  report(4, "Rest convergence", needs_fig2([&] { return rest_convergence(fig2); }));
  report(5, "Passivity", passivity);
  report(6, "Dynamics property suite", dynamics_properties);
  report(7, "FSM trace suite", fsm_traces);
  report(8, "Determinism", [&] { return determinism(cli, scratch); });

  std::printf("%s: %d of 8 criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
