// swarmlaw command-line tool: train, simulate, scenario, trials, metrics.
//
// Exit codes: 0 success, 2 usage/config error, 3 numerical divergence,
// 4 training did not converge.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "swarmlaw/dynamics.hpp"
#include "swarmlaw/errors.hpp"
#include "swarmlaw/force_model.hpp"
#include "swarmlaw/metrics.hpp"
#include "swarmlaw/pattern.hpp"
#include "swarmlaw/scenario.hpp"
#include "swarmlaw/trainer.hpp"

namespace {

using namespace swarmlaw;
using ojson = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitNotConverged = 4;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Identifies one invocation: command plus every flag that affects results.
struct RunInfo {
  std::string command;
  std::uint64_t seed = 0;
  std::string canonical;  // output paths excluded

  std::string hash() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(command + "|" + canonical)));
    return buf;
  }
  std::string header() const {
    return "# swarmlaw " + command + " seed=" + std::to_string(seed) + " config=" + hash() + "\n";
  }
  std::string with_run(const std::string& json_text) const {
    auto doc = ojson::parse(json_text);
    ojson out;
    out["run"] = {{"command", command}, {"seed", seed}, {"config_hash", hash()}};
    for (auto& [k, v] : doc.items()) out[k] = v;
    return out.dump(2) + "\n";
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("failed writing " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// --- shared simulation flags -----------------------------------------------

struct SimFlags {
  std::size_t agents = 40;
  std::optional<double> duration;
  double record_every = 0.1;
  std::optional<double> noise;
  std::string domain;  // "", unbounded, periodic
  std::optional<double> side;
  std::string init;  // "", bounded_swarm, field
  double max_step = kDefaultMaxStep;

  void add(CLI::App* cmd) {
    cmd->add_option("--agents,-n", agents, "Number of agents (>= 2)");
    cmd->add_option("--duration", duration, "Simulated time span");
    cmd->add_option("--record-every", record_every, "Output interval");
    cmd->add_option("--noise", noise, "Noise standard deviation (0 disables)");
    cmd->add_option("--domain", domain, "unbounded or periodic")
        ->check(CLI::IsMember({"unbounded", "periodic"}));
    cmd->add_option("--side", side, "Periodic box side (default from density 4)");
    cmd->add_option("--init", init, "bounded_swarm or field")
        ->check(CLI::IsMember({"bounded_swarm", "field"}));
    cmd->add_option("--max-step", max_step, "Largest RK4 step");
  }

  /// Pattern defaults from the model metadata, overridden by flags.
  TrialSetup setup(const InteractionModel& model) const {
    if (agents < 2) throw ConfigError("--agents must be at least 2");
    TrialSetup s;
    if (!model.meta.kind.empty()) {
      s = default_trial_setup(PatternSpec::from_meta(model.meta), agents);
    }
    s.n_agents = agents;
    if (duration) s.duration = *duration;
    s.record_every = record_every;
    if (noise) s.noise = NoiseSpec::gaussian(*noise);
    if (domain == "unbounded") s.domain = DomainSpec::unbounded();
    if (domain == "periodic" || (side && domain.empty())) {
      s.domain = DomainSpec::periodic(side ? *side : side_for_density(agents, s.density));
    }
    if (init == "bounded_swarm") s.init = InitClass::bounded_swarm;
    if (init == "field") s.init = InitClass::field;
    s.integrator.max_step = max_step;
    s.domain.validate();
    s.integrator.validate();
    if (!(s.duration > 0.0) || !(s.record_every > 0.0)) {
      throw ConfigError("--duration and --record-every must be positive");
    }
    return s;
  }

  static std::string canonical(const TrialSetup& s) {
    return "n=" + std::to_string(s.n_agents) + ";T=" + num(s.duration) +
           ";dt=" + num(s.record_every) + ";sigma=" + num(s.noise.enabled ? s.noise.sigma : 0.0) +
           ";domain=" + (s.domain.is_periodic() ? "periodic:" + num(s.domain.side_length)
                                                : std::string("unbounded")) +
           ";init=" + (s.init == InitClass::field ? "field" : "bounded_swarm") +
           ";h=" + num(s.integrator.max_step);
  }
};

std::string trajectory_text(const RunInfo& run, const Trajectory& traj) {
  std::ostringstream os;
  os << run.header();
  write_trajectory_csv(os, traj);
  return os.str();
}

std::string metrics_text(const RunInfo& run, const MetricSeries& series) {
  std::ostringstream os;
  os << run.header();
  write_metrics_csv(os, series);
  return os.str();
}

// --- train -------------------------------------------------------------------

struct TrainFlags {
  std::string pattern;
  std::optional<double> radius, epsilon, t_order, flock_size, range, max_radius, min_distance;
  std::string rotation = "ccw";
  std::uint64_t seed = 0;
  std::string out, report;
  TrainingConfig cfg;
  std::optional<double> horizon;
  std::optional<std::size_t> terms, restarts;
  bool timing = false;
  std::size_t verify = 0;
};

PatternSpec pattern_from_flags(const TrainFlags& f) {
  PatternSpec s;
  s.kind = parse_pattern_kind(f.pattern);
  s.radius = f.radius;
  s.cluster_spread = f.epsilon;
  s.rotation_sign = f.rotation == "cw" ? -1 : +1;
  s.t_order = f.t_order;
  s.flock_size = f.flock_size;
  s.interaction_range = f.range;
  s.max_radius = f.max_radius;
  s.min_distance = f.min_distance;
  s.validate();
  return s;
}

int cmd_train(const TrainFlags& f) {
  const auto spec = pattern_from_flags(f);
  auto cfg = f.cfg;
  const auto defaults = TrainingConfig::for_pattern(spec.kind);
  cfg.horizon = f.horizon.value_or(defaults.horizon);
  cfg.n_terms = f.terms.value_or(defaults.n_terms);
  cfg.restarts = f.restarts.value_or(defaults.restarts);
  cfg.seed = f.seed;
  cfg.validate();

  RunInfo run{"train", f.seed, {}};
  {
    std::string c = "pattern=" + std::string(to_string(spec.kind));
    for (const auto& [k, v] : spec.meta().targets) c += ";" + k + "=" + num(v);
    c += ";N=" + std::to_string(cfg.n_agents) + ";Nt=" + std::to_string(cfg.n_time_points) +
         ";T=" + num(cfg.horizon) + ";adam=" + std::to_string(cfg.adam_epochs) +
         ";lr=" + num(cfg.adam_learning_rate) + ";tol=" + num(cfg.lbfgs_tolerance) +
         ";iters=" + std::to_string(cfg.lbfgs_max_iterations) + ";K=" + std::to_string(cfg.n_terms) + ";restarts=" + std::to_string(cfg.restarts);
    run.canonical = c;
  }

  auto result = train(spec, cfg);
  if (!f.timing) result.report.wall_time.reset();
  write_file(f.out, run.with_run(serialize_model(result.model)));

  std::string report = training_report_json(result.report);
  if (f.verify > 0) {
    const auto trials = verify_by_simulation(result.model, spec, f.verify,
                                             derive_seed(f.seed, 7), cfg.n_agents);
    auto doc = ojson::parse(report);
    doc["verification"] = ojson::parse(trial_report_json(trials));
    report = doc.dump(2) + "\n";
  }
  const std::string report_path = f.report.empty() ? f.out + ".report.json" : f.report;
  write_file(report_path, run.with_run(report));

  std::cerr << "termination: " << result.report.termination << ", final loss "
            << result.report.final_terms["total"] << "\n";
  return result.report.converged ? kExitOk : kExitNotConverged;
}

// --- simulate ----------------------------------------------------------------

struct SimulateFlags {
  std::string model;
  std::uint64_t seed = 0;
  std::string out, metrics;
  SimFlags sim;
};

int write_divergence(const RunInfo& run, const DivergenceError& e, const std::string& out) {
  if (!out.empty()) write_file(out, trajectory_text(run, e.partial));
  std::cerr << "error: diverged at t = " << e.time << " (agent " << e.agent << "): " << e.what()
            << "\n";
  return kExitDiverged;
}

int cmd_simulate(const SimulateFlags& f) {
  const auto model = load_model(f.model);
  const auto setup = f.sim.setup(model);
  RunInfo run{"simulate", f.seed,
              "model=" + std::to_string(fnv1a(serialize_model(model))) + ";" +
                  SimFlags::canonical(setup)};
  Trajectory traj;
  try {
    traj = simulate_swarm(GroupAssignment::homogeneous(setup.n_agents, model), setup, f.seed);
  } catch (const DivergenceError& e) {
    return write_divergence(run, e, f.out);
  }
  write_file(f.out, trajectory_text(run, traj));
  if (!f.metrics.empty()) {
    // Metrics come from the stored trajectory, as `metrics` would compute them.
    std::istringstream in(trajectory_text(run, traj));
    write_file(f.metrics, metrics_text(run, compute_series(read_trajectory_csv(in), setup.domain)));
  }
  return kExitOk;
}

// --- scenario ----------------------------------------------------------------

struct ScenarioFlags {
  std::string file;
  std::optional<std::uint64_t> seed;
  bool train_missing = false;
  std::string out, metrics, group_metrics;
};

int cmd_scenario(const ScenarioFlags& f) {
  auto cfg = load_scenario(f.file);
  if (f.seed) cfg.seed = *f.seed;
  // Paths inside the file are relative to it; command-line overrides to the cwd.
  const auto base = std::filesystem::path(f.file).parent_path();
  for (auto* p : {&cfg.outputs.trajectory, &cfg.outputs.metrics, &cfg.outputs.group_metrics}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).string();
  }
  if (!f.out.empty()) cfg.outputs.trajectory = f.out;
  if (!f.metrics.empty()) cfg.outputs.metrics = f.metrics;
  if (!f.group_metrics.empty()) cfg.outputs.group_metrics = f.group_metrics;
  if (cfg.outputs.trajectory.empty()) throw ConfigError("scenario: no trajectory output path");

  ResolveOptions opts;
  opts.base_dir = base;
  opts.train_missing = f.train_missing;
  const auto schedule = resolve_schedule(cfg, opts);

  std::string canonical = "scenario=" + std::to_string(fnv1a(read_file(f.file)));
  for (const auto& seg : schedule.segments) {
    for (const auto& m : seg.assignment.models) {
      canonical += ";m=" + std::to_string(fnv1a(serialize_model(m)));
    }
  }
  RunInfo run{"scenario", cfg.seed, canonical};
  ScenarioRun result;
  try {
    result = run_scenario(cfg, schedule);
  } catch (const DivergenceError& e) {
    return write_divergence(run, e, cfg.outputs.trajectory);
  }
  write_file(cfg.outputs.trajectory, trajectory_text(run, result.trajectory));
  if (!cfg.outputs.metrics.empty()) {
    write_file(cfg.outputs.metrics, metrics_text(run, result.series));
  }
  if (!cfg.outputs.group_metrics.empty()) {
    std::ostringstream os;
    os << run.header();
    write_group_metrics_csv(os, result.group_series);
    write_file(cfg.outputs.group_metrics, os.str());
  }
  return kExitOk;
}

// --- trials ------------------------------------------------------------------

struct TrialsFlags {
  std::string model;
  std::size_t n = 20;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out;
  SimFlags sim;
};

int cmd_trials(const TrialsFlags& f) {
  const auto model = load_model(f.model);
  if (model.meta.kind.empty()) throw ConfigError("model file has no pattern metadata");
  if (f.n < 1) throw ConfigError("--trials must be at least 1");
  const auto spec = PatternSpec::from_meta(model.meta);
  spec.validate();
  const auto setup = f.sim.setup(model);
  RunInfo run{"trials", f.seed,
              "model=" + std::to_string(fnv1a(serialize_model(model))) +
                  ";n_trials=" + std::to_string(f.n) + ";" + SimFlags::canonical(setup)};
  const auto report = trial_harness(spec, model, f.n, f.seed, setup, f.threads);
  const auto text = run.with_run(trial_report_json(report));
  if (f.out.empty()) {
    std::cout << text;
  } else {
    write_file(f.out, text);
  }
  return kExitOk;
}

// --- metrics -----------------------------------------------------------------

struct MetricsFlags {
  std::string trajectory;
  std::string out;
  std::uint64_t seed = 0;
  std::optional<double> side;
};

int cmd_metrics(const MetricsFlags& f) {
  std::ifstream in(f.trajectory, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + f.trajectory);
  const auto traj = read_trajectory_csv(in);
  const auto domain = f.side ? DomainSpec::periodic(*f.side) : DomainSpec::unbounded();
  domain.validate();
  RunInfo run{"metrics", f.seed,
              "trajectory=" + std::to_string(fnv1a(read_file(f.trajectory))) +
                  (f.side ? ";side=" + num(*f.side) : std::string())};
  write_file(f.out, metrics_text(run, compute_series(traj, domain)));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and simulate interaction laws for self-propelled swarms"};
  app.require_subcommand(1);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train an interaction model for a pattern");
  train_cmd->add_option("--pattern", tf.pattern, "ordered, ring, clumps, mill-double, mill-single, flock")
      ->required();
  train_cmd->add_option("--radius,-R", tf.radius, "Target radius R");
  train_cmd->add_option("--epsilon", tf.epsilon, "Clump spread (radius std)");
  train_cmd->add_option("--rotation", tf.rotation, "Single mill direction")
      ->check(CLI::IsMember({"ccw", "cw"}));
  train_cmd->add_option("--t-order", tf.t_order, "Commanded ordering time");
  train_cmd->add_option("--flock-size", tf.flock_size, "Flock size");
  train_cmd->add_option("--range", tf.range, "Aligning interaction range r_c");
  train_cmd->add_option("--max-radius", tf.max_radius, "Hinge threshold R_max");
  train_cmd->add_option("--min-distance", tf.min_distance, "Hinge threshold d_min");
  train_cmd->add_option("--seed", tf.seed, "Master seed");
  train_cmd->add_option("--out,-o", tf.out, "Model JSON path")->required();
  train_cmd->add_option("--report", tf.report, "Report JSON path (default <out>.report.json)");
  train_cmd->add_option("--agents,-n", tf.cfg.n_agents, "Number of agents");
  train_cmd->add_option("--time-points", tf.cfg.n_time_points, "Time grid size N_t");
  train_cmd->add_option("--horizon", tf.horizon, "Training horizon T (default per pattern)");
  train_cmd->add_option("--adam-epochs", tf.cfg.adam_epochs, "Adam warm-up epochs");
  train_cmd->add_option("--max-iter", tf.cfg.lbfgs_max_iterations, "L-BFGS iteration cap");
  train_cmd->add_option("--tolerance", tf.cfg.lbfgs_tolerance, "L-BFGS loss tolerance");
  train_cmd->add_option("--terms", tf.terms, "Polynomial terms per coefficient function (default per pattern)");
  train_cmd->add_option("--restarts", tf.restarts, "Independent starts; the lowest final loss is kept");
  train_cmd->add_option("--verify", tf.verify, "Append a simulation check with this many trials");
  train_cmd->add_flag("--timing", tf.timing, "Record wall time in the report");

  SimulateFlags sf;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a trained model");
  sim_cmd->add_option("--model,-m", sf.model, "Model JSON")->required();
  sim_cmd->add_option("--seed", sf.seed, "Seed for initial state and noise");
  sim_cmd->add_option("--out,-o", sf.out, "Trajectory CSV")->required();
  sim_cmd->add_option("--metrics", sf.metrics, "Metrics CSV");
  sf.sim.add(sim_cmd);

  ScenarioFlags cf;
  auto* sc_cmd = app.add_subcommand("scenario", "Run a multi-segment / multi-group scenario");
  sc_cmd->add_option("file", cf.file, "Scenario JSON")->required();
  sc_cmd->add_option("--seed", cf.seed, "Override the scenario seed");
  sc_cmd->add_flag("--train-missing", cf.train_missing, "Train inline pattern specs");
  sc_cmd->add_option("--out,-o", cf.out, "Trajectory CSV (overrides file)");
  sc_cmd->add_option("--metrics", cf.metrics, "Metrics CSV (overrides file)");
  sc_cmd->add_option("--group-metrics", cf.group_metrics, "Per-group metrics CSV");

  TrialsFlags rf;
  auto* tr_cmd = app.add_subcommand("trials", "Success probability over random starts");
  tr_cmd->add_option("--model,-m", rf.model, "Model JSON")->required();
  tr_cmd->add_option("--trials", rf.n, "Number of trials");
  tr_cmd->add_option("--seed", rf.seed, "Master seed");
  tr_cmd->add_option("--threads", rf.threads, "Worker threads (0: SWARMLAW_THREADS or 1)");
  tr_cmd->add_option("--out,-o", rf.out, "Report JSON (default stdout)");
  rf.sim.add(tr_cmd);

  MetricsFlags mf;
  auto* me_cmd = app.add_subcommand("metrics", "Recompute metrics from a trajectory CSV");
  me_cmd->add_option("trajectory", mf.trajectory, "Trajectory CSV")->required();
  me_cmd->add_option("--out,-o", mf.out, "Metrics CSV")->required();
  me_cmd->add_option("--seed", mf.seed, "Recorded in the header only");
  me_cmd->add_option("--side", mf.side, "Periodic box side for minimum-image distances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(tf);
    if (*sim_cmd) return cmd_simulate(sf);
    if (*sc_cmd) return cmd_scenario(cf);
    if (*tr_cmd) return cmd_trials(rf);
    if (*me_cmd) return cmd_metrics(mf);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const swarmlaw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
