#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "swarmlaw/dynamics.hpp"
#include "swarmlaw/force_model.hpp"
#include "swarmlaw/metrics.hpp"
#include "swarmlaw/pattern.hpp"
#include "swarmlaw/trainer.hpp"

namespace swarmlaw {

/// Simulates `setup.n_agents` agents from a seeded random start. Initial state
/// and noise stream match run_trial for the same seed.
Trajectory simulate_swarm(const GroupAssignment& assignment, const TrialSetup& setup,
                          std::uint64_t seed, const TransitionSchedule* schedule = nullptr);

inline constexpr int kScenarioSchemaVersion = 1;

/// A model file path, or a pattern to be trained on the fly.
struct ModelRef {
  std::optional<std::string> file;
  std::optional<PatternSpec> pattern;
};

struct ScenarioGroup {
  std::size_t first = 1;  // 1-based, inclusive
  std::size_t last = 1;
};

struct ScenarioSegment {
  double t_start = 0.0;
  std::vector<ModelRef> models;  // one per group
};

struct ScenarioOutputs {
  std::string trajectory;
  std::string metrics;
  std::string group_metrics;  // optional; one block per group
};

struct ScenarioConfig {
  std::size_t n_agents = 40;
  std::uint64_t seed = 0;
  double duration = 50.0;
  double record_every = 0.1;
  InitClass init = InitClass::bounded_swarm;
  double density = 4.0;
  DomainSpec domain;
  double noise_sigma = 0.0;
  IntegratorConfig integrator;
  std::vector<ScenarioGroup> groups;
  std::vector<ScenarioSegment> segments;
  std::vector<NoiseWindow> noise_windows;
  ScenarioOutputs outputs;

  /// Structural checks that need no file access.
  void validate() const;
  std::vector<int> membership() const;
  TrialSetup trial_setup() const;
};

/// Throws ParseError / VersionError / ConfigError.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

struct ResolveOptions {
  std::filesystem::path base_dir;  // relative model paths resolve against this
  bool train_missing = false;
  std::optional<TrainingConfig> training;  // per-pattern defaults when unset
};

/// Loads or trains every referenced model and builds the schedule.
TransitionSchedule resolve_schedule(const ScenarioConfig& config, const ResolveOptions& options);

struct ScenarioRun {
  Trajectory trajectory;
  MetricSeries series;
  std::vector<MetricSeries> group_series;
};

/// A single segment without noise windows runs exactly like simulate_swarm.
/// Throws DivergenceError with the partial trajectory.
ScenarioRun run_scenario(const ScenarioConfig& config, const TransitionSchedule& schedule);

MetricSeries group_series(const Trajectory& traj, int group, const DomainSpec& domain);
void write_group_metrics_csv(std::ostream& out, const std::vector<MetricSeries>& per_group);

}  // namespace swarmlaw
