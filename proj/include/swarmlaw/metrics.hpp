#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "swarmlaw/dynamics.hpp"
#include "swarmlaw/pattern.hpp"
#include "swarmlaw/state.hpp"

namespace swarmlaw {

/// Magnitude of the mean heading, in [0, 1].
double polarization(const SwarmState& state);

struct AngularMomentum {
  double signed_value = 0.0;    // O_r in [-1, 1]
  double absolute_value = 0.0;  // O_r,abs in [0, 1]
  int excluded = 0;             // agents sitting on the center or at rest
};

/// Normalized angular momenta about `center` (center of mass when empty).
AngularMomentum angular_momentum(const SwarmState& state,
                                 std::optional<Vec2> center = std::nullopt);

struct Geometry {
  Vec2 center_of_mass;
  double mean_radius = 0.0;
  double radius_std = 0.0;
  double max_extent = 0.0;
  double min_pair_distance = 0.0;
};

Vec2 center_of_mass(const SwarmState& state);
Geometry geometry(const SwarmState& state, const DomainSpec& domain = DomainSpec::unbounded());

SwarmState subset(const SwarmState& state, const std::vector<int>& groups, int group);

struct MetricSeries {
  std::vector<double> times;
  std::vector<double> polarization;
  std::vector<double> angular_momentum;
  std::vector<double> abs_angular_momentum;
  std::vector<double> mean_radius;
  std::vector<double> radius_std;
  std::vector<double> max_extent;
  std::vector<double> min_pair_distance;

  std::size_t size() const { return times.size(); }
  void push(double t, const SwarmState& state, const DomainSpec& domain);
};

MetricSeries compute_series(const Trajectory& traj,
                            const DomainSpec& domain = DomainSpec::unbounded());
void write_metrics_csv(std::ostream& out, const MetricSeries& series);

/// First time polarization reaches `threshold`, linearly interpolated.
std::optional<double> time_to_order(const MetricSeries& series, double threshold = 0.9);

/// Final 20% of the run, but at least 5 time units.
double steady_window(double duration);

/// Time-averaged metrics over a trailing window.
struct TailSummary {
  double polarization = 0.0;
  double angular_momentum = 0.0;
  double abs_angular_momentum = 0.0;
  double mean_radius = 0.0;
  double radius_std = 0.0;
  double max_extent = 0.0;
  double min_pair_distance = 0.0;
};

TailSummary tail_average(const MetricSeries& series, double window);

struct ClassifyTolerances {
  double order = 0.9;          // O, O_r,abs and |O_r| thresholds
  double double_mill_net = 0.3;  // |O_r| ceiling for a double mill
  double radius = 0.15;        // relative radius / size tolerance
  double ring_spread = 0.1;    // radius_std / mean_radius ceiling for a ring
  double spread = 0.25;        // relative tolerance on epsilon for clumps
};

struct Classification {
  bool success = false;
  std::string diagnostic;
  TailSummary tail;
};

Classification classify_pattern(const MetricSeries& series, const PatternSpec& spec, double window,
                                const ClassifyTolerances& tol = {});
Classification classify_pattern(const Trajectory& traj, const PatternSpec& spec, double window,
                                const DomainSpec& domain = DomainSpec::unbounded(),
                                const ClassifyTolerances& tol = {});

/// Everything needed to simulate one verification trial.
struct TrialSetup {
  std::size_t n_agents = 40;
  double duration = 50.0;
  double record_every = 0.1;
  DomainSpec domain;
  NoiseSpec noise;
  IntegratorConfig integrator;
  InitClass init = InitClass::bounded_swarm;
  double density = 4.0;
  ClassifyTolerances tolerances;
};

/// Pattern-appropriate defaults: periodic box with sigma 1 noise for the
/// ordered state, unbounded with sigma 10 for flocks, noise-free otherwise.
TrialSetup default_trial_setup(const PatternSpec& spec, std::size_t n_agents = 40);

struct TrialOutcome {
  std::uint64_t seed = 0;
  bool success = false;
  bool diverged = false;
  bool has_metrics = false;
  std::string diagnostic;
  TailSummary tail;
  std::optional<double> time_to_order;
};

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

struct TrialReport {
  std::size_t n_trials = 0;
  std::size_t successes = 0;
  double success_probability = 0.0;
  std::vector<TrialOutcome> trials;
  std::vector<std::pair<std::string, MetricStats>> per_metric;
};

TrialOutcome run_trial(const PatternSpec& spec, const InteractionModel& model,
                       const TrialSetup& setup, std::uint64_t seed);

/// Runs `n_trials` independent simulations. Trials are spread over `threads`
/// workers (0: SWARMLAW_THREADS or 1) and merged in trial order.
TrialReport trial_harness(const PatternSpec& spec, const InteractionModel& model,
                          std::size_t n_trials, std::uint64_t seed, const TrialSetup& setup,
                          unsigned threads = 0);

std::string trial_report_json(const TrialReport& report);

/// Worker count from the SWARMLAW_THREADS environment variable (default 1).
unsigned default_thread_count();

}  // namespace swarmlaw
