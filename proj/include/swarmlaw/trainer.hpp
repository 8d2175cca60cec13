#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swarmlaw/autodiff.hpp"
#include "swarmlaw/force_model.hpp"
#include "swarmlaw/metrics.hpp"
#include "swarmlaw/network.hpp"
#include "swarmlaw/pattern.hpp"

namespace swarmlaw {

/// Weights of the pattern-describing loss terms.
struct LossWeights {
  double v_initial = 0.0;
  double r_initial = 0.0;
  double center_of_mass = 0.0;
  double per_agent_radius = 0.0;
  double mean_radius = 0.0;
  double radius_std = 0.0;
  double min_distance_hinge = 0.0;
  double abs_angular_momentum = 0.0;
  double angular_momentum = 0.0;
  double speed_norm = 0.0;
  double order_final = 0.0;
  double order_ramp = 0.0;
  double max_radius_hinge = 0.0;

  /// Standard weights for each pattern.
  static LossWeights defaults(PatternKind kind);
  /// (name, weight) in a fixed order; names match the report keys.
  std::vector<std::pair<std::string, double>> named() const;
  void validate() const;
};

struct TrainingConfig {
  double horizon = 50.0;                 // T
  std::size_t n_time_points = 201;       // N_t
  std::size_t adam_epochs = 200;
  double adam_learning_rate = 1e-3;
  double lbfgs_tolerance = 1e-4;
  std::size_t lbfgs_max_iterations = 2000;
  std::size_t n_terms = 4;               // K
  std::uint64_t seed = 0;
  std::size_t n_agents = 40;
  double propulsion_speed = 2.0;         // v0
  double density = 4.0;                  // field patterns
  std::optional<double> output_scale;    // defaults per pattern
  std::optional<LossWeights> weights;    // defaults per pattern
  /// Independent starts (seed, then derived seeds); the lowest final loss wins.
  std::size_t restarts = 1;

  /// Horizon, term count and restarts that train reliably for each pattern.
  static TrainingConfig for_pattern(PatternKind kind);
  void validate() const;
  /// Everything but the production grid floor; lets tests build tiny problems.
  void validate_problem() const;
};

/// Time indices where loss terms are evaluated.
struct Collocation {
  std::vector<std::size_t> general;  // ODE residual and most pattern terms
  std::vector<std::size_t> hinge;    // max-radius / min-distance terms
};

/// Equidistant indices covering 10% of the grid including both ends; flock
/// hinge terms use 5% of the grid restricted to its second half.
Collocation collocation_points(std::size_t n_time_points, PatternKind kind);
std::vector<std::size_t> equidistant_indices(std::size_t first, std::size_t last,
                                             std::size_t count);

/// Polynomial parameters as tape variables plus how forces are assembled.
struct ForceTerms {
  std::vector<ad::Var> f_coeff, f_exponent, g_coeff, g_exponent;
  bool distancing = true;
  bool aligning = false;
  std::optional<double> cutoff_radius;
  DomainSpec domain;
};

/// Mean over agents and jets of |dv/dt - propulsion - sum_j F_ij|^2.
ad::Var ode_residual_loss(std::span<const TimeJetVars> jets, const ForceTerms& forces,
                          double v0);

struct LossBreakdown {
  ad::Var total;
  ad::Var ode;
  std::vector<std::pair<std::string, ad::Var>> terms;  // unweighted L_*
};

/// Assembles the full training objective for one pattern.
class TrainingProblem {
 public:
  TrainingProblem(PatternSpec spec, TrainingConfig config);

  const PatternSpec& spec() const { return spec_; }
  const TrainingConfig& config() const { return config_; }
  const LossWeights& weights() const { return weights_; }
  const NetworkLayout& layout() const { return layout_; }
  double output_scale() const { return output_scale_; }
  const Collocation& collocation() const { return colloc_; }
  double time_at(std::size_t index) const;
  const SwarmState& initial_targets() const { return initial_; }
  double min_distance() const { return d_min_; }
  double max_radius() const { return r_max_; }

  NetworkParameters initial_parameters() const;
  LossBreakdown evaluate(ad::Tape& tape, std::span<const ad::Var> params) const;
  /// Total loss; fills `gradient` when non-empty.
  double loss(std::span<const double> params, std::span<double> gradient) const;
  std::map<std::string, double> term_values(std::span<const double> params) const;
  /// Interaction model encoded in the polynomial block of `params`.
  InteractionModel extract_model(std::span<const double> params) const;

  ForceTerms force_terms(std::span<const ad::Var> params) const;
  /// Pattern terms (unweighted) given jets at each required time index.
  std::vector<std::pair<std::string, ad::Var>> ground_truth_terms(
      const std::map<std::size_t, TimeJetVars>& jets) const;

 private:
  std::vector<double> controls() const;

  PatternSpec spec_;
  TrainingConfig config_;
  LossWeights weights_;
  NetworkLayout layout_;
  double output_scale_ = 1.0;
  Collocation colloc_;
  SwarmState initial_;
  double initial_order_ = 0.0;
  double d_min_ = 0.0;
  double r_max_ = 0.0;
  DomainSpec domain_;
};

struct TrainingReport {
  PatternSpec spec;
  std::uint64_t seed = 0;
  std::vector<double> loss_curve;  // one entry per Adam epoch / L-BFGS iteration
  std::map<std::string, double> final_terms;
  std::string termination;
  bool converged = false;
  std::size_t adam_epochs = 0;
  std::size_t lbfgs_iterations = 0;
  std::size_t evaluations = 0;
  std::vector<double> restart_losses;  // final total per start, +inf if diverged
  std::size_t selected_restart = 0;
  std::optional<double> wall_time;
};

struct TrainingResult {
  InteractionModel model;
  TrainingReport report;
  NetworkParameters params;
};

/// Adam for `adam_epochs` full-batch steps, then L-BFGS to `lbfgs_tolerance`,
/// repeated for each start in `config.restarts`.
TrainingResult train(const PatternSpec& spec, const TrainingConfig& config);

/// Report JSON; `wall_time` is emitted only when recorded.
std::string training_report_json(const TrainingReport& report);

/// Simulation check of a trained model with pattern-appropriate setup.
TrialReport verify_by_simulation(const InteractionModel& model, const PatternSpec& spec,
                                 std::size_t n_trials, std::uint64_t seed,
                                 std::size_t n_agents = 40);

}  // namespace swarmlaw
