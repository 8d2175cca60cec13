#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace swarmlaw {

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  static AdamState create(std::size_t n, double learning_rate = 1e-3);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> gradient);

/// Fills `gradient` and returns the objective value.
using Objective = std::function<double(std::span<const double> x, std::span<double> gradient)>;

enum class LbfgsTermination {
  loss_tolerance,    // f < tolerance
  loss_change,       // |f_k - f_{k-1}| < change_tolerance
  gradient,          // max |g| < gradient_tolerance
  max_iterations,
  line_search_failed,
  non_finite,
};

std::string_view to_string(LbfgsTermination t);

struct LbfgsOptions {
  double tolerance = 1e-4;
  double change_tolerance = 1e-9;
  double gradient_tolerance = 1e-7;
  std::size_t max_iterations = 2000;
  std::size_t history = 20;
  std::size_t max_line_search_evals = 25;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  /// Called after every accepted iterate with (iteration, f).
  std::function<void(std::size_t, double)> on_iteration;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  LbfgsTermination termination = LbfgsTermination::max_iterations;
  bool converged = false;
};

/// Limited-memory BFGS (two-loop recursion) with a strong-Wolfe line search.
/// Never throws on numerical trouble: it returns the best iterate so far.
LbfgsResult lbfgs_optimize(std::vector<double> x0, const Objective& objective,
                           const LbfgsOptions& options = {});

}  // namespace swarmlaw
