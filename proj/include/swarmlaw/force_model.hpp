#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swarmlaw/state.hpp"

namespace swarmlaw {

/// Distances below this are clamped before exponentiation, since exponents
/// may be negative reals.
inline constexpr double kDistanceFloor = 1e-6;
/// Relative speeds below this switch the aligning term off.
inline constexpr double kSpeedFloor = 1e-8;

struct PolyTerm {
  double coeff = 0.0;
  double exponent = 0.0;
  friend bool operator==(const PolyTerm&, const PolyTerm&) = default;
};

/// c(r) = sum_k coeff_k * r^exponent_k with r clamped to kDistanceFloor.
class CoefficientFunction {
 public:
  CoefficientFunction() : terms_{PolyTerm{}} {}
  explicit CoefficientFunction(std::vector<PolyTerm> terms);

  static CoefficientFunction zero(std::size_t k = 1);

  double operator()(double r) const;
  /// Same value as operator() given log(max(r, floor)) precomputed.
  double eval_log(double log_r) const;

  const std::vector<PolyTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const;
  CoefficientFunction scaled(double s) const;

  friend bool operator==(const CoefficientFunction&, const CoefficientFunction&) = default;

 private:
  std::vector<PolyTerm> terms_;
};

double eval_coefficient(const CoefficientFunction& fn, double r);

/// Free-form description of the pattern a model was trained for.
struct PatternMeta {
  std::string kind;
  std::map<std::string, double> targets;
  friend bool operator==(const PatternMeta&, const PatternMeta&) = default;
};

struct InteractionModel {
  CoefficientFunction distancing;
  CoefficientFunction aligning;
  /// Aligning term vanishes beyond this range; unbounded when empty.
  std::optional<double> cutoff_radius;
  /// Optional range for the distancing term; off by default.
  std::optional<double> distancing_cutoff;
  PatternMeta meta;

  void validate() const;
  friend bool operator==(const InteractionModel&, const InteractionModel&) = default;
};

/// Force on agent i from agent j. `disp` is the (minimum-imaged) displacement
/// from j to i; negative distancing coefficients attract.
Vec2 pair_force(const InteractionModel& model, Vec2 pos_i, Vec2 vel_i, Vec2 pos_j, Vec2 vel_j,
                Vec2 disp);

struct GroupAssignment {
  std::vector<int> membership;  // group index per agent
  std::vector<InteractionModel> models;

  static GroupAssignment homogeneous(std::size_t n_agents, InteractionModel model);
  std::size_t n_agents() const { return membership.size(); }
  const InteractionModel& model_of(std::size_t agent) const {
    return models[static_cast<std::size_t>(membership[agent])];
  }
  void validate() const;
};

struct NoiseWindow {
  double start = 0.0;
  double end = 0.0;
  double sigma = 0.0;  // noise standard deviation inside the window
};

/// Piecewise sequence of assignments; each new segment is blended in from the
/// previous one with weight 1 - exp(t_p - t).
struct TransitionSchedule {
  struct Segment {
    double start = 0.0;
    GroupAssignment assignment;
  };
  std::vector<Segment> segments;
  std::vector<NoiseWindow> noise_windows;  // interaction forces are zero inside

  void validate() const;
  /// Index of the segment active at t (last one with start <= t).
  std::size_t active_segment(double t) const;
  const NoiseWindow* noise_window_at(double t) const;
};

double blend_weight(double t, double t_p);

/// Per-agent total interaction force. With a schedule, the assignment argument
/// is ignored in favour of the schedule's segments.
std::vector<Vec2> total_force(const SwarmState& state, const GroupAssignment& assignment,
                              const DomainSpec& domain, double t,
                              const TransitionSchedule* schedule = nullptr);

/// Sum of pairwise forces for one fixed assignment (no blending).
void accumulate_forces(const SwarmState& state, const GroupAssignment& assignment,
                       const DomainSpec& domain, std::span<Vec2> out);

inline constexpr int kModelSchemaVersion = 1;

std::string serialize_model(const InteractionModel& model);
InteractionModel deserialize_model(const std::string& text);
InteractionModel load_model(const std::string& path);
void save_model(const InteractionModel& model, const std::string& path);

}  // namespace swarmlaw
