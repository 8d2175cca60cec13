#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "swarmlaw/force_model.hpp"

namespace swarmlaw {

enum class PatternKind { ordered, ring, clumps, mill_double, mill_single, flock };

std::string_view to_string(PatternKind kind);
/// Accepts both `mill_single` and `mill-single` spellings.
PatternKind parse_pattern_kind(std::string_view name);

/// Ring, clumps and mills are driven by distancing forces only; ordered state
/// by aligning only; flock by both.
bool uses_distancing(PatternKind kind);
bool uses_aligning(PatternKind kind);
bool is_field_pattern(PatternKind kind);

/// A commanded collective pattern and its geometric/dynamic targets.
struct PatternSpec {
  PatternKind kind = PatternKind::ring;
  std::optional<double> radius;          // R
  std::optional<double> cluster_spread;  // epsilon: std of the radius distribution
  int rotation_sign = +1;                // single mill only
  std::optional<double> t_order;         // ordered-state timing
  std::optional<double> flock_size;
  std::optional<double> max_radius;  // R_max hinge threshold
  std::optional<double> min_distance;  // d_min hinge threshold
  std::optional<double> interaction_range;  // r_c for aligning patterns

  /// Throws ConfigError if a target required by the kind is missing.
  void validate() const;

  static PatternSpec ring(double r);
  static PatternSpec clumps(double r, double eps);
  static PatternSpec mill_double(double r);
  static PatternSpec mill_single(double r, int rotation_sign);
  static PatternSpec ordered(double t_order, double r_c);
  static PatternSpec flock(double size, double r_c);

  PatternMeta meta() const;
  static PatternSpec from_meta(const PatternMeta& meta);
};

}  // namespace swarmlaw
