#include "swarmlaw/pattern.hpp"

#include "swarmlaw/errors.hpp"

namespace swarmlaw {

std::string_view to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::ordered:
      return "ordered";
    case PatternKind::ring:
      return "ring";
    case PatternKind::clumps:
      return "clumps";
    case PatternKind::mill_double:
      return "mill_double";
    case PatternKind::mill_single:
      return "mill_single";
    case PatternKind::flock:
      return "flock";
  }
  return "unknown";
}

PatternKind parse_pattern_kind(std::string_view name) {
  std::string s(name);
  for (auto& c : s) {
    if (c == '-') c = '_';
  }
  if (s == "ordered") return PatternKind::ordered;
  if (s == "ring") return PatternKind::ring;
  if (s == "clumps") return PatternKind::clumps;
  if (s == "mill_double" || s == "double_mill") return PatternKind::mill_double;
  if (s == "mill_single" || s == "single_mill") return PatternKind::mill_single;
  if (s == "flock") return PatternKind::flock;
  throw ConfigError("unknown pattern kind '" + std::string(name) + "'");
}

bool uses_distancing(PatternKind kind) { return kind != PatternKind::ordered; }
bool uses_aligning(PatternKind kind) {
  return kind == PatternKind::ordered || kind == PatternKind::flock;
}
bool is_field_pattern(PatternKind kind) {
  return kind == PatternKind::ordered || kind == PatternKind::flock;
}

namespace {

void require(const std::optional<double>& v, const char* what, PatternKind kind) {
  if (!v) {
    throw ConfigError(std::string(to_string(kind)) + " pattern requires target '" + what + "'");
  }
  if (!(*v > 0.0)) throw ConfigError(std::string("target '") + what + "' must be positive");
}

void positive_if_set(const std::optional<double>& v, const char* what) {
  if (v && !(*v > 0.0)) throw ConfigError(std::string("target '") + what + "' must be positive");
}

}  // namespace

void PatternSpec::validate() const {
  switch (kind) {
    case PatternKind::ring:
    case PatternKind::mill_double:
      require(radius, "radius", kind);
      break;
    case PatternKind::mill_single:
      require(radius, "radius", kind);
      if (rotation_sign != 1 && rotation_sign != -1) {
        throw ConfigError("rotation sign must be +1 or -1");
      }
      break;
    case PatternKind::clumps:
      require(radius, "radius", kind);
      require(cluster_spread, "epsilon", kind);
      break;
    case PatternKind::ordered:
      require(t_order, "t_order", kind);
      require(interaction_range, "interaction_range", kind);
      break;
    case PatternKind::flock:
      require(flock_size, "flock_size", kind);
      require(interaction_range, "interaction_range", kind);
      break;
  }
  positive_if_set(max_radius, "max_radius");
  positive_if_set(min_distance, "min_distance");
}

PatternSpec PatternSpec::ring(double r) {
  PatternSpec s;
  s.kind = PatternKind::ring;
  s.radius = r;
  return s;
}

PatternSpec PatternSpec::clumps(double r, double eps) {
  PatternSpec s;
  s.kind = PatternKind::clumps;
  s.radius = r;
  s.cluster_spread = eps;
  return s;
}

PatternSpec PatternSpec::mill_double(double r) {
  PatternSpec s;
  s.kind = PatternKind::mill_double;
  s.radius = r;
  return s;
}

PatternSpec PatternSpec::mill_single(double r, int rotation_sign) {
  PatternSpec s;
  s.kind = PatternKind::mill_single;
  s.radius = r;
  s.rotation_sign = rotation_sign;
  return s;
}

PatternSpec PatternSpec::ordered(double t_order, double r_c) {
  PatternSpec s;
  s.kind = PatternKind::ordered;
  s.t_order = t_order;
  s.interaction_range = r_c;
  return s;
}

PatternSpec PatternSpec::flock(double size, double r_c) {
  PatternSpec s;
  s.kind = PatternKind::flock;
  s.flock_size = size;
  s.interaction_range = r_c;
  return s;
}

PatternMeta PatternSpec::meta() const {
  PatternMeta m;
  m.kind = std::string(to_string(kind));
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) m.targets[key] = *v;
  };
  put("R", radius);
  put("epsilon", cluster_spread);
  if (kind == PatternKind::mill_single) m.targets["rotation_sign"] = rotation_sign;
  put("t_order", t_order);
  put("flock_size", flock_size);
  put("R_max", max_radius);
  put("d_min", min_distance);
  put("r_c", interaction_range);
  return m;
}

PatternSpec PatternSpec::from_meta(const PatternMeta& meta) {
  PatternSpec s;
  s.kind = parse_pattern_kind(meta.kind);
  auto get = [&](const char* key) -> std::optional<double> {
    auto it = meta.targets.find(key);
    if (it == meta.targets.end()) return std::nullopt;
    return it->second;
  };
  s.radius = get("R");
  s.cluster_spread = get("epsilon");
  if (auto sign = get("rotation_sign")) s.rotation_sign = *sign < 0 ? -1 : 1;
  s.t_order = get("t_order");
  s.flock_size = get("flock_size");
  s.max_radius = get("R_max");
  s.min_distance = get("d_min");
  s.interaction_range = get("r_c");
  return s;
}

}  // namespace swarmlaw
