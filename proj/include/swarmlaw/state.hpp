#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace swarmlaw {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
/// z-component of the 2D cross product.
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline bool is_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

struct AgentState {
  Vec2 position;
  Vec2 velocity;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct SwarmState {
  std::vector<AgentState> agents;
  double time = 0.0;

  std::size_t size() const { return agents.size(); }
  friend bool operator==(const SwarmState&, const SwarmState&) = default;
};

enum class DomainKind { unbounded, periodic };

struct DomainSpec {
  DomainKind kind = DomainKind::unbounded;
  double side_length = 0.0;  // periodic only; box is [-L/2, L/2)^2

  static DomainSpec unbounded() { return {}; }
  static DomainSpec periodic(double side) { return {DomainKind::periodic, side}; }
  bool is_periodic() const { return kind == DomainKind::periodic; }
  /// Throws ConfigError when a periodic domain has a non-positive side.
  void validate() const;
};

/// Wraps each component of a displacement into (-L/2, L/2]. Identity for
/// unbounded domains.
Vec2 minimum_image(Vec2 displacement, const DomainSpec& domain);

/// Wraps a position into the periodic box [-L/2, L/2)^2.
Vec2 wrap_position(Vec2 position, const DomainSpec& domain);

/// Displacement from agent j to agent i, minimum-imaged when periodic.
inline Vec2 displacement(Vec2 pos_i, Vec2 pos_j, const DomainSpec& domain) {
  return minimum_image(pos_i - pos_j, domain);
}

}  // namespace swarmlaw
