#include "swarmlaw/state.hpp"

#include "swarmlaw/errors.hpp"

namespace swarmlaw {

void DomainSpec::validate() const {
  if (is_periodic() && !(side_length > 0.0 && std::isfinite(side_length))) {
    throw ConfigError("periodic domain requires a positive side length");
  }
}

namespace {

double wrap_component(double d, double side) {
  // Half-open (-L/2, L/2].
  return d - side * std::ceil(d / side - 0.5);
}

double wrap_coordinate(double x, double side) {
  double w = x - side * std::floor((x + 0.5 * side) / side);
  if (w >= 0.5 * side) w -= side;
  if (w < -0.5 * side) w += side;
  return w;
}

}  // namespace

Vec2 minimum_image(Vec2 disp, const DomainSpec& domain) {
  if (!domain.is_periodic()) return disp;
  return {wrap_component(disp.x, domain.side_length), wrap_component(disp.y, domain.side_length)};
}

Vec2 wrap_position(Vec2 p, const DomainSpec& domain) {
  if (!domain.is_periodic()) return p;
  return {wrap_coordinate(p.x, domain.side_length), wrap_coordinate(p.y, domain.side_length)};
}

}  // namespace swarmlaw
