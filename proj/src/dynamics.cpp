#include "swarmlaw/dynamics.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "swarmlaw/errors.hpp"

namespace swarmlaw {

void IntegratorConfig::validate() const {
  if (!(max_step > 0.0) || max_step > kDefaultMaxStep) {
    throw ConfigError("max_step must lie in (0, 0.01]");
  }
  if (!(propulsion_speed > 0.0)) throw ConfigError("propulsion speed must be positive");
}

Vec2 propulsion(Vec2 velocity, double v0) {
  const double speed = norm(velocity);
  if (speed < kSpeedFloor) return {};
  return (v0 / speed - 1.0) * velocity;
}

StateDerivative state_derivative(const SwarmState& state, const GroupAssignment& assignment,
                                 const DomainSpec& domain, std::span<const Vec2> noise_draw,
                                 double v0, const TransitionSchedule* schedule,
                                 bool propulsion_enabled) {
  const std::size_t n = state.size();
  StateDerivative d;
  d.position_rate.resize(n);
  d.velocity_rate = total_force(state, assignment, domain, state.time, schedule);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 v = state.agents[i].velocity;
    d.position_rate[i] = v;
    if (propulsion_enabled) d.velocity_rate[i] += propulsion(v, v0);
    if (!noise_draw.empty()) d.velocity_rate[i] += noise_draw[i];
  }
  return d;
}

namespace {

SwarmState advance(const SwarmState& base, const StateDerivative& k, double h) {
  SwarmState s = base;
  s.time = base.time + h;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.agents[i].position += h * k.position_rate[i];
    s.agents[i].velocity += h * k.velocity_rate[i];
  }
  return s;
}

int first_non_finite(const SwarmState& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_finite(s.agents[i].position) || !is_finite(s.agents[i].velocity)) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

}  // namespace

Trajectory rk4_integrate(const SwarmState& initial, const GroupAssignment& assignment,
                         const DomainSpec& domain, const NoiseSpec& noise,
                         const IntegratorConfig& config, double t_end, double record_every,
                         const TransitionSchedule* schedule) {
  config.validate();
  domain.validate();
  if (schedule) {
    schedule->validate();
  } else {
    assignment.validate();
  }
  const std::size_t n = initial.size();
  if (n < 2) throw ConfigError("a swarm needs at least two agents");
  const std::size_t n_assigned =
      schedule ? schedule->segments.front().assignment.n_agents() : assignment.n_agents();
  if (n_assigned != n) throw ConfigError("group assignment does not cover every agent");
  if (!(t_end > initial.time)) throw ConfigError("t_end must be after the initial time");
  if (!(record_every >= config.max_step)) {
    throw ConfigError("record_every must be at least max_step");
  }

  Trajectory traj;
  traj.groups = schedule ? schedule->segments.front().assignment.membership : assignment.membership;
  SwarmState state = initial;
  for (auto& a : state.agents) a.position = wrap_position(a.position, domain);
  traj.frames.push_back(state);

  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec2> eta(n);
  const double v0 = config.propulsion_speed;
  const double t0 = initial.time;
  const double span = t_end - t0;
  const auto n_chunks = static_cast<std::size_t>(std::ceil(span / record_every - 1e-9));

  auto deriv = [&](const SwarmState& s) {
    return state_derivative(s, assignment, domain, eta, v0, schedule, config.propulsion_enabled);
  };

  for (std::size_t c = 0; c < n_chunks; ++c) {
    const double chunk_start = t0 + static_cast<double>(c) * record_every;
    const double chunk_end =
        (c + 1 == n_chunks) ? t_end : t0 + static_cast<double>(c + 1) * record_every;
    const double len = chunk_end - chunk_start;
    const auto steps = static_cast<std::size_t>(std::ceil(len / config.max_step - 1e-9));
    const double h = len / static_cast<double>(steps);
    for (std::size_t s = 0; s < steps; ++s) {
      const double t = chunk_start + static_cast<double>(s) * h;
      state.time = t;
      double sigma = noise.enabled ? noise.sigma : 0.0;
      if (schedule) {
        if (const auto* w = schedule->noise_window_at(t)) sigma = w->sigma;
      }
      for (auto& e : eta) {
        if (sigma > 0.0) {
          e.x = sigma * gauss(rng);
          e.y = sigma * gauss(rng);
        } else {
          e = {};
        }
      }
      try {
        const auto k1 = deriv(state);
        const auto k2 = deriv(advance(state, k1, 0.5 * h));
        const auto k3 = deriv(advance(state, k2, 0.5 * h));
        const auto k4 = deriv(advance(state, k3, h));
        for (std::size_t i = 0; i < n; ++i) {
          auto& a = state.agents[i];
          a.position += (h / 6.0) * (k1.position_rate[i] + 2.0 * k2.position_rate[i] +
                                     2.0 * k3.position_rate[i] + k4.position_rate[i]);
          a.velocity += (h / 6.0) * (k1.velocity_rate[i] + 2.0 * k2.velocity_rate[i] +
                                     2.0 * k3.velocity_rate[i] + k4.velocity_rate[i]);
          a.position = wrap_position(a.position, domain);
        }
      } catch (const CoincidentAgentError& e) {
        throw DivergenceError(std::string("divergence at t = ") + std::to_string(t) + ": " +
                                  e.what(),
                              t, e.agent_i, std::move(traj));
      } catch (const EvaluationError& e) {
        throw DivergenceError(std::string("divergence at t = ") + std::to_string(t) + ": " +
                                  e.what(),
                              t, -1, std::move(traj));
      }
      const int bad = first_non_finite(state);
      if (bad >= 0) {
        std::ostringstream msg;
        msg << "divergence at t = " << t + h << ": agent " << bad << " has a non-finite state";
        throw DivergenceError(msg.str(), t + h, bad, std::move(traj));
      }
    }
    state.time = chunk_end;
    traj.frames.push_back(state);
  }
  return traj;
}

double side_for_density(std::size_t n_agents, double density) {
  if (!(density > 0.0)) throw ConfigError("density must be positive");
  return std::sqrt(static_cast<double>(n_agents) / density);
}

SwarmState init_random(InitClass cls, std::size_t n_agents, const DomainSpec& domain, double v0,
                       std::uint64_t seed, double density) {
  std::mt19937_64 rng(seed);
  SwarmState s;
  s.agents.resize(n_agents);
  if (cls == InitClass::bounded_swarm) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& a : s.agents) {
      a.position = {u(rng), u(rng)};
      a.velocity = {u(rng), u(rng)};
    }
    return s;
  }
  const double side =
      domain.is_periodic() ? domain.side_length : side_for_density(n_agents, density);
  std::uniform_real_distribution<double> up(-0.5 * side, 0.5 * side);
  std::uniform_real_distribution<double> uv(-v0, v0);
  for (auto& a : s.agents) {
    a.position = wrap_position({up(rng), up(rng)}, domain);
    a.velocity = {uv(rng), uv(rng)};
  }
  return s;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 over the pair
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

void put_double(std::ostream& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError("trajectory CSV line " + std::to_string(line) + ": bad number '" +
                     std::string(s) + "'");
  }
  return v;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,agent,group,x,y,vx,vy\n";
  for (const auto& frame : traj.frames) {
    for (std::size_t i = 0; i < frame.size(); ++i) {
      const auto& a = frame.agents[i];
      put_double(out, frame.time);
      out << ',' << i << ',' << (i < traj.groups.size() ? traj.groups[i] : 0) << ',';
      put_double(out, a.position.x);
      out << ',';
      put_double(out, a.position.y);
      out << ',';
      put_double(out, a.velocity.x);
      out << ',';
      put_double(out, a.velocity.y);
      out << '\n';
    }
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "t,agent,group,x,y,vx,vy") {
        throw ParseError("trajectory CSV: unexpected header '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    std::string_view rest(line);
    std::string_view fields[7];
    for (int k = 0; k < 7; ++k) {
      const auto comma = rest.find(',');
      if ((comma == std::string_view::npos) != (k == 6)) {
        throw ParseError("trajectory CSV line " + std::to_string(lineno) +
                         ": expected 7 fields");
      }
      fields[k] = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    const double t = parse_double(fields[0], lineno);
    const auto agent = static_cast<std::size_t>(parse_double(fields[1], lineno));
    const int group = static_cast<int>(parse_double(fields[2], lineno));
    if (traj.frames.empty() || traj.frames.back().time != t) {
      if (!traj.frames.empty() && !(t > traj.frames.back().time)) {
        throw ParseError("trajectory CSV line " + std::to_string(lineno) + ": time not sorted");
      }
      traj.frames.push_back(SwarmState{{}, t});
    }
    auto& frame = traj.frames.back();
    if (agent != frame.size()) {
      throw ParseError("trajectory CSV line " + std::to_string(lineno) + ": agent out of order");
    }
    frame.agents.push_back({{parse_double(fields[3], lineno), parse_double(fields[4], lineno)},
                            {parse_double(fields[5], lineno), parse_double(fields[6], lineno)}});
    if (traj.frames.size() == 1) traj.groups.push_back(group);
  }
  if (!header_seen) throw ParseError("trajectory CSV: missing header");
  for (const auto& f : traj.frames) {
    if (f.size() != traj.groups.size()) {
      throw ParseError("trajectory CSV: frames have differing agent counts");
    }
  }
  return traj;
}

}  // namespace swarmlaw
