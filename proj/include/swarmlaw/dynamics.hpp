#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "swarmlaw/errors.hpp"
#include "swarmlaw/force_model.hpp"
#include "swarmlaw/state.hpp"

namespace swarmlaw {

/// Reference self-propelled speed.
inline constexpr double kDefaultPropulsionSpeed = 2.0;
inline constexpr double kDefaultMaxStep = 0.01;

struct NoiseSpec {
  double sigma = 0.0;
  bool enabled = false;

  static NoiseSpec off() { return {}; }
  static NoiseSpec gaussian(double sigma) { return {sigma, sigma > 0.0}; }
};

struct IntegratorConfig {
  double max_step = kDefaultMaxStep;
  double propulsion_speed = kDefaultPropulsionSpeed;
  std::uint64_t rng_seed = 0;
  /// Test hook: drop the propulsion term from the equations of motion.
  bool propulsion_enabled = true;

  void validate() const;
};

struct Trajectory {
  std::vector<SwarmState> frames;
  std::vector<int> groups;  // per-agent group index, for export

  bool empty() const { return frames.empty(); }
  double start_time() const { return frames.front().time; }
  double end_time() const { return frames.back().time; }
  double duration() const { return end_time() - start_time(); }
};

/// Raised when the state becomes non-finite. Carries everything recorded
/// before the blow-up.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time, int agent, Trajectory partial)
      : Error(what), time(time), agent(agent), partial(std::move(partial)) {}
  double time;
  int agent;
  Trajectory partial;
};

/// Linear propulsion v (v0/|v| - 1); zero below kSpeedFloor.
Vec2 propulsion(Vec2 velocity, double v0);

struct StateDerivative {
  std::vector<Vec2> position_rate;
  std::vector<Vec2> velocity_rate;
};

StateDerivative state_derivative(const SwarmState& state, const GroupAssignment& assignment,
                                 const DomainSpec& domain, std::span<const Vec2> noise_draw,
                                 double v0 = kDefaultPropulsionSpeed,
                                 const TransitionSchedule* schedule = nullptr,
                                 bool propulsion_enabled = true);

/// Fixed-step classic RK4. Noise is drawn once per agent per step and held over
/// the four stages. Records the initial state, every `record_every`, and the
/// final state.
Trajectory rk4_integrate(const SwarmState& initial, const GroupAssignment& assignment,
                         const DomainSpec& domain, const NoiseSpec& noise,
                         const IntegratorConfig& config, double t_end, double record_every,
                         const TransitionSchedule* schedule = nullptr);

enum class InitClass { bounded_swarm, field };

/// Side length that gives number density n / L^2.
double side_for_density(std::size_t n_agents, double density);

SwarmState init_random(InitClass cls, std::size_t n_agents, const DomainSpec& domain, double v0,
                       std::uint64_t seed, double density = 4.0);

/// Deterministic child seed for stream `index` of a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace swarmlaw
