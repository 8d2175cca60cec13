#include "swarmlaw/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>

#include "swarmlaw/dynamics.hpp"
#include "swarmlaw/errors.hpp"
#include "swarmlaw/optim.hpp"

namespace swarmlaw {

using ad::Var;

LossWeights LossWeights::defaults(PatternKind kind) {
  LossWeights w;
  switch (kind) {
    case PatternKind::ring:
      w.v_initial = 1;
      w.per_agent_radius = 5;
      w.abs_angular_momentum = 5;
      break;
    case PatternKind::clumps:
      w.v_initial = 1;
      w.center_of_mass = 1;
      w.mean_radius = 1;
      w.radius_std = 5;
      break;
    case PatternKind::mill_double:
      w.v_initial = 1;
      w.center_of_mass = 1;
      w.mean_radius = 1;
      w.min_distance_hinge = 5;
      w.abs_angular_momentum = 5;
      break;
    case PatternKind::mill_single:
      w.v_initial = 1;
      w.center_of_mass = 1;
      w.mean_radius = 1;
      w.min_distance_hinge = 5;
      w.angular_momentum = 5;
      break;
    case PatternKind::ordered:
      w.r_initial = 5;
      w.v_initial = 5;
      w.speed_norm = 5;
      w.order_final = 5;
      w.order_ramp = 5;
      break;
    case PatternKind::flock:
      w.r_initial = 1;
      w.v_initial = 1;
      w.speed_norm = 5;
      w.max_radius_hinge = 5;
      w.min_distance_hinge = 5;
      break;
  }
  return w;
}

std::vector<std::pair<std::string, double>> LossWeights::named() const {
  return {{"v_initial", v_initial},
          {"r_initial", r_initial},
          {"center_of_mass", center_of_mass},
          {"per_agent_radius", per_agent_radius},
          {"mean_radius", mean_radius},
          {"radius_std", radius_std},
          {"min_distance_hinge", min_distance_hinge},
          {"O_r_abs", abs_angular_momentum},
          {"O_r", angular_momentum},
          {"speed_norm", speed_norm},
          {"order_final", order_final},
          {"order_ramp", order_ramp},
          {"max_radius_hinge", max_radius_hinge}};
}

void LossWeights::validate() const {
  for (const auto& [name, w] : named()) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weight " + name + " must be >= 0");
  }
}

TrainingConfig TrainingConfig::for_pattern(PatternKind kind) {
  TrainingConfig c;
  switch (kind) {
    case PatternKind::ring:
    case PatternKind::clumps:
    case PatternKind::mill_double:
    case PatternKind::mill_single:
      // Long horizons let the static "outward velocity, inward pull" state
      // win; a single power law over a short window escapes it more often.
      c.horizon = 10.0;
      c.n_terms = 1;
      c.restarts = 4;
      break;
    case PatternKind::flock:
      c.n_terms = 2;
      c.restarts = 2;
      break;
    case PatternKind::ordered:
      c.n_terms = 1;
      c.restarts = 2;
      break;
  }
  return c;
}

void TrainingConfig::validate() const {
  if (n_time_points < 20) throw ConfigError("need at least 20 time points");
  validate_problem();
}

void TrainingConfig::validate_problem() const {
  if (!(horizon > 0.0)) throw ConfigError("training horizon must be positive");
  if (n_time_points < 2) throw ConfigError("need at least 2 time points");
  if (n_terms < 1) throw ConfigError("need at least one polynomial term");
  if (n_agents < 2) throw ConfigError("need at least two agents");
  if (!(propulsion_speed > 0.0)) throw ConfigError("propulsion speed must be positive");
  if (!(lbfgs_tolerance > 0.0)) throw ConfigError("L-BFGS tolerance must be positive");
  if (restarts < 1) throw ConfigError("need at least one training start");
  if (output_scale && !(*output_scale > 0.0)) throw ConfigError("output scale must be positive");
  if (weights) weights->validate();
}

std::vector<std::size_t> equidistant_indices(std::size_t first, std::size_t last,
                                             std::size_t count) {
  std::vector<std::size_t> out;
  if (count <= 1 || last <= first) {
    out.push_back(first);
    if (last > first) out.push_back(last);
    return out;
  }
  const double span = static_cast<double>(last - first);
  for (std::size_t k = 0; k < count; ++k) {
    const auto idx = first + static_cast<std::size_t>(
                                 std::llround(span * static_cast<double>(k) /
                                              static_cast<double>(count - 1)));
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

Collocation collocation_points(std::size_t n_time_points, PatternKind kind) {
  if (n_time_points < 2) throw ConfigError("need at least two time points");
  Collocation c;
  const auto count = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n_time_points))));
  c.general = equidistant_indices(0, n_time_points - 1, count);
  if (kind == PatternKind::flock) {
    const auto hinge_count = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(n_time_points))));
    c.hinge = equidistant_indices(n_time_points / 2, n_time_points - 1, hinge_count);
  } else {
    c.hinge = c.general;
  }
  return c;
}

// --- forces on the tape ----------------------------------------------------

namespace {

// Half-width of the training-time cutoff ramp, relative to r_c.
constexpr double kCutoffWidth = 0.02;

struct AgentVars {
  Var x, y, vx, vy, ax, ay;
};

AgentVars agent(const TimeJetVars& j, std::size_t i) {
  return {j.value[2 * i],  j.value[2 * i + 1],  j.first[2 * i],
          j.first[2 * i + 1], j.second[2 * i], j.second[2 * i + 1]};
}

/// Constant shift that maps a displacement component to its minimum image.
double image_shift(double d, const DomainSpec& domain) {
  if (!domain.is_periodic()) return 0.0;
  const double L = domain.side_length;
  return -L * std::ceil(d / L - 0.5);
}

Var series(std::span<const Var> coeff, std::span<const Var> exponent, const Var& log_r) {
  std::vector<Var> powers;
  powers.reserve(coeff.size());
  for (const auto& n : exponent) powers.push_back(ad::exp(n * log_r));
  return ad::dot(coeff, powers);
}

Var mean_of(std::vector<Var>& xs) { return ad::mean(xs); }

}  // namespace

Var ode_residual_loss(std::span<const TimeJetVars> jets, const ForceTerms& forces, double v0) {
  if (jets.empty()) throw ConfigError("ODE residual needs at least one collocation time");
  std::vector<Var> squares;
  std::size_t n_total = 0;
  for (const auto& jet : jets) {
    const std::size_t n = jet.value.size() / 2;
    n_total += n;
    std::vector<std::vector<Var>> cx(n), cy(n);
    std::vector<std::vector<double>> sx(n), sy(n);
    auto add = [&](std::size_t i, const Var& fx, const Var& fy, double sign) {
      cx[i].push_back(fx);
      sx[i].push_back(sign);
      cy[i].push_back(fy);
      sy[i].push_back(sign);
    };
    for (std::size_t i = 0; i < n; ++i) {
      const auto ai = agent(jet, i);
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto aj = agent(jet, j);
        Var dx = ai.x - aj.x;
        Var dy = ai.y - aj.y;
        if (forces.domain.is_periodic()) {
          dx = dx + image_shift(dx.value(), forces.domain);
          dy = dy + image_shift(dy.value(), forces.domain);
        }
        const Var r = ad::hypot_floor(dx, dy, kDistanceFloor);
        const Var log_r = ad::log(r);
        if (forces.distancing) {
          const Var c = series(forces.f_coeff, forces.f_exponent, log_r) / r;
          const Var fx = c * dx;
          const Var fy = c * dy;
          add(i, fx, fy, 1.0);
          add(j, fx, fy, -1.0);
        }
        const double reach =
            forces.cutoff_radius ? *forces.cutoff_radius * (1.0 + 12.0 * kCutoffWidth) : 0.0;
        if (forces.aligning && (!forces.cutoff_radius || r.value() <= reach)) {
          const Var rvx = aj.vx - ai.vx;
          const Var rvy = aj.vy - ai.vy;
          const double s_val = std::hypot(rvx.value(), rvy.value());
          if (s_val >= kSpeedFloor) {
            const Var s = ad::hypot_floor(rvx, rvy, kSpeedFloor);
            Var c = series(forces.g_coeff, forces.g_exponent, log_r) / s;
            if (forces.cutoff_radius) {
              // A hard step makes the loss jump whenever a pair crosses r_c and
              // stalls the line search; train against a narrow tanh ramp instead.
              const double rc = *forces.cutoff_radius;
              c = c * (0.5 - 0.5 * ad::tanh((r - rc) / (kCutoffWidth * rc)));
            }
            const Var fx = c * rvx;
            const Var fy = c * rvy;
            add(i, fx, fy, 1.0);
            add(j, fx, fy, -1.0);
          }
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto ai = agent(jet, i);
      Var fx = 0.0, fy = 0.0;
      if (!cx[i].empty()) {
        double vx = 0.0, vy = 0.0;
        for (std::size_t k = 0; k < cx[i].size(); ++k) {
          vx += sx[i][k] * cx[i][k].value();
          vy += sy[i][k] * cy[i][k].value();
        }
        ad::Tape* tape = nullptr;
        for (const auto& v : cx[i]) tape = tape ? tape : v.tape();
        for (const auto& v : cy[i]) tape = tape ? tape : v.tape();
        if (tape) {
          fx = tape->node(vx, cx[i], sx[i]);
          fy = tape->node(vy, cy[i], sy[i]);
        } else {
          fx = vx;
          fy = vy;
        }
      }
      Var px = 0.0, py = 0.0;
      const double speed = std::hypot(ai.vx.value(), ai.vy.value());
      if (speed >= kSpeedFloor) {
        const Var p = v0 / ad::hypot_floor(ai.vx, ai.vy, kSpeedFloor) - 1.0;
        px = p * ai.vx;
        py = p * ai.vy;
      }
      squares.push_back(ad::square(ai.ax - px - fx));
      squares.push_back(ad::square(ai.ay - py - fy));
    }
  }
  return ad::sum(squares) / static_cast<double>(n_total);
}

// --- training problem --------------------------------------------------------

TrainingProblem::TrainingProblem(PatternSpec spec, TrainingConfig config)
    : spec_(std::move(spec)), config_(std::move(config)) {
  spec_.validate();
  config_.validate_problem();
  weights_ = config_.weights ? *config_.weights : LossWeights::defaults(spec_.kind);
  const auto kind = spec_.kind;
  const double n = static_cast<double>(config_.n_agents);

  auto need = [&](bool active, bool present, const char* term, const char* target) {
    if (active && !present) {
      throw ConfigError(std::string("loss term ") + term + " needs target " + target);
    }
  };
  need(weights_.per_agent_radius > 0 || weights_.mean_radius > 0 ||
           weights_.abs_angular_momentum > 0 || weights_.angular_momentum > 0,
       spec_.radius.has_value(), "radius/angular momentum", "R");
  need(weights_.radius_std > 0, spec_.cluster_spread.has_value(), "radius_std", "epsilon");
  need(weights_.order_ramp > 0, spec_.t_order.has_value(), "order_ramp", "t_order");
  need(weights_.max_radius_hinge > 0,
       spec_.max_radius.has_value() || spec_.flock_size.has_value(), "max_radius_hinge", "R_max");
  need(weights_.min_distance_hinge > 0,
       spec_.min_distance || spec_.radius || spec_.flock_size, "min_distance_hinge", "d_min");

  const double length = spec_.radius.value_or(spec_.flock_size.value_or(1.0));
  d_min_ = spec_.min_distance.value_or(2.0 * M_PI * length / (2.0 * n));
  r_max_ = spec_.max_radius.value_or(spec_.flock_size.value_or(0.0));

  if (kind == PatternKind::ordered) {
    domain_ = DomainSpec::periodic(side_for_density(config_.n_agents, config_.density));
  }
  if (config_.output_scale) {
    output_scale_ = *config_.output_scale;
  } else if (kind == PatternKind::ordered) {
    output_scale_ = domain_.side_length;
  } else {
    output_scale_ = length;
  }
  layout_ = {config_.n_agents, kind == PatternKind::ordered ? 1u : 0u, config_.n_terms};
  colloc_ = collocation_points(config_.n_time_points, kind);

  const auto cls = is_field_pattern(kind) ? InitClass::field : InitClass::bounded_swarm;
  initial_ = init_random(cls, config_.n_agents, domain_, config_.propulsion_speed,
                         derive_seed(config_.seed, 2), config_.density);
  Vec2 heading;
  for (const auto& a : initial_.agents) {
    const double s = norm(a.velocity);
    if (s >= kSpeedFloor) heading += a.velocity / s;
  }
  initial_order_ = norm(heading) / n;
}

double TrainingProblem::time_at(std::size_t index) const {
  return config_.horizon * static_cast<double>(index) /
         static_cast<double>(config_.n_time_points - 1);
}

std::vector<double> TrainingProblem::controls() const {
  if (layout_.n_controls == 0) return {};
  return {*spec_.t_order / config_.horizon};
}

NetworkParameters TrainingProblem::initial_parameters() const {
  return init_parameters(config_.n_agents, spec_.kind, derive_seed(config_.seed, 1),
                         config_.n_terms, layout_.n_controls, output_scale_);
}

ForceTerms TrainingProblem::force_terms(std::span<const Var> params) const {
  ForceTerms f;
  const std::size_t k = layout_.n_terms;
  auto slice = [&](std::size_t off) {
    return std::vector<Var>(params.begin() + static_cast<std::ptrdiff_t>(off),
                            params.begin() + static_cast<std::ptrdiff_t>(off + k));
  };
  f.f_coeff = slice(layout_.f_coeff_offset());
  f.f_exponent = slice(layout_.f_exponent_offset());
  f.g_coeff = slice(layout_.g_coeff_offset());
  f.g_exponent = slice(layout_.g_exponent_offset());
  f.distancing = uses_distancing(spec_.kind);
  f.aligning = uses_aligning(spec_.kind);
  f.cutoff_radius = spec_.interaction_range;
  f.domain = domain_;
  return f;
}

namespace {

struct Frame {
  std::vector<Var> x, y, vx, vy;
  Var cx, cy;
  std::vector<Var> relx, rely, radius;
};

Frame make_frame(const TimeJetVars& j) {
  Frame f;
  const std::size_t n = j.value.size() / 2;
  for (std::size_t i = 0; i < n; ++i) {
    f.x.push_back(j.value[2 * i]);
    f.y.push_back(j.value[2 * i + 1]);
    f.vx.push_back(j.first[2 * i]);
    f.vy.push_back(j.first[2 * i + 1]);
  }
  f.cx = ad::mean(f.x);
  f.cy = ad::mean(f.y);
  for (std::size_t i = 0; i < n; ++i) {
    f.relx.push_back(f.x[i] - f.cx);
    f.rely.push_back(f.y[i] - f.cy);
    f.radius.push_back(ad::hypot_floor(f.relx[i], f.rely[i], kDistanceFloor));
  }
  return f;
}

Var polarization_of(const Frame& f) {
  std::vector<Var> ux, uy;
  for (std::size_t i = 0; i < f.vx.size(); ++i) {
    const Var s = ad::hypot_floor(f.vx[i], f.vy[i], kSpeedFloor);
    ux.push_back(f.vx[i] / s);
    uy.push_back(f.vy[i] / s);
  }
  return ad::hypot_floor(ad::sum(ux), ad::sum(uy), kSpeedFloor) /
         static_cast<double>(f.vx.size());
}

}  // namespace

std::vector<std::pair<std::string, Var>> TrainingProblem::ground_truth_terms(
    const std::map<std::size_t, TimeJetVars>& jets) const {
  std::vector<std::pair<std::string, Var>> terms;
  const auto& w = weights_;
  const double v0 = config_.propulsion_speed;
  std::map<std::size_t, Frame> frames;
  auto frame = [&](std::size_t idx) -> const Frame& {
    auto it = frames.find(idx);
    if (it == frames.end()) it = frames.emplace(idx, make_frame(jets.at(idx))).first;
    return it->second;
  };
  const auto& general = colloc_.general;
  const std::size_t first = general.front();
  const std::size_t last = general.back();

  if (w.v_initial > 0) {
    const auto& f = frame(first);
    std::vector<Var> sq;
    for (std::size_t i = 0; i < f.vx.size(); ++i) {
      const auto& target = initial_.agents[i].velocity;
      sq.push_back(ad::square(f.vx[i] - target.x) + ad::square(f.vy[i] - target.y));
    }
    terms.emplace_back("v_initial", mean_of(sq));
  }
  if (w.r_initial > 0) {
    const auto& f = frame(first);
    std::vector<Var> sq;
    for (std::size_t i = 0; i < f.x.size(); ++i) {
      const auto& target = initial_.agents[i].position;
      sq.push_back(ad::square(f.x[i] - target.x) + ad::square(f.y[i] - target.y));
    }
    terms.emplace_back("r_initial", mean_of(sq));
  }
  auto over_times = [&](const std::vector<std::size_t>& idxs, auto&& per_time) {
    std::vector<Var> vals;
    for (auto idx : idxs) per_time(frame(idx), vals);
    return mean_of(vals);
  };
  if (w.center_of_mass > 0) {
    terms.emplace_back("center_of_mass", over_times(general, [](const Frame& f, auto& out) {
                         out.push_back(ad::square(f.cx) + ad::square(f.cy));
                       }));
  }
  if (w.per_agent_radius > 0) {
    const double R = *spec_.radius;
    terms.emplace_back("per_agent_radius", over_times(general, [R](const Frame& f, auto& out) {
                         for (const auto& r : f.radius) out.push_back(ad::square(r - R));
                       }));
  }
  if (w.mean_radius > 0) {
    const double R = *spec_.radius;
    terms.emplace_back("mean_radius", over_times(general, [R](const Frame& f, auto& out) {
                         out.push_back(ad::square(ad::mean(f.radius) - R));
                       }));
  }
  if (w.radius_std > 0) {
    const double eps = *spec_.cluster_spread;
    terms.emplace_back("radius_std", over_times(general, [eps](const Frame& f, auto& out) {
                         const Var m = ad::mean(f.radius);
                         std::vector<Var> dev;
                         for (const auto& r : f.radius) dev.push_back(ad::square(r - m));
                         const Var sd = ad::sqrt(ad::max_floor(ad::mean(dev), 1e-12));
                         out.push_back(ad::square(sd - eps));
                       }));
  }
  if (w.min_distance_hinge > 0) {
    const double d_min = d_min_;
    const auto& domain = domain_;
    terms.emplace_back("min_distance_hinge",
                       over_times(colloc_.hinge, [d_min, &domain](const Frame& f, auto& out) {
                         for (std::size_t i = 0; i < f.x.size(); ++i) {
                           for (std::size_t j = i + 1; j < f.x.size(); ++j) {
                             Var dx = f.x[i] - f.x[j];
                             Var dy = f.y[i] - f.y[j];
                             dx = dx + image_shift(dx.value(), domain);
                             dy = dy + image_shift(dy.value(), domain);
                             const Var r = ad::hypot_floor(dx, dy, kDistanceFloor);
                             out.push_back(ad::square(ad::relu(d_min - r)));
                           }
                         }
                       }));
  }
  if (w.abs_angular_momentum > 0 || w.angular_momentum > 0) {
    // Normalized by the target R v0 rather than per agent, so slow agents
    // cannot satisfy the term by direction alone.
    const double scale = *spec_.radius * v0;
    const double sign = spec_.rotation_sign;
    std::vector<Var> abs_vals, signed_vals;
    for (auto idx : general) {
      const auto& f = frame(idx);
      std::vector<Var> cr, acr;
      for (std::size_t i = 0; i < f.x.size(); ++i) {
        const Var c = (f.relx[i] * f.vy[i] - f.rely[i] * f.vx[i]) / scale;
        cr.push_back(c);
        acr.push_back(ad::abs(c));
      }
      abs_vals.push_back(ad::square(ad::mean(acr) - 1.0));
      signed_vals.push_back(ad::square(ad::mean(cr) - sign));
    }
    if (w.abs_angular_momentum > 0) terms.emplace_back("O_r_abs", mean_of(abs_vals));
    if (w.angular_momentum > 0) terms.emplace_back("O_r", mean_of(signed_vals));
  }
  if (w.speed_norm > 0) {
    terms.emplace_back("speed_norm", over_times(general, [v0](const Frame& f, auto& out) {
                         std::vector<Var> s;
                         for (std::size_t i = 0; i < f.vx.size(); ++i) {
                           s.push_back(ad::hypot_floor(f.vx[i], f.vy[i], kSpeedFloor) / v0);
                         }
                         out.push_back(ad::square(ad::mean(s) - 1.0));
                       }));
  }
  if (w.order_final > 0) {
    terms.emplace_back("order_final", ad::square(polarization_of(frame(last)) - 1.0));
  }
  if (w.order_ramp > 0) {
    const double t_order = *spec_.t_order;
    std::vector<Var> vals;
    for (auto idx : general) {
      const double t = time_at(idx);
      const double target =
          initial_order_ + (1.0 - initial_order_) * std::min(1.0, t / t_order);
      vals.push_back(ad::square(polarization_of(frame(idx)) - target));
    }
    terms.emplace_back("order_ramp", mean_of(vals));
  }
  if (w.max_radius_hinge > 0) {
    const double r_max = r_max_;
    terms.emplace_back("max_radius_hinge",
                       over_times(colloc_.hinge, [r_max](const Frame& f, auto& out) {
                         for (const auto& r : f.radius) out.push_back(ad::square(ad::relu(r - r_max)));
                       }));
  }
  return terms;
}

LossBreakdown TrainingProblem::evaluate(ad::Tape& tape, std::span<const Var> params) const {
  if (params.size() != layout_.total_size()) throw ConfigError("parameter vector has wrong size");
  std::set<std::size_t> needed(colloc_.general.begin(), colloc_.general.end());
  if (weights_.min_distance_hinge > 0 || weights_.max_radius_hinge > 0) {
    needed.insert(colloc_.hinge.begin(), colloc_.hinge.end());
  }
  const auto ctrl = controls();
  std::map<std::size_t, TimeJetVars> jets;
  for (auto idx : needed) {
    jets.emplace(idx, forward_jet(tape, layout_, output_scale_, params,
                                  normalize_time(time_at(idx), config_.horizon),
                                  config_.horizon, ctrl));
  }
  std::vector<TimeJetVars> ode_jets;
  for (auto idx : colloc_.general) ode_jets.push_back(jets.at(idx));

  LossBreakdown out;
  out.ode = ode_residual_loss(ode_jets, force_terms(params), config_.propulsion_speed);
  out.terms = ground_truth_terms(jets);
  std::vector<Var> parts{out.ode};
  const auto named = weights_.named();
  for (const auto& [name, value] : out.terms) {
    for (const auto& [wname, w] : named) {
      if (wname == name && w > 0) parts.push_back(w * value);
    }
  }
  out.total = ad::sum(parts);
  return out;
}

double TrainingProblem::loss(std::span<const double> params, std::span<double> gradient) const {
  ad::Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (double v : params) vars.push_back(tape.variable(v));
  const auto br = evaluate(tape, vars);
  if (!gradient.empty()) {
    const auto adj = tape.adjoints(br.total);
    std::copy(adj.begin(), adj.begin() + static_cast<std::ptrdiff_t>(params.size()),
              gradient.begin());
  }
  return br.total.value();
}

std::map<std::string, double> TrainingProblem::term_values(std::span<const double> params) const {
  ad::Tape tape;
  std::vector<Var> vars;
  for (double v : params) vars.push_back(tape.variable(v));
  const auto br = evaluate(tape, vars);
  std::map<std::string, double> out;
  out["ode"] = br.ode.value();
  out["total"] = br.total.value();
  for (const auto& [name, v] : br.terms) out[name] = v.value();
  return out;
}

InteractionModel TrainingProblem::extract_model(std::span<const double> params) const {
  const std::size_t k = layout_.n_terms;
  auto terms_at = [&](std::size_t coeff_off, std::size_t exp_off) {
    std::vector<PolyTerm> t(k);
    for (std::size_t i = 0; i < k; ++i) t[i] = {params[coeff_off + i], params[exp_off + i]};
    return CoefficientFunction(std::move(t));
  };
  InteractionModel m;
  m.distancing = uses_distancing(spec_.kind)
                     ? terms_at(layout_.f_coeff_offset(), layout_.f_exponent_offset())
                     : CoefficientFunction::zero(k);
  m.aligning = uses_aligning(spec_.kind)
                   ? terms_at(layout_.g_coeff_offset(), layout_.g_exponent_offset())
                   : CoefficientFunction::zero(k);
  if (uses_aligning(spec_.kind)) m.cutoff_radius = spec_.interaction_range;
  m.meta = spec_.meta();
  return m;
}

// --- training loop -----------------------------------------------------------

namespace {

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

namespace {

TrainingResult train_once(const PatternSpec& spec, const TrainingConfig& config) {
  TrainingProblem problem(spec, config);
  NetworkParameters params = problem.initial_parameters();
  TrainingReport report;
  report.spec = spec;
  report.seed = config.seed;

  std::vector<double> grad(params.values.size());
  AdamState adam = AdamState::create(params.values.size(), config.adam_learning_rate);
  bool diverged = false;
  for (std::size_t epoch = 0; epoch < config.adam_epochs; ++epoch) {
    const double f = problem.loss(params.values, grad);
    ++report.evaluations;
    if (!std::isfinite(f) || !all_finite(grad)) {
      diverged = true;
      break;
    }
    report.loss_curve.push_back(f);
    std::vector<double> before = params.values;
    adam_step(adam, params.values, grad);
    ++report.adam_epochs;
    if (!all_finite(params.values)) {
      params.values = std::move(before);
      diverged = true;
      break;
    }
  }

  if (diverged) {
    report.termination = "diverged";
  } else {
    LbfgsOptions opt;
    opt.tolerance = config.lbfgs_tolerance;
    opt.max_iterations = config.lbfgs_max_iterations;
    opt.on_iteration = [&](std::size_t, double f) { report.loss_curve.push_back(f); };
    auto objective = [&](std::span<const double> x, std::span<double> g) {
      return problem.loss(x, g);
    };
    auto res = lbfgs_optimize(params.values, objective, opt);
    report.evaluations += res.evaluations;
    report.lbfgs_iterations = res.iterations;
    if (all_finite(res.x)) params.values = std::move(res.x);
    report.termination = std::string(to_string(res.termination));
    report.converged = res.converged;
  }
  report.final_terms = problem.term_values(params.values);

  TrainingResult out;
  out.model = problem.extract_model(params.values);
  out.report = std::move(report);
  out.params = std::move(params);
  return out;
}

double final_total(const TrainingReport& r) {
  const auto it = r.final_terms.find("total");
  if (r.termination == "diverged" || it == r.final_terms.end() || !std::isfinite(it->second)) {
    return std::numeric_limits<double>::infinity();
  }
  return it->second;
}

}  // namespace

TrainingResult train(const PatternSpec& spec, const TrainingConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  std::optional<TrainingResult> best;
  std::vector<double> totals;
  std::size_t chosen = 0;
  for (std::size_t k = 0; k < config.restarts; ++k) {
    TrainingConfig cfg = config;
    if (k > 0) cfg.seed = derive_seed(config.seed, 1000 + k);
    auto run = train_once(spec, cfg);
    const double total = final_total(run.report);
    totals.push_back(total);
    if (!best || total < final_total(best->report)) {
      best = std::move(run);
      chosen = k;
    }
    if (total < config.lbfgs_tolerance) break;
  }
  best->report.seed = config.seed;
  best->report.restart_losses = std::move(totals);
  best->report.selected_restart = chosen;
  best->report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return std::move(*best);
}

std::string training_report_json(const TrainingReport& r) {
  nlohmann::ordered_json doc;
  const auto meta = r.spec.meta();
  doc["pattern"] = meta.kind;
  nlohmann::ordered_json targets = nlohmann::ordered_json::object();
  for (const auto& [k, v] : meta.targets) targets[k] = v;
  doc["targets"] = targets;
  doc["seed"] = r.seed;
  doc["loss_curve"] = r.loss_curve;
  nlohmann::ordered_json terms = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.final_terms) terms[k] = v;
  doc["final_terms"] = terms;
  doc["termination"] = r.termination;
  doc["converged"] = r.converged;
  doc["adam_epochs"] = r.adam_epochs;
  doc["lbfgs_iterations"] = r.lbfgs_iterations;
  doc["evaluations"] = r.evaluations;
  nlohmann::ordered_json restarts = nlohmann::ordered_json::array();
  for (double v : r.restart_losses) {
    restarts.push_back(std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr));
  }
  doc["restart_losses"] = restarts;
  doc["selected_restart"] = r.selected_restart;
  doc["wall_time"] = r.wall_time ? nlohmann::ordered_json(*r.wall_time)
                                 : nlohmann::ordered_json(nullptr);
  return doc.dump(2) + "\n";
}

TrialReport verify_by_simulation(const InteractionModel& model, const PatternSpec& spec,
                                 std::size_t n_trials, std::uint64_t seed,
                                 std::size_t n_agents) {
  return trial_harness(spec, model, n_trials, seed, default_trial_setup(spec, n_agents));
}

}  // namespace swarmlaw
