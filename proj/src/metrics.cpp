#include "swarmlaw/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <thread>

#include "swarmlaw/errors.hpp"

namespace swarmlaw {

double polarization(const SwarmState& state) {
  if (state.size() == 0) throw MetricError("polarization of an empty swarm");
  Vec2 sum;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const Vec2 v = state.agents[i].velocity;
    const double s = norm(v);
    if (s < kSpeedFloor) {
      throw MetricError("polarization undefined: agent " + std::to_string(i) + " is at rest");
    }
    sum += v / s;
  }
  return std::min(1.0, norm(sum) / static_cast<double>(state.size()));
}

Vec2 center_of_mass(const SwarmState& state) {
  Vec2 c;
  for (const auto& a : state.agents) c += a.position;
  return c / static_cast<double>(state.size());
}

AngularMomentum angular_momentum(const SwarmState& state, std::optional<Vec2> center) {
  const Vec2 c = center ? *center : center_of_mass(state);
  AngularMomentum out;
  double sum = 0.0;
  double sum_abs = 0.0;
  for (const auto& a : state.agents) {
    const Vec2 r = a.position - c;
    const double rn = norm(r);
    const double vn = norm(a.velocity);
    if (rn < kDistanceFloor || vn < kSpeedFloor) {
      ++out.excluded;
      continue;
    }
    const double z = cross(r, a.velocity) / (rn * vn);
    sum += z;
    sum_abs += std::abs(z);
  }
  const auto n = static_cast<double>(state.size());
  out.signed_value = std::clamp(sum / n, -1.0, 1.0);
  out.absolute_value = std::clamp(sum_abs / n, 0.0, 1.0);
  return out;
}

Geometry geometry(const SwarmState& state, const DomainSpec& domain) {
  const std::size_t n = state.size();
  if (n < 2) throw MetricError("geometry needs at least two agents");
  Geometry g;
  g.center_of_mass = center_of_mass(state);
  double sum = 0.0;
  std::vector<double> radii(n);
  for (std::size_t i = 0; i < n; ++i) {
    radii[i] = norm(state.agents[i].position - g.center_of_mass);
    sum += radii[i];
    g.max_extent = std::max(g.max_extent, radii[i]);
  }
  g.mean_radius = sum / static_cast<double>(n);
  double var = 0.0;
  for (double r : radii) var += (r - g.mean_radius) * (r - g.mean_radius);
  g.radius_std = std::sqrt(var / static_cast<double>(n));
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dmin = std::min(dmin, norm(displacement(state.agents[i].position,
                                              state.agents[j].position, domain)));
    }
  }
  g.min_pair_distance = dmin;
  return g;
}

SwarmState subset(const SwarmState& state, const std::vector<int>& groups, int group) {
  SwarmState s;
  s.time = state.time;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (groups.at(i) == group) s.agents.push_back(state.agents[i]);
  }
  return s;
}

void MetricSeries::push(double t, const SwarmState& state, const DomainSpec& domain) {
  const auto geo = geometry(state, domain);
  const auto am = swarmlaw::angular_momentum(state);
  times.push_back(t);
  polarization.push_back(swarmlaw::polarization(state));
  angular_momentum.push_back(am.signed_value);
  abs_angular_momentum.push_back(am.absolute_value);
  mean_radius.push_back(geo.mean_radius);
  radius_std.push_back(geo.radius_std);
  max_extent.push_back(geo.max_extent);
  min_pair_distance.push_back(geo.min_pair_distance);
}

MetricSeries compute_series(const Trajectory& traj, const DomainSpec& domain) {
  MetricSeries s;
  for (const auto& f : traj.frames) s.push(f.time, f, domain);
  return s;
}

void write_metrics_csv(std::ostream& out, const MetricSeries& s) {
  out << "t,O,Or,Orabs,mean_radius,radius_std,max_extent,min_dist\n";
  char buf[32];
  auto put = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, res.ptr - buf);
  };
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double row[] = {s.times[k],      s.polarization[k],       s.angular_momentum[k],
                          s.abs_angular_momentum[k], s.mean_radius[k], s.radius_std[k],
                          s.max_extent[k], s.min_pair_distance[k]};
    for (std::size_t c = 0; c < 8; ++c) {
      if (c) out << ',';
      put(row[c]);
    }
    out << '\n';
  }
}

std::optional<double> time_to_order(const MetricSeries& series, double threshold) {
  const auto& o = series.polarization;
  const auto& t = series.times;
  if (o.empty()) return std::nullopt;
  if (o[0] >= threshold) return t[0];
  for (std::size_t k = 1; k < o.size(); ++k) {
    if (o[k] >= threshold) {
      const double frac = (threshold - o[k - 1]) / (o[k] - o[k - 1]);
      return t[k - 1] + frac * (t[k] - t[k - 1]);
    }
  }
  return std::nullopt;
}

double steady_window(double duration) { return std::max(0.2 * duration, 5.0); }

TailSummary tail_average(const MetricSeries& s, double window) {
  if (s.size() == 0) throw InsufficientDataError("empty metric series");
  const double t_end = s.times.back();
  if (s.times.back() - s.times.front() < window - 1e-9) {
    throw InsufficientDataError("trajectory covers " +
                                std::to_string(s.times.back() - s.times.front()) +
                                " time units, shorter than the " + std::to_string(window) +
                                " unit steady-state window");
  }
  TailSummary out;
  std::size_t count = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s.times[k] < t_end - window - 1e-9) continue;
    out.polarization += s.polarization[k];
    out.angular_momentum += s.angular_momentum[k];
    out.abs_angular_momentum += s.abs_angular_momentum[k];
    out.mean_radius += s.mean_radius[k];
    out.radius_std += s.radius_std[k];
    out.max_extent += s.max_extent[k];
    out.min_pair_distance += s.min_pair_distance[k];
    ++count;
  }
  const auto c = static_cast<double>(count);
  out.polarization /= c;
  out.angular_momentum /= c;
  out.abs_angular_momentum /= c;
  out.mean_radius /= c;
  out.radius_std /= c;
  out.max_extent /= c;
  out.min_pair_distance /= c;
  return out;
}

Classification classify_pattern(const MetricSeries& series, const PatternSpec& spec, double window,
                                const ClassifyTolerances& tol) {
  spec.validate();
  Classification c;
  c.tail = tail_average(series, window);
  const auto& m = c.tail;
  std::ostringstream why;
  bool ok = true;
  auto check = [&](bool cond, const std::string& msg) {
    if (!cond) {
      ok = false;
      why << msg << "; ";
    }
  };
  auto rel = [](double value, double target) { return std::abs(value - target) / target; };
  switch (spec.kind) {
    case PatternKind::ring:
      check(m.abs_angular_momentum >= tol.order,
            "O_r,abs " + std::to_string(m.abs_angular_momentum) + " below threshold");
      check(m.mean_radius > 0.0 && m.radius_std / m.mean_radius <= tol.ring_spread,
            "radius spread " + std::to_string(m.radius_std) + " too wide for a ring");
      check(rel(m.mean_radius, *spec.radius) <= tol.radius,
            "mean radius " + std::to_string(m.mean_radius) + " vs target " +
                std::to_string(*spec.radius));
      break;
    case PatternKind::clumps:
      check(rel(m.radius_std, *spec.cluster_spread) <= tol.spread,
            "radius std " + std::to_string(m.radius_std) + " vs target " +
                std::to_string(*spec.cluster_spread));
      check(rel(m.mean_radius, *spec.radius) <= tol.radius,
            "mean radius " + std::to_string(m.mean_radius) + " vs target " +
                std::to_string(*spec.radius));
      break;
    case PatternKind::mill_double:
      check(m.abs_angular_momentum >= tol.order,
            "O_r,abs " + std::to_string(m.abs_angular_momentum) + " below threshold");
      check(std::abs(m.angular_momentum) <= tol.double_mill_net,
            "net O_r " + std::to_string(m.angular_momentum) + " too large for a double mill");
      break;
    case PatternKind::mill_single:
      check(spec.rotation_sign * m.angular_momentum >= tol.order,
            "signed O_r " + std::to_string(m.angular_momentum) + " does not match rotation " +
                std::to_string(spec.rotation_sign));
      break;
    case PatternKind::ordered:
      check(m.polarization >= tol.order,
            "polarization " + std::to_string(m.polarization) + " below threshold");
      break;
    case PatternKind::flock:
      check(m.polarization >= tol.order,
            "polarization " + std::to_string(m.polarization) + " below threshold");
      check(m.max_extent <= *spec.flock_size * (1.0 + tol.radius),
            "max extent " + std::to_string(m.max_extent) + " exceeds flock size " +
                std::to_string(*spec.flock_size));
      break;
  }
  c.success = ok;
  c.diagnostic = ok ? "ok" : why.str();
  return c;
}

Classification classify_pattern(const Trajectory& traj, const PatternSpec& spec, double window,
                                const DomainSpec& domain, const ClassifyTolerances& tol) {
  if (traj.empty() || traj.duration() < window - 1e-9) {
    throw InsufficientDataError("trajectory shorter than the classification window");
  }
  return classify_pattern(compute_series(traj, domain), spec, window, tol);
}

TrialSetup default_trial_setup(const PatternSpec& spec, std::size_t n_agents) {
  TrialSetup s;
  s.n_agents = n_agents;
  switch (spec.kind) {
    case PatternKind::ordered:
      s.domain = DomainSpec::periodic(side_for_density(n_agents, s.density));
      s.noise = NoiseSpec::gaussian(1.0);
      s.init = InitClass::field;
      s.duration = std::max(50.0, 2.0 * spec.t_order.value_or(25.0));
      break;
    case PatternKind::flock:
      s.domain = DomainSpec::unbounded();
      s.noise = NoiseSpec::gaussian(10.0);
      s.init = InitClass::field;
      break;
    default:
      s.domain = DomainSpec::unbounded();
      s.noise = NoiseSpec::off();
      s.init = InitClass::bounded_swarm;
      break;
  }
  return s;
}

TrialOutcome run_trial(const PatternSpec& spec, const InteractionModel& model,
                       const TrialSetup& setup, std::uint64_t seed) {
  TrialOutcome out;
  out.seed = seed;
  const double v0 = setup.integrator.propulsion_speed;
  const auto initial =
      init_random(setup.init, setup.n_agents, setup.domain, v0, seed, setup.density);
  auto cfg = setup.integrator;
  cfg.rng_seed = derive_seed(seed, 0xA11CE);
  const auto assignment = GroupAssignment::homogeneous(setup.n_agents, model);
  try {
    const auto traj = rk4_integrate(initial, assignment, setup.domain, setup.noise, cfg,
                                    initial.time + setup.duration, setup.record_every);
    const auto series = compute_series(traj, setup.domain);
    const auto cls = classify_pattern(series, spec, steady_window(setup.duration),
                                      setup.tolerances);
    out.success = cls.success;
    out.diagnostic = cls.diagnostic;
    out.tail = cls.tail;
    out.has_metrics = true;
    out.time_to_order = time_to_order(series);
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.diagnostic = e.what();
  } catch (const MetricError& e) {
    out.diagnostic = e.what();
  }
  return out;
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("SWARMLAW_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

namespace {

MetricStats stats_of(const std::vector<double>& xs) {
  MetricStats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  for (double x : xs) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

TrialReport trial_harness(const PatternSpec& spec, const InteractionModel& model,
                          std::size_t n_trials, std::uint64_t seed, const TrialSetup& setup,
                          unsigned threads) {
  if (n_trials < 1) throw ConfigError("trial harness needs at least one trial");
  spec.validate();
  TrialReport report;
  report.n_trials = n_trials;
  report.trials.resize(n_trials);
  if (threads == 0) threads = default_thread_count();
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_trials));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n_trials; k = next++) {
      report.trials[k] = run_trial(spec, model, setup, derive_seed(seed, k));
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
  }

  std::vector<std::vector<double>> cols(8);
  for (const auto& t : report.trials) {
    if (t.success) ++report.successes;
    if (!t.has_metrics) continue;
    cols[0].push_back(t.tail.polarization);
    cols[1].push_back(t.tail.angular_momentum);
    cols[2].push_back(t.tail.abs_angular_momentum);
    cols[3].push_back(t.tail.mean_radius);
    cols[4].push_back(t.tail.radius_std);
    cols[5].push_back(t.tail.max_extent);
    cols[6].push_back(t.tail.min_pair_distance);
    if (t.time_to_order) cols[7].push_back(*t.time_to_order);
  }
  const char* names[] = {"O",          "Or",         "Orabs",    "mean_radius",
                         "radius_std", "max_extent", "min_dist", "time_to_order"};
  for (std::size_t c = 0; c < cols.size(); ++c) report.per_metric.emplace_back(names[c], stats_of(cols[c]));
  report.success_probability =
      static_cast<double>(report.successes) / static_cast<double>(report.n_trials);
  return report;
}

std::string trial_report_json(const TrialReport& report) {
  nlohmann::ordered_json doc;
  doc["n_trials"] = report.n_trials;
  doc["successes"] = report.successes;
  doc["probability"] = report.success_probability;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [name, st] : report.per_metric) {
    per[name] = {{"mean", st.mean}, {"std", st.std}, {"count", st.count}};
  }
  doc["per_metric"] = per;
  auto trials = nlohmann::ordered_json::array();
  for (const auto& t : report.trials) {
    nlohmann::ordered_json row;
    row["seed"] = t.seed;
    row["success"] = t.success;
    row["diverged"] = t.diverged;
    row["diagnostic"] = t.diagnostic;
    if (t.has_metrics) {
      row["O"] = t.tail.polarization;
      row["Or"] = t.tail.angular_momentum;
      row["Orabs"] = t.tail.abs_angular_momentum;
      row["mean_radius"] = t.tail.mean_radius;
      row["radius_std"] = t.tail.radius_std;
      row["max_extent"] = t.tail.max_extent;
      row["min_dist"] = t.tail.min_pair_distance;
    }
    row["time_to_order"] = t.time_to_order ? nlohmann::ordered_json(*t.time_to_order)
                                           : nlohmann::ordered_json(nullptr);
    trials.push_back(row);
  }
  doc["trials"] = trials;
  return doc.dump(2) + "\n";
}

}  // namespace swarmlaw
