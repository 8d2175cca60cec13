#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "swarmlaw/errors.hpp"
#include "swarmlaw/trainer.hpp"

using namespace swarmlaw;
using ad::Var;

namespace {

/// Constant jets of N agents equally spaced on a circle, rotating at speed v0.
TimeJetVars rotating_ring(std::size_t n, double radius, double v0, double t, int sign = 1) {
  TimeJetVars j;
  const double w = sign * v0 / radius;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n) + w * t;
    j.value.push_back(radius * std::cos(a));
    j.value.push_back(radius * std::sin(a));
    j.first.push_back(-radius * w * std::sin(a));
    j.first.push_back(radius * w * std::cos(a));
    j.second.push_back(-radius * w * w * std::cos(a));
    j.second.push_back(-radius * w * w * std::sin(a));
  }
  return j;
}

ForceTerms harmonic_terms(double c) {
  ForceTerms f;
  f.f_coeff = {Var(-c)};
  f.f_exponent = {Var(1.0)};
  f.g_coeff = {Var(0.0)};
  f.g_exponent = {Var(0.0)};
  f.distancing = true;
  f.aligning = false;
  return f;
}

TrainingConfig toy_config() {
  TrainingConfig c;
  c.n_agents = 3;
  c.n_time_points = 20;
  c.n_terms = 2;
  c.seed = 11;
  return c;
}

std::vector<PatternSpec> all_patterns() {
  return {PatternSpec::ring(4),        PatternSpec::clumps(4, 2), PatternSpec::mill_double(4),
          PatternSpec::mill_single(2, 1), PatternSpec::ordered(20, 1), PatternSpec::flock(4, 2)};
}

}  // namespace

TEST_CASE("default loss weights reproduce the weight tables") {
  const auto ring = LossWeights::defaults(PatternKind::ring);
  CHECK(ring.v_initial == 1);
  CHECK(ring.per_agent_radius == 5);
  CHECK(ring.abs_angular_momentum == 5);
  CHECK(ring.center_of_mass == 0);
  CHECK(ring.mean_radius == 0);
  CHECK(ring.radius_std == 0);
  CHECK(ring.min_distance_hinge == 0);
  CHECK(ring.angular_momentum == 0);
  const auto ordered = LossWeights::defaults(PatternKind::ordered);
  CHECK(ordered.r_initial == 5);
  CHECK(ordered.v_initial == 5);
  CHECK(ordered.speed_norm == 5);
  CHECK(ordered.order_final == 5);
  CHECK(ordered.max_radius_hinge == 0);
  CHECK(ordered.min_distance_hinge == 0);
  const auto flock = LossWeights::defaults(PatternKind::flock);
  CHECK(flock.r_initial == 1);
  CHECK(flock.v_initial == 1);
  CHECK(flock.speed_norm == 5);
  CHECK(flock.max_radius_hinge == 5);
  CHECK(flock.min_distance_hinge == 5);
  CHECK(LossWeights::defaults(PatternKind::clumps).radius_std == 5);
  CHECK(LossWeights::defaults(PatternKind::mill_single).angular_momentum == 5);
  CHECK(LossWeights::defaults(PatternKind::mill_double).abs_angular_momentum == 5);
  LossWeights bad;
  bad.speed_norm = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("collocation points") {
  const auto c100 = collocation_points(100, PatternKind::ring);
  CHECK(c100.general.size() == 10);
  CHECK(c100.general.front() == 0);
  CHECK(c100.general.back() == 99);
  const auto f100 = collocation_points(100, PatternKind::flock);
  CHECK(f100.hinge.size() == 5);
  for (auto i : f100.hinge) {
    CHECK(i >= 50);
    CHECK(i <= 99);
  }
  const auto c20 = collocation_points(20, PatternKind::clumps);
  CHECK(c20.general == std::vector<std::size_t>{0, 19});
}

TEST_CASE("training config validation") {
  auto c = toy_config();
  c.n_time_points = 19;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy_config();
  c.horizon = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  PatternSpec clumps;
  clumps.kind = PatternKind::clumps;
  clumps.radius = 4;
  CHECK_THROWS_AS(TrainingProblem(clumps, toy_config()), ConfigError);
}

TEST_CASE("ODE residual vanishes on the manufactured rotating ring") {
  // Harmonic attraction f = -c r supplies the centripetal force v0^2 / R when
  // c N R = v0^2 / R.
  const std::size_t n = 40;
  const double R = 4, v0 = 2, c = v0 * v0 / (n * R * R);
  std::vector<TimeJetVars> jets;
  for (double t : {0.0, 1.3, 7.9}) jets.push_back(rotating_ring(n, R, v0, t));
  const Var loss = ode_residual_loss(jets, harmonic_terms(c), v0);
  CHECK(loss.value() <= 1e-20);
  const Var off = ode_residual_loss(jets, harmonic_terms(2 * c), v0);
  CHECK(off.value() > 1e-3);
}

TEST_CASE("ODE residual of a static swarm with zero forces is zero") {
  TimeJetVars j;
  for (double v : {0.0, 0.0, 1.0, 0.0, 0.0, 2.0}) {
    j.value.push_back(v);
    j.first.push_back(0.0);
    j.second.push_back(0.0);
  }
  auto f = harmonic_terms(0.0);
  const Var loss = ode_residual_loss(std::vector<TimeJetVars>{j}, f, 2.0);
  CHECK(loss.value() == 0.0);
}

TEST_CASE("ODE residual is normalized per agent") {
  const double R = 4, v0 = 2;
  const auto one = ode_residual_loss(std::vector{rotating_ring(10, R, v0, 0.5)}, harmonic_terms(0.01), v0);
  const auto two = ode_residual_loss(std::vector{rotating_ring(10, R, v0, 0.5), rotating_ring(10, R, v0, 0.5)},
                                     harmonic_terms(0.01), v0);
  CHECK(one.value() == doctest::Approx(two.value()).epsilon(1e-14));
}

TEST_CASE("ground-truth terms vanish on exact targets") {
  TrainingConfig cfg;
  cfg.n_agents = 40;
  cfg.n_time_points = 41;
  const double v0 = cfg.propulsion_speed;
  SUBCASE("ring") {
    TrainingProblem p(PatternSpec::ring(4), cfg);
    std::map<std::size_t, TimeJetVars> jets;
    for (auto idx : p.collocation().general) jets[idx] = rotating_ring(40, 4, v0, p.time_at(idx));
    for (const auto& [name, v] : p.ground_truth_terms(jets)) {
      if (name == "v_initial") continue;
      CHECK_MESSAGE(std::abs(v.value()) <= 1e-10, name);
    }
  }
  SUBCASE("single mill and its direction") {
    TrainingProblem ccw(PatternSpec::mill_single(4, +1), cfg);
    TrainingProblem cw(PatternSpec::mill_single(4, -1), cfg);
    std::map<std::size_t, TimeJetVars> jets;
    for (auto idx : ccw.collocation().general) jets[idx] = rotating_ring(40, 4, v0, ccw.time_at(idx));
    for (const auto& [name, v] : ccw.ground_truth_terms(jets)) {
      if (name == "O_r" || name == "center_of_mass" || name == "mean_radius") {
        CHECK_MESSAGE(std::abs(v.value()) <= 1e-10, name);
      }
      if (name == "min_distance_hinge") CHECK(v.value() == 0.0);
    }
    for (const auto& [name, v] : cw.ground_truth_terms(jets)) {
      if (name == "O_r") CHECK(v.value() == doctest::Approx(4.0));
    }
  }
  SUBCASE("ordered state") {
    TrainingProblem p(PatternSpec::ordered(20, 1), cfg);
    std::map<std::size_t, TimeJetVars> jets;
    for (auto idx : p.collocation().general) {
      TimeJetVars j;
      for (std::size_t i = 0; i < 40; ++i) {
        j.value.push_back(static_cast<double>(i) + 2.0 * p.time_at(idx));
        j.value.push_back(0.5 * static_cast<double>(i));
        j.first.push_back(2.0);
        j.first.push_back(0.0);
        j.second.push_back(0.0);
        j.second.push_back(0.0);
      }
      jets[idx] = j;
    }
    for (const auto& [name, v] : p.ground_truth_terms(jets)) {
      if (name == "speed_norm" || name == "order_final") {
        CHECK_MESSAGE(std::abs(v.value()) <= 1e-10, name);
      }
    }
  }
}

TEST_CASE("hinge terms are exactly zero when satisfied") {
  TrainingConfig cfg;
  cfg.n_agents = 8;
  cfg.n_time_points = 40;
  auto spec = PatternSpec::flock(10, 2);
  spec.min_distance = 0.5;
  TrainingProblem p(spec, cfg);
  std::map<std::size_t, TimeJetVars> jets;
  for (std::size_t idx = 0; idx < 40; ++idx) jets[idx] = rotating_ring(8, 3, 2, p.time_at(idx));
  for (const auto& [name, v] : p.ground_truth_terms(jets)) {
    if (name == "max_radius_hinge" || name == "min_distance_hinge") CHECK(v.value() == 0.0);
  }
}

TEST_CASE("total loss gradient matches finite differences for every pattern") {
  for (const auto& spec : all_patterns()) {
    CAPTURE(to_string(spec.kind));
    TrainingProblem p(spec, toy_config());
    auto x = p.initial_parameters().values;
    std::vector<double> g(x.size());
    const double f0 = p.loss(x, g);
    CHECK(f0 >= 0.0);
    std::mt19937_64 rng(17);
    double worst = 0;
    for (int k = 0; k < 50; ++k) {
      const std::size_t i = rng() % x.size();
      const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      const double save = x[i];
      x[i] = save + h;
      const double fp = p.loss(x, {});
      x[i] = save - h;
      const double fm = p.loss(x, {});
      x[i] = save;
      const double fd = (fp - fm) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max({1e-6, std::abs(fd), std::abs(g[i])}));
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("zeroing a weight removes exactly that term's gradient") {
  auto cfg = toy_config();
  auto w = LossWeights::defaults(PatternKind::ring);
  cfg.weights = w;
  TrainingProblem full(PatternSpec::ring(4), cfg);
  w.abs_angular_momentum = 0;
  cfg.weights = w;
  TrainingProblem without(PatternSpec::ring(4), cfg);
  w = LossWeights{};
  w.abs_angular_momentum = 1;
  cfg.weights = w;
  TrainingProblem only(PatternSpec::ring(4), cfg);
  w.abs_angular_momentum = 0;
  cfg.weights = w;
  TrainingProblem ode_only(PatternSpec::ring(4), cfg);

  const auto x = full.initial_parameters().values;
  std::vector<double> gf(x.size()), gw(x.size()), go(x.size()), gode(x.size());
  full.loss(x, gf);
  without.loss(x, gw);
  only.loss(x, go);
  ode_only.loss(x, gode);
  for (std::size_t k = 0; k < x.size(); ++k) {
    CHECK(gf[k] - gw[k] == doctest::Approx(5.0 * (go[k] - gode[k])).epsilon(1e-9).scale(1e-9));
  }
  // Polynomial parameters of g never enter a distancing-only pattern.
  const auto& L = full.layout();
  for (std::size_t k = L.g_coeff_offset(); k < L.total_size(); ++k) CHECK(gf[k] == 0.0);
}

TEST_CASE("extracted model follows the pattern family") {
  TrainingProblem ring(PatternSpec::ring(4), toy_config());
  const auto x = ring.initial_parameters().values;
  const auto m = ring.extract_model(x);
  CHECK(m.aligning.is_zero());
  CHECK_FALSE(m.distancing.is_zero());
  CHECK(m.meta.kind == "ring");
  TrainingProblem flock(PatternSpec::flock(4, 2), toy_config());
  const auto mf = flock.extract_model(flock.initial_parameters().values);
  CHECK(mf.cutoff_radius.value() == 2.0);
  CHECK_FALSE(mf.aligning.is_zero());
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto cfg = toy_config();
  cfg.adam_epochs = 10;
  cfg.lbfgs_max_iterations = 10;
  const auto a = train(PatternSpec::ring(4), cfg);
  const auto b = train(PatternSpec::ring(4), cfg);
  CHECK(a.model == b.model);
  CHECK(a.report.loss_curve == b.report.loss_curve);
  CHECK(a.report.loss_curve.size() == a.report.adam_epochs + a.report.lbfgs_iterations);
  for (double v : a.report.loss_curve) CHECK(std::isfinite(v));
  auto report = a.report;
  report.wall_time.reset();
  CHECK(training_report_json(report).find("\"wall_time\": null") != std::string::npos);
}

TEST_CASE("restarts keep the start with the lowest final loss") {
  auto cfg = toy_config();
  cfg.adam_epochs = 10;
  cfg.lbfgs_max_iterations = 10;
  cfg.restarts = 3;
  const auto r = train(PatternSpec::ring(4), cfg);
  REQUIRE(r.report.restart_losses.size() == 3);
  const auto best = std::min_element(r.report.restart_losses.begin(), r.report.restart_losses.end());
  CHECK(r.report.selected_restart ==
        static_cast<std::size_t>(best - r.report.restart_losses.begin()));
  CHECK(r.report.final_terms.at("total") == *best);
  CHECK(r.report.seed == cfg.seed);

  // The first start is the plain single-start run.
  cfg.restarts = 1;
  const auto single = train(PatternSpec::ring(4), cfg);
  CHECK(single.report.restart_losses.front() == r.report.restart_losses.front());
  CHECK_THROWS_AS([&] { cfg.restarts = 0; cfg.validate(); }(), ConfigError);
}

TEST_CASE("per-pattern defaults pass validation") {
  for (auto kind : {PatternKind::ordered, PatternKind::ring, PatternKind::clumps,
                    PatternKind::mill_double, PatternKind::mill_single, PatternKind::flock}) {
    CHECK_NOTHROW(TrainingConfig::for_pattern(kind).validate());
  }
}
