#include "swarmlaw/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>

namespace swarmlaw {

AdamState AdamState::create(std::size_t n, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.first_moment.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  return s;
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> gradient) {
  if (s.first_moment.size() != params.size() || gradient.size() != params.size()) {
    throw std::invalid_argument("adam_step: state, parameters and gradient differ in length");
  }
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = gradient[k];
    s.first_moment[k] = s.beta1 * s.first_moment[k] + (1.0 - s.beta1) * g;
    s.second_moment[k] = s.beta2 * s.second_moment[k] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.first_moment[k] / bc1;
    const double v_hat = s.second_moment[k] / bc2;
    params[k] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

std::string_view to_string(LbfgsTermination t) {
  switch (t) {
    case LbfgsTermination::loss_tolerance:
      return "loss_tolerance";
    case LbfgsTermination::loss_change:
      return "loss_change";
    case LbfgsTermination::gradient:
      return "gradient";
    case LbfgsTermination::max_iterations:
      return "max_iterations";
    case LbfgsTermination::line_search_failed:
      return "line_search_failed";
    case LbfgsTermination::non_finite:
      return "non_finite";
  }
  return "unknown";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct Point {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative
  std::vector<double> gradient;
};

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db), clamped into
/// the interior of [a, b]; falls back to bisection.
double cubic_step(const Point& a, const Point& b) {
  const double lo = std::min(a.step, b.step);
  const double hi = std::max(a.step, b.step);
  const double margin = 0.1 * (hi - lo);
  double t = 0.5 * (a.step + b.step);
  if (std::isfinite(b.value) && std::isfinite(b.slope)) {
    const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
    const double disc = d1 * d1 - a.slope * b.slope;
    if (disc >= 0.0) {
      const double d2 = std::copysign(std::sqrt(disc), b.step - a.step);
      const double cand =
          b.step - (b.step - a.step) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
      if (std::isfinite(cand)) t = cand;
    }
  }
  return std::clamp(t, lo + margin, hi - margin);
}

class LineSearch {
 public:
  LineSearch(const Objective& obj, std::span<const double> x, std::span<const double> dir,
             double f0, double slope0, const LbfgsOptions& opt, std::size_t& evals)
      : obj_(obj), x_(x), dir_(dir), f0_(f0), slope0_(slope0), opt_(opt), evals_(evals) {}

  /// Plain Armijo halving for when the bracketing search cannot resolve a kink
  /// or a very narrow valley within its evaluation budget.
  std::optional<Point> backtrack(double initial_step) {
    double step = initial_step;
    for (int i = 0; i < 60 && !best_; ++i) {
      step *= 0.5;
      eval(step);
    }
    return best_;
  }

  std::optional<Point> run(double initial_step) {
    Point prev{0.0, f0_, slope0_, {}};
    double step = initial_step;
    for (std::size_t i = 0; i < opt_.max_line_search_evals; ++i) {
      Point cur = eval(step);
      if (!std::isfinite(cur.value) || cur.value > f0_ + opt_.c1 * step * slope0_ ||
          (i > 0 && cur.value >= prev.value)) {
        return zoom(prev, cur);
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
      if (cur.slope >= 0.0) return zoom(cur, prev);
      prev = std::move(cur);
      step *= 2.0;
    }
    return best_;
  }

 private:
  Point eval(double step) {
    std::vector<double> xt(x_.size());
    for (std::size_t k = 0; k < xt.size(); ++k) xt[k] = x_[k] + step * dir_[k];
    Point p;
    p.step = step;
    p.gradient.assign(x_.size(), 0.0);
    p.value = obj_(xt, p.gradient);
    ++evals_;
    p.slope = dot(p.gradient, dir_);
    if (!std::isfinite(p.slope)) p.value = std::numeric_limits<double>::infinity();
    if (std::isfinite(p.value) && p.value <= f0_ + opt_.c1 * step * slope0_ &&
        (!best_ || p.value < best_->value)) {
      best_ = p;
    }
    return p;
  }

  std::optional<Point> zoom(Point lo, Point hi) {
    for (std::size_t i = 0; i < opt_.max_line_search_evals; ++i) {
      if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, std::abs(lo.step))) break;
      Point cur = eval(cubic_step(lo, hi));
      if (!std::isfinite(cur.value) || cur.value > f0_ + opt_.c1 * cur.step * slope0_ ||
          cur.value >= lo.value) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
      if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    return best_;
  }

  const Objective& obj_;
  std::span<const double> x_;
  std::span<const double> dir_;
  double f0_;
  double slope0_;
  const LbfgsOptions& opt_;
  std::size_t& evals_;
  std::optional<Point> best_;
};

}  // namespace

LbfgsResult lbfgs_optimize(std::vector<double> x, const Objective& objective,
                           const LbfgsOptions& opt) {
  if (!(opt.tolerance > 0.0)) throw std::invalid_argument("L-BFGS tolerance must be positive");
  const std::size_t n = x.size();
  LbfgsResult res;
  std::vector<double> g(n, 0.0);
  double f = objective(x, g);
  res.evaluations = 1;
  auto finish = [&](LbfgsTermination why) {
    res.x = x;
    res.value = f;
    res.termination = why;
    res.converged = why == LbfgsTermination::loss_tolerance ||
                    why == LbfgsTermination::loss_change || why == LbfgsTermination::gradient;
    return res;
  };
  if (!std::isfinite(f) || !std::isfinite(max_abs(g))) return finish(LbfgsTermination::non_finite);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> dir(n), alpha(opt.history);
  bool fresh = true;  // history empty since the last stall

  while (true) {
    if (f < opt.tolerance) return finish(LbfgsTermination::loss_tolerance);
    if (max_abs(g) < opt.gradient_tolerance) return finish(LbfgsTermination::gradient);
    if (res.iterations >= opt.max_iterations) return finish(LbfgsTermination::max_iterations);

    // Two-loop recursion: dir = -H g.
    for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
    const std::size_t m = s_hist.size();
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * dot(s_hist[i], dir);
      for (std::size_t k = 0; k < n; ++k) dir[k] -= alpha[i] * y_hist[i][k];
    }
    if (m > 0) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& d : dir) d *= gamma;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * dot(y_hist[i], dir);
      for (std::size_t k = 0; k < n; ++k) dir[k] += (alpha[i] - beta) * s_hist[i][k];
    }
    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
      slope = dot(g, dir);
    }
    const double first_step = s_hist.empty() ? std::min(1.0, 1.0 / max_abs(g)) : 1.0;
    LineSearch ls(objective, x, dir, f, slope, opt, res.evaluations);
    auto accepted = ls.run(first_step);
    if (!accepted) accepted = ls.backtrack(first_step);
    if (!accepted) {
      if (!s_hist.empty()) {
        // Stale curvature pairs can yield a poor direction; retry from steepest descent.
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      return finish(LbfgsTermination::line_search_failed);
    }
    std::vector<double> s(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = accepted->step * dir[k];
      y[k] = accepted->gradient[k] - g[k];
      x[k] += s[k];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      if (s_hist.size() == opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    const double change = std::abs(accepted->value - f);
    f = accepted->value;
    g = std::move(accepted->gradient);
    ++res.iterations;
    if (opt.on_iteration) opt.on_iteration(res.iterations, f);
    if (change < opt.change_tolerance) {
      // A stall right after a history reset is final; otherwise the stall may
      // come from stale curvature near a kink, so retry from steepest descent once.
      if (fresh) return finish(LbfgsTermination::loss_change);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      fresh = true;
    } else {
      fresh = false;
    }
  }
}

}  // namespace swarmlaw
