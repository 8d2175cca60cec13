#include "swarmlaw/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace swarmlaw::ad {

std::uint32_t Tape::push_node() {
  const auto idx = static_cast<std::uint32_t>(node_edges_.size() - 1);
  node_edges_.push_back(static_cast<std::uint32_t>(edges_.size()));
  return idx;
}

Var Tape::variable(double value) { return Var(this, push_node(), value); }

Var Tape::node(double value, std::span<const Var> parents, std::span<const double> partials) {
  bool any = false;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    if (!parents[k].is_constant() && partials[k] != 0.0) {
      edges_.push_back({partials[k], parents[k].index()});
      any = true;
    }
  }
  if (!any) {
    // Nothing differentiable feeds this value; still tie it to the tape if
    // any parent lives there so callers can treat it uniformly.
    bool on_tape = false;
    for (const auto& p : parents) on_tape = on_tape || !p.is_constant();
    if (!on_tape) return Var(value);
  }
  node_edges_.push_back(static_cast<std::uint32_t>(edges_.size()));
  return Var(this, static_cast<std::uint32_t>(node_edges_.size() - 2), value);
}

Var Tape::unary(double value, const Var& a, double da) {
  if (a.is_constant()) return Var(value);
  const Var parents[] = {a};
  const double partials[] = {da};
  return node(value, parents, partials);
}

Var Tape::binary(double value, const Var& a, double da, const Var& b, double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  const Var parents[] = {a, b};
  const double partials[] = {da, db};
  return node(value, parents, partials);
}

std::uint32_t Tape::begin_block_outputs(std::span<const double> values, std::vector<Var>& out) {
  const auto first = static_cast<std::uint32_t>(size());
  out.clear();
  out.reserve(values.size());
  for (double v : values) out.push_back(Var(this, push_node(), v));
  return first;
}

void Tape::end_block(std::uint32_t first_output, BlockBackward backward) {
  blocks_.push_back({first_output, std::move(backward)});
}

std::vector<double> Tape::adjoints(const Var& output) const {
  std::vector<double> adj(size(), 0.0);
  if (output.is_constant()) return adj;
  if (output.tape() != this) throw std::logic_error("output belongs to a different tape");
  adj[output.index()] = 1.0;
  auto block = blocks_.rbegin();
  for (std::size_t i = size(); i-- > 0;) {
    const double a = adj[i];
    if (a != 0.0) {
      for (std::uint32_t e = node_edges_[i]; e < node_edges_[i + 1]; ++e) {
        adj[edges_[e].parent] += edges_[e].partial * a;
      }
    }
    while (block != blocks_.rend() && block->first_output == i) {
      block->backward(adj);
      ++block;
    }
  }
  return adj;
}

Tape* tape_of(const Var& a, const Var& b) { return a.tape() ? a.tape() : b.tape(); }

Var operator+(const Var& a, const Var& b) {
  const double v = a.value() + b.value();
  if (a.is_constant() && b.is_constant()) return Var(v);
  return tape_of(a, b)->binary(v, a, 1.0, b, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  const double v = a.value() - b.value();
  if (a.is_constant() && b.is_constant()) return Var(v);
  return tape_of(a, b)->binary(v, a, 1.0, b, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  const double v = a.value() * b.value();
  if (a.is_constant() && b.is_constant()) return Var(v);
  return tape_of(a, b)->binary(v, a, b.value(), b, a.value());
}

Var operator/(const Var& a, const Var& b) {
  const double v = a.value() / b.value();
  if (a.is_constant() && b.is_constant()) return Var(v);
  return tape_of(a, b)->binary(v, a, 1.0 / b.value(), b, -v / b.value());
}

Var operator-(const Var& a) {
  if (a.is_constant()) return Var(-a.value());
  return a.tape()->unary(-a.value(), a, -1.0);
}

Var exp(const Var& a) {
  const double v = std::exp(a.value());
  if (a.is_constant()) return Var(v);
  return a.tape()->unary(v, a, v);
}

Var log(const Var& a) {
  const double v = std::log(a.value());
  if (a.is_constant()) return Var(v);
  return a.tape()->unary(v, a, 1.0 / a.value());
}

Var tanh(const Var& a) {
  const double v = std::tanh(a.value());
  if (a.is_constant()) return Var(v);
  return a.tape()->unary(v, a, 1.0 - v * v);
}

Var sqrt(const Var& a) {
  const double v = std::sqrt(a.value());
  if (a.is_constant()) return Var(v);
  return a.tape()->unary(v, a, 0.5 / v);
}

Var square(const Var& a) {
  const double v = a.value() * a.value();
  if (a.is_constant()) return Var(v);
  return a.tape()->unary(v, a, 2.0 * a.value());
}

Var abs(const Var& a) {
  const double v = std::abs(a.value());
  if (a.is_constant()) return Var(v);
  return a.tape()->unary(v, a, a.value() < 0.0 ? -1.0 : 1.0);
}

Var relu(const Var& a) {
  if (a.value() <= 0.0) return Var(0.0);
  return a;
}

Var max_floor(const Var& a, double floor) {
  if (a.value() < floor) return Var(floor);
  return a;
}

Var pow_clamped(const Var& base, const Var& exponent, double floor) {
  return exp(exponent * log(max_floor(base, floor)));
}

Var hypot_floor(const Var& x, const Var& y, double floor) {
  const double r = std::sqrt(x.value() * x.value() + y.value() * y.value());
  if (r < floor) return Var(floor);
  Tape* t = tape_of(x, y);
  if (!t) return Var(r);
  return t->binary(r, x, x.value() / r, y, y.value() / r);
}

Var sum(std::span<const Var> xs) {
  double v = 0.0;
  Tape* t = nullptr;
  for (const auto& x : xs) {
    v += x.value();
    if (!t) t = x.tape();
  }
  if (!t) return Var(v);
  std::vector<double> ones(xs.size(), 1.0);
  return t->node(v, xs, ones);
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double v = 0.0;
  Tape* t = nullptr;
  for (std::size_t k = 0; k < a.size(); ++k) {
    v += a[k].value() * b[k].value();
    if (!t) t = tape_of(a[k], b[k]);
  }
  if (!t) return Var(v);
  std::vector<Var> parents;
  std::vector<double> partials;
  parents.reserve(2 * a.size());
  partials.reserve(2 * a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    parents.push_back(a[k]);
    partials.push_back(b[k].value());
    parents.push_back(b[k]);
    partials.push_back(a[k].value());
  }
  return t->node(v, parents, partials);
}

Var mean(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of an empty range");
  return sum(xs) / static_cast<double>(xs.size());
}

ValueAndGradient value_and_gradient(const ScalarFunction& f, std::span<const double> x) {
  Tape tape;
  std::vector<Var> params;
  params.reserve(x.size());
  for (double v : x) params.push_back(tape.variable(v));
  const Var out = f(tape, params);
  ValueAndGradient r;
  r.value = out.value();
  const auto adj = tape.adjoints(out);
  r.gradient.assign(adj.begin(), adj.begin() + static_cast<std::ptrdiff_t>(x.size()));
  return r;
}

}  // namespace swarmlaw::ad
