#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace swarmlaw::ad {

class Tape;

/// A scalar on a reverse-mode tape. Constants carry no tape node.
class Var {
 public:
  static constexpr std::uint32_t kConstant = std::numeric_limits<std::uint32_t>::max();

  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT: implicit constant lift

  double value() const { return value_; }
  bool is_constant() const { return index_ == kConstant; }
  std::uint32_t index() const { return index_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = kConstant;
  double value_ = 0.0;
};

/// Records an expression graph as nodes with weighted parent edges, then
/// sweeps it backwards. Custom blocks can register their own backward pass for
/// a contiguous run of output nodes.
class Tape {
 public:
  using BlockBackward = std::function<void(std::span<double> adjoints)>;

  Tape() { node_edges_.push_back(0); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(double value);
  /// Node with explicit parents and local partial derivatives.
  Var node(double value, std::span<const Var> parents, std::span<const double> partials);
  Var unary(double value, const Var& a, double da);
  Var binary(double value, const Var& a, double da, const Var& b, double db);

  /// Creates `count` parentless output nodes whose adjoints are consumed by
  /// `backward` once every later node has been processed.
  std::uint32_t begin_block_outputs(std::span<const double> values, std::vector<Var>& out);
  void end_block(std::uint32_t first_output, BlockBackward backward);

  std::size_t size() const { return node_edges_.size() - 1; }

  /// Adjoint of every node with respect to `output`.
  std::vector<double> adjoints(const Var& output) const;

 private:
  struct Edge {
    double partial;
    std::uint32_t parent;
  };
  struct Block {
    std::uint32_t first_output;
    BlockBackward backward;
  };

  std::uint32_t push_node();

  std::vector<std::uint32_t> node_edges_;  // prefix offsets into edges_
  std::vector<Edge> edges_;
  std::vector<Block> blocks_;
};

Tape* tape_of(const Var& a, const Var& b);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
/// max(0, a)
Var relu(const Var& a);
/// max(a, floor); the gradient is zero where the floor is active.
Var max_floor(const Var& a, double floor);
/// base^exponent computed as exp(exponent * log(max(base, floor))).
Var pow_clamped(const Var& base, const Var& exponent, double floor);
/// sqrt(x^2 + y^2), floored below at `floor`.
Var hypot_floor(const Var& x, const Var& y, double floor);

Var sum(std::span<const Var> xs);
/// sum_k a_k * b_k as a single node.
Var dot(std::span<const Var> a, std::span<const Var> b);
Var mean(std::span<const Var> xs);

/// Value and gradient of `f` at `x`, with the first x.size() tape leaves being
/// the parameters.
struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

ValueAndGradient value_and_gradient(const ScalarFunction& f, std::span<const double> x);

}  // namespace swarmlaw::ad
