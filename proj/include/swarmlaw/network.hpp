#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swarmlaw/autodiff.hpp"
#include "swarmlaw/pattern.hpp"

namespace swarmlaw {

/// Fixed 4-layer perceptron: three tanh layers of width 32 and a linear
/// output layer scaled by `output_scale`. Input is normalized time followed by
/// optional constant control inputs; output is (x_0, y_0, x_1, y_1, ...).
///
/// Flat parameter order (optimizer state depends on it):
///   W1 b1 W2 b2 W3 b3 W4 b4 | f coeffs | f exponents | g coeffs | g exponents
/// with each W stored row-major as [out][in].
struct NetworkLayout {
  static constexpr std::size_t kHidden = 32;
  static constexpr std::size_t kHiddenLayers = 3;

  std::size_t n_agents = 0;
  std::size_t n_controls = 0;
  std::size_t n_terms = 4;  // K per coefficient function

  std::size_t n_inputs() const { return 1 + n_controls; }
  std::size_t n_outputs() const { return 2 * n_agents; }
  std::size_t layer_in(std::size_t l) const { return l == 0 ? n_inputs() : kHidden; }
  std::size_t layer_out(std::size_t l) const { return l == kHiddenLayers ? n_outputs() : kHidden; }
  std::size_t weight_offset(std::size_t l) const;
  std::size_t bias_offset(std::size_t l) const { return weight_offset(l) + layer_out(l) * layer_in(l); }
  std::size_t network_size() const { return weight_offset(kHiddenLayers + 1); }

  std::size_t f_coeff_offset() const { return network_size(); }
  std::size_t f_exponent_offset() const { return network_size() + n_terms; }
  std::size_t g_coeff_offset() const { return network_size() + 2 * n_terms; }
  std::size_t g_exponent_offset() const { return network_size() + 3 * n_terms; }
  std::size_t total_size() const { return network_size() + 4 * n_terms; }

  friend bool operator==(const NetworkLayout&, const NetworkLayout&) = default;
};

struct NetworkParameters {
  NetworkLayout layout;
  double output_scale = 1.0;  // R
  std::vector<double> values;
};

/// Xavier-uniform weights, biases 0.1, polynomial parameters uniform in
/// [-1, 1] (ring, clumps, mills) or [-0.1, 0.1] (ordered state, flock).
NetworkParameters init_parameters(std::size_t n_agents, PatternKind kind, std::uint64_t seed,
                                  std::size_t n_terms = 4, std::size_t n_controls = 0,
                                  double output_scale = 1.0);

/// Outputs and their first and second derivatives with respect to physical time.
struct TimeJet {
  std::vector<double> value;
  std::vector<double> first;
  std::vector<double> second;
};

struct TimeJetVars {
  std::vector<ad::Var> value;
  std::vector<ad::Var> first;
  std::vector<ad::Var> second;
};

/// Maps t in [0, T] to [-1, 1].
inline double normalize_time(double t, double horizon) { return 2.0 * t / horizon - 1.0; }

TimeJet forward_jet(const NetworkParameters& params, double t_normalized, double horizon,
                    std::span<const double> controls = {});

/// Tape version: `params` are tape variables laid out per `layout`; the
/// network block registers a hand-written backward pass.
TimeJetVars forward_jet(ad::Tape& tape, const NetworkLayout& layout, double output_scale,
                        std::span<const ad::Var> params, double t_normalized, double horizon,
                        std::span<const double> controls = {});

/// Checkpoint: flat parameters plus architecture metadata and RNG state.
std::string serialize_checkpoint(const NetworkParameters& params, std::uint64_t rng_state = 0);
NetworkParameters deserialize_checkpoint(const std::string& text, std::uint64_t* rng_state = nullptr);

}  // namespace swarmlaw
