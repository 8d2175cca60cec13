#include "swarmlaw/network.hpp"

#include <cmath>
#include <memory>
#include <nlohmann/json.hpp>
#include <random>

#include "swarmlaw/errors.hpp"

namespace swarmlaw {

std::size_t NetworkLayout::weight_offset(std::size_t l) const {
  std::size_t off = 0;
  for (std::size_t k = 0; k < l; ++k) off += layer_out(k) * layer_in(k) + layer_out(k);
  return off;
}

NetworkParameters init_parameters(std::size_t n_agents, PatternKind kind, std::uint64_t seed,
                                  std::size_t n_terms, std::size_t n_controls,
                                  double output_scale) {
  if (n_agents < 2) throw ConfigError("network needs at least two agents");
  if (n_terms < 1) throw ConfigError("need at least one polynomial term");
  NetworkParameters p;
  p.layout = {n_agents, n_controls, n_terms};
  p.output_scale = output_scale;
  p.values.assign(p.layout.total_size(), 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l <= NetworkLayout::kHiddenLayers; ++l) {
    const auto fan_in = static_cast<double>(p.layout.layer_in(l));
    const auto fan_out = static_cast<double>(p.layout.layer_out(l));
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    const std::size_t w = p.layout.weight_offset(l);
    for (std::size_t k = 0; k < p.layout.layer_out(l) * p.layout.layer_in(l); ++k) {
      p.values[w + k] = u(rng);
    }
    for (std::size_t k = 0; k < p.layout.layer_out(l); ++k) p.values[p.layout.bias_offset(l) + k] = 0.1;
  }
  const double range = is_field_pattern(kind) ? 0.1 : 1.0;
  std::uniform_real_distribution<double> u(-range, range);
  for (std::size_t k = p.layout.network_size(); k < p.layout.total_size(); ++k) p.values[k] = u(rng);
  return p;
}

namespace {

struct LayerCache {
  std::vector<double> z0, z1, z2;  // layer input jet
  std::vector<double> h0, a1, a2;  // hidden: activation value, pre-activation derivatives
};

struct JetCache {
  std::vector<LayerCache> layers;
};

/// Forward pass over raw parameters; fills `cache` when provided.
TimeJet forward_impl(const NetworkLayout& L, double scale, const double* p, double t_norm,
                     double horizon, std::span<const double> controls, JetCache* cache) {
  if (controls.size() != L.n_controls) throw ConfigError("wrong number of control inputs");
  std::vector<double> z0(L.n_inputs(), 0.0), z1(L.n_inputs(), 0.0), z2(L.n_inputs(), 0.0);
  z0[0] = t_norm;
  z1[0] = 2.0 / horizon;  // d(t_norm)/dt
  for (std::size_t c = 0; c < controls.size(); ++c) z0[1 + c] = controls[c];
  if (cache) cache->layers.resize(NetworkLayout::kHiddenLayers + 1);

  for (std::size_t l = 0; l <= NetworkLayout::kHiddenLayers; ++l) {
    const std::size_t n_in = L.layer_in(l);
    const std::size_t n_out = L.layer_out(l);
    const double* W = p + L.weight_offset(l);
    const double* b = p + L.bias_offset(l);
    std::vector<double> a0(n_out), a1(n_out), a2(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* row = W + o * n_in;
      double s0 = b[o], s1 = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n_in; ++i) {
        s0 += row[i] * z0[i];
        s1 += row[i] * z1[i];
        s2 += row[i] * z2[i];
      }
      a0[o] = s0;
      a1[o] = s1;
      a2[o] = s2;
    }
    if (cache) {
      auto& c = cache->layers[l];
      c.z0 = z0;
      c.z1 = z1;
      c.z2 = z2;
    }
    if (l == NetworkLayout::kHiddenLayers) {
      TimeJet jet;
      for (std::size_t o = 0; o < n_out; ++o) {
        a0[o] *= scale;
        a1[o] *= scale;
        a2[o] *= scale;
      }
      jet.value = std::move(a0);
      jet.first = std::move(a1);
      jet.second = std::move(a2);
      return jet;
    }
    std::vector<double> h0(n_out), h1(n_out), h2(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double h = std::tanh(a0[o]);
      const double s = 1.0 - h * h;
      h0[o] = h;
      h1[o] = s * a1[o];
      h2[o] = s * a2[o] - 2.0 * h * s * a1[o] * a1[o];
    }
    if (cache) {
      auto& c = cache->layers[l];
      c.h0 = h0;
      c.a1 = a1;
      c.a2 = a2;
    }
    z0 = std::move(h0);
    z1 = std::move(h1);
    z2 = std::move(h2);
  }
  return {};
}

/// Accumulates d(loss)/d(params) into `grad` given adjoints of the output jet.
void backward_impl(const NetworkLayout& L, double scale, const double* p, const JetCache& cache,
                   std::span<const double> y0bar, std::span<const double> y1bar,
                   std::span<const double> y2bar, double* grad) {
  const std::size_t top = NetworkLayout::kHiddenLayers;
  // Adjoints of the current layer's pre-activation jet.
  std::vector<double> g0(L.n_outputs()), g1(L.n_outputs()), g2(L.n_outputs());
  for (std::size_t o = 0; o < L.n_outputs(); ++o) {
    g0[o] = scale * y0bar[o];
    g1[o] = scale * y1bar[o];
    g2[o] = scale * y2bar[o];
  }
  for (std::size_t l = top + 1; l-- > 0;) {
    const auto& c = cache.layers[l];
    const std::size_t n_in = L.layer_in(l);
    const std::size_t n_out = L.layer_out(l);
    const double* W = p + L.weight_offset(l);
    double* gW = grad + L.weight_offset(l);
    double* gb = grad + L.bias_offset(l);
    for (std::size_t o = 0; o < n_out; ++o) {
      gb[o] += g0[o];
      double* row = gW + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) {
        row[i] += g0[o] * c.z0[i] + g1[o] * c.z1[i] + g2[o] * c.z2[i];
      }
    }
    if (l == 0) break;
    // Adjoints of the input jet, which is the previous layer's activation jet.
    std::vector<double> hb0(n_in, 0.0), hb1(n_in, 0.0), hb2(n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* row = W + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) {
        hb0[i] += row[i] * g0[o];
        hb1[i] += row[i] * g1[o];
        hb2[i] += row[i] * g2[o];
      }
    }
    const auto& prev = cache.layers[l - 1];
    g0.assign(n_in, 0.0);
    g1.assign(n_in, 0.0);
    g2.assign(n_in, 0.0);
    for (std::size_t i = 0; i < n_in; ++i) {
      const double h = prev.h0[i];
      const double a1 = prev.a1[i];
      const double a2 = prev.a2[i];
      const double s = 1.0 - h * h;
      // h1 = s a1, h2 = s a2 - 2 h s a1^2
      g2[i] = s * hb2[i];
      g1[i] = s * hb1[i] - 4.0 * h * s * a1 * hb2[i];
      const double sbar = a1 * hb1[i] + (a2 - 2.0 * h * a1 * a1) * hb2[i];
      const double hbar = hb0[i] - 2.0 * s * a1 * a1 * hb2[i] - 2.0 * h * sbar;
      g0[i] = s * hbar;
    }
  }
}

}  // namespace

TimeJet forward_jet(const NetworkParameters& params, double t_normalized, double horizon,
                    std::span<const double> controls) {
  if (params.values.size() < params.layout.network_size()) {
    throw ConfigError("parameter vector shorter than the network layout");
  }
  return forward_impl(params.layout, params.output_scale, params.values.data(), t_normalized,
                      horizon, controls, nullptr);
}

TimeJetVars forward_jet(ad::Tape& tape, const NetworkLayout& layout, double output_scale,
                        std::span<const ad::Var> params, double t_normalized, double horizon,
                        std::span<const double> controls) {
  const std::size_t n = layout.network_size();
  if (params.size() < n) throw ConfigError("parameter vector shorter than the network layout");
  const std::uint32_t base = params[0].index();
  std::vector<double> raw(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (params[k].tape() != &tape || params[k].index() != base + k) {
      throw ConfigError("network parameters must be contiguous tape variables");
    }
    raw[k] = params[k].value();
  }
  auto cache = std::make_shared<JetCache>();
  TimeJet jet = forward_impl(layout, output_scale, raw.data(), t_normalized, horizon, controls,
                             cache.get());
  const std::size_t m = layout.n_outputs();
  std::vector<double> all;
  all.reserve(3 * m);
  all.insert(all.end(), jet.value.begin(), jet.value.end());
  all.insert(all.end(), jet.first.begin(), jet.first.end());
  all.insert(all.end(), jet.second.begin(), jet.second.end());
  std::vector<ad::Var> outs;
  const std::uint32_t first = tape.begin_block_outputs(all, outs);
  tape.end_block(first, [layout, output_scale, base, first, m, cache,
                         raw = std::move(raw)](std::span<double> adj) {
    const std::span<const double> y(adj.data() + first, 3 * m);
    backward_impl(layout, output_scale, raw.data(), *cache, y.subspan(0, m), y.subspan(m, m),
                  y.subspan(2 * m, m), adj.data() + base);
  });
  TimeJetVars out;
  out.value.assign(outs.begin(), outs.begin() + static_cast<std::ptrdiff_t>(m));
  out.first.assign(outs.begin() + static_cast<std::ptrdiff_t>(m),
                   outs.begin() + static_cast<std::ptrdiff_t>(2 * m));
  out.second.assign(outs.begin() + static_cast<std::ptrdiff_t>(2 * m), outs.end());
  return out;
}

std::string serialize_checkpoint(const NetworkParameters& params, std::uint64_t rng_state) {
  nlohmann::ordered_json doc;
  doc["format"] = "swarmlaw-checkpoint";
  doc["version"] = 1;
  doc["n_agents"] = params.layout.n_agents;
  doc["n_controls"] = params.layout.n_controls;
  doc["n_terms"] = params.layout.n_terms;
  doc["hidden_width"] = NetworkLayout::kHidden;
  doc["layers"] = NetworkLayout::kHiddenLayers + 1;
  doc["output_scale"] = params.output_scale;
  doc["rng_state"] = rng_state;
  doc["params"] = params.values;
  return doc.dump() + "\n";
}

NetworkParameters deserialize_checkpoint(const std::string& text, std::uint64_t* rng_state) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format") != "swarmlaw-checkpoint") throw ParseError("checkpoint: wrong format tag");
    if (doc.at("version") != 1) throw VersionError("checkpoint: unsupported version");
    if (doc.at("hidden_width") != NetworkLayout::kHidden ||
        doc.at("layers") != NetworkLayout::kHiddenLayers + 1) {
      throw ParseError("checkpoint: architecture mismatch");
    }
    NetworkParameters p;
    p.layout.n_agents = doc.at("n_agents").get<std::size_t>();
    p.layout.n_controls = doc.at("n_controls").get<std::size_t>();
    p.layout.n_terms = doc.at("n_terms").get<std::size_t>();
    p.output_scale = doc.at("output_scale").get<double>();
    p.values = doc.at("params").get<std::vector<double>>();
    if (p.values.size() != p.layout.total_size()) {
      throw ParseError("checkpoint: parameter count does not match the layout");
    }
    if (rng_state) *rng_state = doc.at("rng_state").get<std::uint64_t>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace swarmlaw
