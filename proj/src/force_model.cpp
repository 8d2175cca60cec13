#include "swarmlaw/force_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "swarmlaw/errors.hpp"

namespace swarmlaw {

using json = nlohmann::ordered_json;

CoefficientFunction::CoefficientFunction(std::vector<PolyTerm> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw ConfigError("coefficient function needs at least one term");
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    if (!std::isfinite(terms_[k].coeff) || !std::isfinite(terms_[k].exponent)) {
      throw ConfigError("coefficient function term " + std::to_string(k) + " is not finite");
    }
  }
}

CoefficientFunction CoefficientFunction::zero(std::size_t k) {
  return CoefficientFunction(std::vector<PolyTerm>(std::max<std::size_t>(k, 1)));
}

double CoefficientFunction::operator()(double r) const {
  const double base = std::max(r, kDistanceFloor);
  double sum = 0.0;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const auto& t = terms_[k];
    if (t.coeff == 0.0) continue;
    const double v = t.coeff * std::pow(base, t.exponent);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "term " << k << " (" << t.coeff << " * r^" << t.exponent << ") is not finite at r = "
          << r;
      throw EvaluationError(msg.str());
    }
    sum += v;
  }
  return sum;
}

double CoefficientFunction::eval_log(double log_r) const {
  double sum = 0.0;
  for (const auto& t : terms_) {
    if (t.coeff != 0.0) sum += t.coeff * std::exp(t.exponent * log_r);
  }
  return sum;
}

bool CoefficientFunction::is_zero() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const PolyTerm& t) { return t.coeff == 0.0; });
}

CoefficientFunction CoefficientFunction::scaled(double s) const {
  auto terms = terms_;
  for (auto& t : terms) t.coeff *= s;
  return CoefficientFunction(std::move(terms));
}

double eval_coefficient(const CoefficientFunction& fn, double r) {
  if (!(r >= 0.0)) throw ConfigError("coefficient functions are defined for r >= 0");
  return fn(r);
}

void InteractionModel::validate() const {
  if (cutoff_radius && !(*cutoff_radius > 0.0)) {
    throw ConfigError("cutoff radius must be positive when bounded");
  }
  if (distancing_cutoff && !(*distancing_cutoff > 0.0)) {
    throw ConfigError("distancing cutoff must be positive when set");
  }
}

Vec2 pair_force(const InteractionModel& model, Vec2 /*pos_i*/, Vec2 vel_i, Vec2 /*pos_j*/,
                Vec2 vel_j, Vec2 disp) {
  const double r = norm(disp);
  if (r == 0.0) throw CoincidentAgentError("coincident agents: pairwise distance is zero");
  Vec2 force;
  if (!model.distancing_cutoff || r <= *model.distancing_cutoff) {
    force = (model.distancing(r) / r) * disp;
  }
  if (!model.cutoff_radius || r <= *model.cutoff_radius) {
    const Vec2 rel = vel_j - vel_i;
    const double speed = norm(rel);
    if (speed >= kSpeedFloor) {
      const double g = model.aligning(r);
      force += (g / speed) * rel;
    }
  }
  return force;
}

GroupAssignment GroupAssignment::homogeneous(std::size_t n_agents, InteractionModel model) {
  GroupAssignment a;
  a.membership.assign(n_agents, 0);
  a.models.push_back(std::move(model));
  return a;
}

void GroupAssignment::validate() const {
  if (models.empty()) throw ConfigError("group assignment has no models");
  for (std::size_t i = 0; i < membership.size(); ++i) {
    if (membership[i] < 0 || static_cast<std::size_t>(membership[i]) >= models.size()) {
      throw ConfigError("agent " + std::to_string(i) + " maps to unknown group " +
                        std::to_string(membership[i]));
    }
  }
  for (const auto& m : models) m.validate();
}

void TransitionSchedule::validate() const {
  if (segments.empty()) throw ConfigError("transition schedule has no segments");
  for (std::size_t p = 0; p < segments.size(); ++p) {
    segments[p].assignment.validate();
    if (p > 0) {
      if (!(segments[p].start > segments[p - 1].start)) {
        throw ConfigError("segment start times must be strictly increasing");
      }
      if (segments[p].assignment.n_agents() != segments[0].assignment.n_agents()) {
        throw ConfigError("segments disagree on the number of agents");
      }
    }
  }
  for (const auto& w : noise_windows) {
    if (!(w.end > w.start) || w.sigma < 0.0) throw ConfigError("invalid noise window");
    for (const auto& s : segments) {
      if (s.start > w.start && s.start < w.end) {
        throw ConfigError("noise window overlaps a segment boundary");
      }
    }
  }
}

std::size_t TransitionSchedule::active_segment(double t) const {
  std::size_t p = 0;
  for (std::size_t k = 1; k < segments.size(); ++k) {
    if (segments[k].start <= t) p = k;
  }
  return p;
}

const NoiseWindow* TransitionSchedule::noise_window_at(double t) const {
  for (const auto& w : noise_windows) {
    if (t >= w.start && t < w.end) return &w;
  }
  return nullptr;
}

double blend_weight(double t, double t_p) { return -std::expm1(t_p - t); }

namespace {

struct PairCoefficients {
  double radial = 0.0;   // multiplies disp
  double aligning = 0.0; // multiplies rel / |rel|
  bool has_aligning = false;
};

PairCoefficients pair_coefficients(const InteractionModel& m, double r, double rel_speed) {
  PairCoefficients c;
  if (!m.distancing_cutoff || r <= *m.distancing_cutoff) c.radial = m.distancing(r) / r;
  if ((!m.cutoff_radius || r <= *m.cutoff_radius) && rel_speed >= kSpeedFloor &&
      !m.aligning.is_zero()) {
    c.aligning = m.aligning(r) / rel_speed;
    c.has_aligning = true;
  }
  return c;
}

}  // namespace

void accumulate_forces(const SwarmState& state, const GroupAssignment& assignment,
                       const DomainSpec& domain, std::span<Vec2> out) {
  const std::size_t n = state.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ai = state.agents[i];
    const int gi = assignment.membership[i];
    const auto& mi = assignment.models[static_cast<std::size_t>(gi)];
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& aj = state.agents[j];
      const int gj = assignment.membership[j];
      const Vec2 d = displacement(ai.position, aj.position, domain);
      const double r = norm(d);
      if (r == 0.0) {
        throw CoincidentAgentError("coincident agents " + std::to_string(i) + " and " +
                                       std::to_string(j),
                                   static_cast<int>(i), static_cast<int>(j));
      }
      const Vec2 rel = aj.velocity - ai.velocity;  // j relative to i
      const double rel_speed = norm(rel);
      try {
        const auto ci = pair_coefficients(mi, r, rel_speed);
        Vec2 fi = ci.radial * d;
        if (ci.has_aligning) fi += ci.aligning * rel;
        out[i] += fi;
        if (gi == gj) {
          // Same model: the pair force is exactly antisymmetric.
          out[j] -= fi;
        } else {
          const auto cj = pair_coefficients(
              assignment.models[static_cast<std::size_t>(gj)], r, rel_speed);
          Vec2 fj = -(cj.radial * d);
          if (cj.has_aligning) fj -= cj.aligning * rel;
          out[j] += fj;
        }
      } catch (const EvaluationError& e) {
        throw EvaluationError("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                              "): " + e.what());
      }
    }
  }
}

std::vector<Vec2> total_force(const SwarmState& state, const GroupAssignment& assignment,
                              const DomainSpec& domain, double t,
                              const TransitionSchedule* schedule) {
  const std::size_t n = state.size();
  std::vector<Vec2> forces(n);
  if (!schedule) {
    accumulate_forces(state, assignment, domain, forces);
    return forces;
  }
  if (schedule->noise_window_at(t)) return forces;
  const std::size_t p = schedule->active_segment(t);
  const auto& seg = schedule->segments[p];
  accumulate_forces(state, seg.assignment, domain, forces);
  if (p == 0) return forces;
  const double w = blend_weight(t, seg.start);
  if (w >= 1.0) return forces;
  std::vector<Vec2> previous(n);
  accumulate_forces(state, schedule->segments[p - 1].assignment, domain, previous);
  for (std::size_t i = 0; i < n; ++i) forces[i] = w * forces[i] + (1.0 - w) * previous[i];
  return forces;
}

// --- serialization -------------------------------------------------------

namespace {

json terms_to_json(const CoefficientFunction& fn) {
  json arr = json::array();
  for (const auto& t : fn.terms()) arr.push_back(json::array({t.coeff, t.exponent}));
  return arr;
}

double number_at(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

CoefficientFunction terms_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of [coeff, exponent] pairs");
  if (j.empty()) throw ParseError(where + ": needs at least one term");
  std::vector<PolyTerm> terms;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& pair = j[k];
    const std::string at = where + "[" + std::to_string(k) + "]";
    if (!pair.is_array() || pair.size() != 2) throw ParseError(at + ": expected [coeff, exponent]");
    terms.push_back({number_at(pair[0], at + "[0]"), number_at(pair[1], at + "[1]")});
  }
  try {
    return CoefficientFunction(std::move(terms));
  } catch (const ConfigError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

std::optional<double> optional_length(const json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
  return number_at(doc[key], key);
}

}  // namespace

std::string serialize_model(const InteractionModel& model) {
  model.validate();
  json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["f"] = terms_to_json(model.distancing);
  doc["g"] = terms_to_json(model.aligning);
  doc["cutoff_radius"] = model.cutoff_radius ? json(*model.cutoff_radius) : json(nullptr);
  if (model.distancing_cutoff) doc["distancing_cutoff"] = *model.distancing_cutoff;
  json targets = json::object();
  for (const auto& [k, v] : model.meta.targets) targets[k] = v;
  doc["pattern_meta"] = {{"kind", model.meta.kind}, {"targets", targets}};
  return doc.dump(2) + "\n";
}

InteractionModel deserialize_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model file: top level must be an object");
  if (!doc.contains("schema_version")) throw ParseError("model file: missing schema_version");
  if (!doc["schema_version"].is_number_integer() ||
      doc["schema_version"].get<int>() != kModelSchemaVersion) {
    throw VersionError("model file: unsupported schema_version " + doc["schema_version"].dump());
  }
  for (const char* key : {"f", "g"}) {
    if (!doc.contains(key)) throw ParseError(std::string("model file: missing ") + key);
  }
  InteractionModel m;
  m.distancing = terms_from_json(doc["f"], "f");
  m.aligning = terms_from_json(doc["g"], "g");
  m.cutoff_radius = optional_length(doc, "cutoff_radius");
  m.distancing_cutoff = optional_length(doc, "distancing_cutoff");
  if (doc.contains("pattern_meta")) {
    const auto& meta = doc["pattern_meta"];
    if (!meta.is_object()) throw ParseError("pattern_meta: expected an object");
    if (meta.contains("kind")) {
      if (!meta["kind"].is_string()) throw ParseError("pattern_meta.kind: expected a string");
      m.meta.kind = meta["kind"].get<std::string>();
    }
    if (meta.contains("targets")) {
      if (!meta["targets"].is_object()) throw ParseError("pattern_meta.targets: expected object");
      for (const auto& [k, v] : meta["targets"].items()) {
        m.meta.targets[k] = number_at(v, "pattern_meta.targets." + k);
      }
    }
  }
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  return m;
}

InteractionModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_model(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_model(const InteractionModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file " + path);
  out << serialize_model(model);
}

}  // namespace swarmlaw
