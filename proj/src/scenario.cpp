#include "swarmlaw/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "swarmlaw/errors.hpp"

namespace swarmlaw {

using json = nlohmann::json;

Trajectory simulate_swarm(const GroupAssignment& assignment, const TrialSetup& setup,
                          std::uint64_t seed, const TransitionSchedule* schedule) {
  if (setup.n_agents < 2) throw ConfigError("need at least two agents");
  if (assignment.n_agents() != setup.n_agents) {
    throw ConfigError("group assignment does not match the agent count");
  }
  const double v0 = setup.integrator.propulsion_speed;
  const auto initial =
      init_random(setup.init, setup.n_agents, setup.domain, v0, seed, setup.density);
  auto cfg = setup.integrator;
  cfg.rng_seed = derive_seed(seed, 0xA11CE);
  return rk4_integrate(initial, assignment, setup.domain, setup.noise, cfg,
                       initial.time + setup.duration, setup.record_every, schedule);
}

// --- config ----------------------------------------------------------------

void ScenarioConfig::validate() const {
  if (n_agents < 2) throw ConfigError("scenario: need at least two agents");
  if (!(duration > 0.0)) throw ConfigError("scenario: duration must be positive");
  if (!(record_every > 0.0)) throw ConfigError("scenario: record_every must be positive");
  domain.validate();
  integrator.validate();
  if (!(noise_sigma >= 0.0)) throw ConfigError("scenario: noise sigma must be >= 0");
  if (groups.empty()) throw ConfigError("scenario: at least one group is required");
  std::size_t next = 1;
  for (const auto& g : groups) {
    if (g.first != next || g.last < g.first) {
      throw ConfigError("scenario: group ranges must partition agents 1.." +
                        std::to_string(n_agents) + " in order");
    }
    next = g.last + 1;
  }
  if (next != n_agents + 1) {
    throw ConfigError("scenario: group ranges must cover all " + std::to_string(n_agents) +
                      " agents");
  }
  if (segments.empty()) throw ConfigError("scenario: at least one segment is required");
  if (segments.front().t_start != 0.0) throw ConfigError("scenario: first segment must start at 0");
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (k > 0 && !(segments[k].t_start > segments[k - 1].t_start)) {
      throw ConfigError("scenario: segment start times must be strictly increasing");
    }
    if (segments[k].models.size() != groups.size()) {
      throw ConfigError("scenario: segment " + std::to_string(k) + " needs one model per group");
    }
    for (const auto& ref : segments[k].models) {
      if (!ref.file && !ref.pattern) throw ConfigError("scenario: empty model reference");
    }
  }
  for (const auto& w : noise_windows) {
    if (!(w.end > w.start) || !(w.sigma >= 0.0)) {
      throw ConfigError("scenario: noise windows need end > start and sigma >= 0");
    }
    for (const auto& s : segments) {
      if (s.t_start > w.start && s.t_start < w.end) {
        throw ConfigError("scenario: noise window overlaps the segment boundary at t = " +
                          std::to_string(s.t_start));
      }
    }
  }
}

std::vector<int> ScenarioConfig::membership() const {
  std::vector<int> m(n_agents, 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t i = groups[g].first; i <= groups[g].last && i <= n_agents; ++i) {
      m[i - 1] = static_cast<int>(g);
    }
  }
  return m;
}

TrialSetup ScenarioConfig::trial_setup() const {
  TrialSetup s;
  s.n_agents = n_agents;
  s.duration = duration;
  s.record_every = record_every;
  s.domain = domain;
  s.noise = NoiseSpec::gaussian(noise_sigma);
  s.integrator = integrator;
  s.init = init;
  s.density = density;
  return s;
}

namespace {

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError("scenario: " + where + " must be a number");
  return j.get<double>();
}

std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ParseError("scenario: " + where + " must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

ModelRef model_ref(const json& j, const std::string& where) {
  ModelRef ref;
  if (j.is_string()) {
    ref.file = j.get<std::string>();
    return ref;
  }
  if (!j.is_object()) throw ParseError("scenario: " + where + " must be a path or an object");
  if (j.contains("file")) {
    if (!j["file"].is_string()) throw ParseError("scenario: " + where + ".file must be a string");
    ref.file = j["file"].get<std::string>();
  }
  if (j.contains("pattern")) {
    if (!j["pattern"].is_string()) {
      throw ParseError("scenario: " + where + ".pattern must be a string");
    }
    PatternMeta meta;
    meta.kind = j["pattern"].get<std::string>();
    if (j.contains("targets")) {
      if (!j["targets"].is_object()) {
        throw ParseError("scenario: " + where + ".targets must be an object");
      }
      for (const auto& [k, v] : j["targets"].items()) {
        meta.targets[k] = number(v, where + ".targets." + k);
      }
    }
    try {
      ref.pattern = PatternSpec::from_meta(meta);
      ref.pattern->validate();
    } catch (const ConfigError& e) {
      throw ConfigError("scenario: " + where + ": " + e.what());
    }
  }
  if (!ref.file && !ref.pattern) throw ParseError("scenario: " + where + " needs file or pattern");
  return ref;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("scenario: top level must be an object");
  if (!doc.contains("schema_version")) throw ParseError("scenario: missing schema_version");
  if (!doc["schema_version"].is_number_integer() ||
      doc["schema_version"].get<int>() != kScenarioSchemaVersion) {
    throw VersionError("scenario: unsupported schema_version " + doc["schema_version"].dump());
  }
  for (const char* key : {"n_agents", "duration", "groups", "segments"}) {
    if (!doc.contains(key)) throw ParseError(std::string("scenario: missing ") + key);
  }
  ScenarioConfig c;
  c.n_agents = count(doc["n_agents"], "n_agents");
  c.duration = number(doc["duration"], "duration");
  if (doc.contains("seed")) c.seed = count(doc["seed"], "seed");
  if (doc.contains("record_every")) c.record_every = number(doc["record_every"], "record_every");
  if (doc.contains("density")) c.density = number(doc["density"], "density");
  if (doc.contains("init")) {
    const auto s = doc["init"].is_string() ? doc["init"].get<std::string>() : "";
    if (s == "bounded_swarm") {
      c.init = InitClass::bounded_swarm;
    } else if (s == "field") {
      c.init = InitClass::field;
    } else {
      throw ParseError("scenario: init must be \"bounded_swarm\" or \"field\"");
    }
  }
  if (doc.contains("domain")) {
    const auto& d = doc["domain"];
    const auto kind = d.is_object() && d.contains("kind") && d["kind"].is_string()
                          ? d["kind"].get<std::string>()
                          : "";
    if (kind == "unbounded") {
      c.domain = DomainSpec::unbounded();
    } else if (kind == "periodic") {
      if (d.contains("side_length")) {
        c.domain = DomainSpec::periodic(number(d["side_length"], "domain.side_length"));
      } else {
        c.domain = DomainSpec::periodic(side_for_density(c.n_agents, c.density));
      }
    } else {
      throw ParseError("scenario: domain.kind must be \"unbounded\" or \"periodic\"");
    }
  }
  if (doc.contains("noise")) {
    const auto& n = doc["noise"];
    if (!n.is_object() || !n.contains("sigma")) throw ParseError("scenario: noise needs sigma");
    c.noise_sigma = number(n["sigma"], "noise.sigma");
  }
  if (doc.contains("integrator")) {
    const auto& i = doc["integrator"];
    if (!i.is_object()) throw ParseError("scenario: integrator must be an object");
    if (i.contains("max_step")) c.integrator.max_step = number(i["max_step"], "integrator.max_step");
    if (i.contains("propulsion_speed")) {
      c.integrator.propulsion_speed = number(i["propulsion_speed"], "integrator.propulsion_speed");
    }
  }
  if (!doc["groups"].is_array()) throw ParseError("scenario: groups must be an array");
  for (std::size_t g = 0; g < doc["groups"].size(); ++g) {
    const auto& j = doc["groups"][g];
    const std::string where = "groups[" + std::to_string(g) + "]";
    if (!j.is_object() || !j.contains("agents") || !j["agents"].is_array() ||
        j["agents"].size() != 2) {
      throw ParseError("scenario: " + where + ".agents must be [first, last]");
    }
    c.groups.push_back({count(j["agents"][0], where + ".agents[0]"),
                        count(j["agents"][1], where + ".agents[1]")});
  }
  if (!doc["segments"].is_array()) throw ParseError("scenario: segments must be an array");
  for (std::size_t k = 0; k < doc["segments"].size(); ++k) {
    const auto& j = doc["segments"][k];
    const std::string where = "segments[" + std::to_string(k) + "]";
    if (!j.is_object() || !j.contains("t_start") || !j.contains("models") ||
        !j["models"].is_array()) {
      throw ParseError("scenario: " + where + " needs t_start and models[]");
    }
    ScenarioSegment s;
    s.t_start = number(j["t_start"], where + ".t_start");
    for (std::size_t m = 0; m < j["models"].size(); ++m) {
      s.models.push_back(model_ref(j["models"][m], where + ".models[" + std::to_string(m) + "]"));
    }
    c.segments.push_back(std::move(s));
  }
  if (doc.contains("noise_windows")) {
    if (!doc["noise_windows"].is_array()) throw ParseError("scenario: noise_windows must be an array");
    for (const auto& j : doc["noise_windows"]) {
      if (!j.is_object() || !j.contains("start") || !j.contains("end")) {
        throw ParseError("scenario: noise window needs start and end");
      }
      NoiseWindow w;
      w.start = number(j["start"], "noise_windows.start");
      w.end = number(j["end"], "noise_windows.end");
      w.sigma = j.contains("sigma") ? number(j["sigma"], "noise_windows.sigma") : 0.0;
      c.noise_windows.push_back(w);
    }
  }
  if (doc.contains("outputs")) {
    const auto& o = doc["outputs"];
    if (!o.is_object()) throw ParseError("scenario: outputs must be an object");
    auto str = [&](const char* key, std::string& dst) {
      if (!o.contains(key)) return;
      if (!o[key].is_string()) throw ParseError(std::string("scenario: outputs.") + key);
      dst = o[key].get<std::string>();
    };
    str("trajectory", c.outputs.trajectory);
    str("metrics", c.outputs.metrics);
    str("group_metrics", c.outputs.group_metrics);
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

TransitionSchedule resolve_schedule(const ScenarioConfig& config, const ResolveOptions& options) {
  config.validate();
  std::map<std::string, InteractionModel> trained;
  auto resolve = [&](const ModelRef& ref) -> InteractionModel {
    if (ref.file) {
      std::filesystem::path p(*ref.file);
      if (p.is_relative()) p = options.base_dir / p;
      if (std::filesystem::exists(p)) return load_model(p.string());
      if (!ref.pattern) throw ConfigError("scenario: model file not found: " + p.string());
    }
    if (!options.train_missing) {
      throw ConfigError("scenario: inline pattern needs --train-missing (or a model file)");
    }
    const auto meta = ref.pattern->meta();
    std::string key = meta.kind;
    for (const auto& [k, v] : meta.targets) key += ";" + k + "=" + std::to_string(v);
    auto it = trained.find(key);
    if (it == trained.end()) {
      auto cfg = options.training.value_or(TrainingConfig::for_pattern(ref.pattern->kind));
      cfg.seed = derive_seed(config.seed, trained.size() + 1);
      auto result = train(*ref.pattern, cfg);
      if (ref.file) {
        std::filesystem::path p(*ref.file);
        if (p.is_relative()) p = options.base_dir / p;
        save_model(result.model, p.string());
      }
      it = trained.emplace(key, std::move(result.model)).first;
    }
    return it->second;
  };
  TransitionSchedule schedule;
  const auto membership = config.membership();
  for (const auto& seg : config.segments) {
    GroupAssignment a;
    a.membership = membership;
    for (const auto& ref : seg.models) a.models.push_back(resolve(ref));
    schedule.segments.push_back({seg.t_start, std::move(a)});
  }
  schedule.noise_windows = config.noise_windows;
  schedule.validate();
  return schedule;
}

MetricSeries group_series(const Trajectory& traj, int group, const DomainSpec& domain) {
  MetricSeries s;
  for (const auto& frame : traj.frames) s.push(frame.time, subset(frame, traj.groups, group), domain);
  return s;
}

void write_group_metrics_csv(std::ostream& out, const std::vector<MetricSeries>& per_group) {
  out << "group,t,O,Or,Orabs,mean_radius,radius_std,max_extent,min_dist\n";
  char buf[32];
  auto put = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, res.ptr - buf);
  };
  for (std::size_t g = 0; g < per_group.size(); ++g) {
    const auto& s = per_group[g];
    for (std::size_t k = 0; k < s.size(); ++k) {
      out << g;
      for (double v : {s.times[k], s.polarization[k], s.angular_momentum[k],
                       s.abs_angular_momentum[k], s.mean_radius[k], s.radius_std[k],
                       s.max_extent[k], s.min_pair_distance[k]}) {
        out << ',';
        put(v);
      }
      out << '\n';
    }
  }
}

ScenarioRun run_scenario(const ScenarioConfig& config, const TransitionSchedule& schedule) {
  config.validate();
  const auto setup = config.trial_setup();
  ScenarioRun run;
  if (schedule.segments.size() == 1 && schedule.noise_windows.empty()) {
    run.trajectory = simulate_swarm(schedule.segments.front().assignment, setup, config.seed);
  } else {
    run.trajectory = simulate_swarm(schedule.segments.front().assignment, setup, config.seed,
                                    &schedule);
  }
  run.series = compute_series(run.trajectory, config.domain);
  if (config.groups.size() > 1) {
    for (std::size_t g = 0; g < config.groups.size(); ++g) {
      run.group_series.push_back(group_series(run.trajectory, static_cast<int>(g), config.domain));
    }
  }
  return run;
}

}  // namespace swarmlaw
