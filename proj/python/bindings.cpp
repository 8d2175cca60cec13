#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "swarmlaw/dynamics.hpp"
#include "swarmlaw/errors.hpp"
#include "swarmlaw/force_model.hpp"
#include "swarmlaw/metrics.hpp"
#include "swarmlaw/scenario.hpp"
#include "swarmlaw/trainer.hpp"

namespace py = pybind11;
using namespace swarmlaw;

namespace {

// (frames, agents, 4) array of x, y, vx, vy.
py::array_t<double> frames_array(const Trajectory& traj) {
  const std::size_t f = traj.frames.size();
  const std::size_t n = f ? traj.frames.front().size() : 0;
  py::array_t<double> out({f, n, std::size_t{4}});
  auto a = out.mutable_unchecked<3>();
  for (std::size_t k = 0; k < f; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& ag = traj.frames[k].agents[i];
      a(k, i, 0) = ag.position.x;
      a(k, i, 1) = ag.position.y;
      a(k, i, 2) = ag.velocity.x;
      a(k, i, 3) = ag.velocity.y;
    }
  }
  return out;
}

py::dict trajectory_dict(const Trajectory& traj) {
  std::vector<double> times;
  for (const auto& s : traj.frames) times.push_back(s.time);
  py::dict d;
  d["t"] = times;
  d["states"] = frames_array(traj);
  d["groups"] = traj.groups;
  return d;
}

SwarmState state_from(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
  if (arr.ndim() != 2 || arr.shape(1) != 4) throw ConfigError("state array must have shape (N, 4)");
  auto a = arr.unchecked<2>();
  SwarmState s;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    s.agents.push_back({{a(i, 0), a(i, 1)}, {a(i, 2), a(i, 3)}});
  }
  return s;
}

py::dict series_dict(const MetricSeries& m) {
  py::dict d;
  d["t"] = m.times;
  d["O"] = m.polarization;
  d["Or"] = m.angular_momentum;
  d["Orabs"] = m.abs_angular_momentum;
  d["mean_radius"] = m.mean_radius;
  d["radius_std"] = m.radius_std;
  d["max_extent"] = m.max_extent;
  d["min_dist"] = m.min_pair_distance;
  return d;
}

PatternSpec make_pattern(const std::string& kind, const py::kwargs& targets) {
  PatternMeta meta;
  meta.kind = kind;
  for (const auto& [k, v] : targets) meta.targets[py::cast<std::string>(k)] = py::cast<double>(v);
  auto spec = PatternSpec::from_meta(meta);
  spec.validate();
  return spec;
}

TrialSetup setup_for(const PatternSpec& spec, std::size_t n_agents, std::optional<double> duration,
                     std::optional<double> noise) {
  auto setup = default_trial_setup(spec, n_agents);
  if (duration) setup.duration = *duration;
  if (noise) setup.noise = NoiseSpec::gaussian(*noise);
  return setup;
}

}  // namespace

PYBIND11_MODULE(_swarmlaw, m) {
  m.doc() = "Swarm interaction-law training and simulation";

  auto base = py::register_exception<Error>(m, "SwarmlawError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<VersionError>(m, "VersionError", base.ptr());
  py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());
  py::register_exception<CoincidentAgentError>(m, "CoincidentAgentError", base.ptr());
  py::register_exception<MetricError>(m, "MetricError", base.ptr());
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  py::class_<PatternSpec>(m, "Pattern")
      .def(py::init(&make_pattern), py::arg("kind"))
      .def_property_readonly("kind", [](const PatternSpec& s) { return std::string(to_string(s.kind)); })
      .def_property_readonly("targets", [](const PatternSpec& s) { return s.meta().targets; })
      .def("__repr__", [](const PatternSpec& s) {
        std::ostringstream o;
        o << "Pattern('" << to_string(s.kind) << "'";
        for (const auto& [k, v] : s.meta().targets) o << ", " << k << "=" << v;
        o << ")";
        return o.str();
      });

  py::class_<InteractionModel>(m, "Model")
      .def_static("load", &load_model, py::arg("path"))
      .def_static("from_json", &deserialize_model, py::arg("text"))
      .def("save", [](const InteractionModel& mdl, const std::string& p) { save_model(mdl, p); })
      .def("to_json", &serialize_model)
      .def("f", [](const InteractionModel& mdl, double r) { return mdl.distancing(r); }, py::arg("r"))
      .def("g", [](const InteractionModel& mdl, double r) { return mdl.aligning(r); }, py::arg("r"))
      .def_property_readonly("cutoff_radius", [](const InteractionModel& mdl) { return mdl.cutoff_radius; })
      .def_property_readonly("kind", [](const InteractionModel& mdl) { return mdl.meta.kind; })
      .def(py::self == py::self);

  m.def("blend_weight", &blend_weight, py::arg("t"), py::arg("t_p"));

  m.def(
      "simulate",
      [](const InteractionModel& model, std::uint64_t seed, std::size_t n_agents,
         std::optional<double> duration, std::optional<double> noise) {
        const auto spec = PatternSpec::from_meta(model.meta);
        const auto setup = setup_for(spec, n_agents, duration, noise);
        py::gil_scoped_release release;
        auto traj = simulate_swarm(GroupAssignment::homogeneous(n_agents, model), setup, seed);
        py::gil_scoped_acquire acquire;
        return trajectory_dict(traj);
      },
      py::arg("model"), py::arg("seed") = 0, py::arg("n_agents") = 40,
      py::arg("duration") = py::none(), py::arg("noise") = py::none());

  m.def(
      "metrics",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> state) {
        const auto s = state_from(state);
        const auto am = angular_momentum(s);
        const auto g = geometry(s);
        py::dict d;
        d["O"] = polarization(s);
        d["Or"] = am.signed_value;
        d["Orabs"] = am.absolute_value;
        d["mean_radius"] = g.mean_radius;
        d["radius_std"] = g.radius_std;
        d["max_extent"] = g.max_extent;
        d["min_dist"] = g.min_pair_distance;
        return d;
      },
      py::arg("state"), "Order parameters and geometry of one (N, 4) state.");

  m.def(
      "series",
      [](const InteractionModel& model, std::uint64_t seed, std::size_t n_agents,
         std::optional<double> duration) {
        const auto spec = PatternSpec::from_meta(model.meta);
        const auto setup = setup_for(spec, n_agents, duration, std::nullopt);
        const auto traj = simulate_swarm(GroupAssignment::homogeneous(n_agents, model), setup, seed);
        return series_dict(compute_series(traj, setup.domain));
      },
      py::arg("model"), py::arg("seed") = 0, py::arg("n_agents") = 40,
      py::arg("duration") = py::none());

  m.def(
      "trials",
      [](const InteractionModel& model, std::size_t n_trials, std::uint64_t seed,
         std::optional<PatternSpec> pattern, unsigned threads) {
        const auto spec = pattern ? *pattern : PatternSpec::from_meta(model.meta);
        std::string json;
        {
          py::gil_scoped_release release;
          json = trial_report_json(
              trial_harness(spec, model, n_trials, seed, default_trial_setup(spec), threads));
        }
        return py::module_::import("json").attr("loads")(json);
      },
      py::arg("model"), py::arg("n_trials") = 10, py::arg("seed") = 0,
      py::arg("pattern") = py::none(), py::arg("threads") = 0);

  m.def(
      "train",
      [](const PatternSpec& spec, std::uint64_t seed, std::optional<double> horizon,
         std::optional<std::size_t> time_points, std::optional<std::size_t> max_iter,
         std::optional<std::size_t> agents, std::optional<std::size_t> restarts) {
        auto cfg = TrainingConfig::for_pattern(spec.kind);
        cfg.seed = seed;
        if (restarts) cfg.restarts = *restarts;
        if (horizon) cfg.horizon = *horizon;
        if (time_points) cfg.n_time_points = *time_points;
        if (max_iter) cfg.lbfgs_max_iterations = *max_iter;
        if (agents) cfg.n_agents = *agents;
        TrainingResult r;
        {
          py::gil_scoped_release release;
          r = train(spec, cfg);
        }
        r.report.wall_time.reset();
        return py::make_tuple(r.model, py::module_::import("json").attr("loads")(
                                           training_report_json(r.report)));
      },
      py::arg("pattern"), py::arg("seed") = 0, py::arg("horizon") = py::none(),
      py::arg("time_points") = py::none(), py::arg("max_iter") = py::none(),
      py::arg("agents") = py::none(), py::arg("restarts") = py::none());
}
