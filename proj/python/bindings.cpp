#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "difflab/datasets.hpp"
#include "difflab/errors.hpp"
#include "difflab/inference.hpp"
#include "difflab/profiler.hpp"
#include "difflab/trainer.hpp"

namespace py = pybind11;
using namespace difflab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw ContractError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Tensor({r, c}, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

TrainConfig config_from_str(const std::string& s) { return TrainConfig::from_json(nlohmann::json::parse(s)); }

py::dict profile_dict(const LossProfile& p) {
  py::dict d;
  d["pred_type"] = std::string(name(p.pred_type));
  d["space"] = std::string(name(p.space));
  d["mean"] = p.mean;
  d["stderr"] = p.std_err;
  d["count"] = p.count;
  return d;
}

py::list slots_list(const SlotPartition& p) {
  py::list out;
  for (const Slot& s : p.bounds) out.append(py::make_tuple(s.lo, s.hi));
  return out;
}

// Loaded checkpoint with what inference needs.
struct Loaded {
  TrainConfig cfg;
  DenoiserModel model;
  Schedule schedule;
  HeadChoice head;
};

Loaded load(const std::filesystem::path& p) {
  const Checkpoint ck = read_checkpoint(p);
  Loaded l{config_from_checkpoint(ck), model_from_checkpoint(ck), schedule_from_checkpoint(ck), PredictionType::A};
  l.head = l.cfg.mixed ? HeadChoice{head_table_from_counts(selection_counts_from_checkpoint(ck))}
                       : HeadChoice{l.cfg.pred_type};
  return l;
}

}  // namespace

PYBIND11_MODULE(_difflab, m) {
  m.doc() = "Per-timestep loss experiments on toy diffusion models";

  static py::exception<Error> base(m, "DifflabError");
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<NumericError> numeric_error(m, "NumericError", base.ptr());
  static py::exception<IoError> io_error(m, "IoError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const NumericError& e) {
      numeric_error(e.what());
    } catch (const IoError& e) {
      io_error(e.what());
    } catch (const Error& e) {
      base(e.what());
    }
  });

  py::class_<Schedule>(m, "Schedule")
      .def_static("linear", &Schedule::linear, py::arg("T") = 1000, py::arg("beta_start") = 1e-4,
                  py::arg("beta_end") = 0.02)
      .def_static("cosine", &Schedule::cosine, py::arg("T") = 1000, py::arg("s") = 0.008)
      .def_property_readonly("T", &Schedule::T)
      .def_property_readonly("kind", [](const Schedule& s) { return std::string(s.kind()); })
      .def("beta", &Schedule::beta)
      .def("alpha_bar", &Schedule::alpha_bar)
      .def("sigma2", &Schedule::sigma2)
      .def("posterior_coefficients", [](const Schedule& s, int t) {
        const PosteriorCoeffs c = s.posterior_coefficients(t);
        return py::make_tuple(c.coef_x0, c.coef_xt);
      });

  m.def(
      "make_target",
      [](const std::string& pt, const Schedule& s, std::vector<int> ts, const Array& x0, const Array& eps) {
        return to_array(make_target(parse_prediction_type(pt), s, ts, to_tensor(x0), to_tensor(eps)));
      },
      py::arg("pred_type"), py::arg("schedule"), py::arg("ts"), py::arg("x0"), py::arg("eps"));
  m.def(
      "recover_x0",
      [](const std::string& pt, const Schedule& s, std::vector<int> ts, const Array& xt, const Array& y) {
        return to_array(recover_x0(parse_prediction_type(pt), s, ts, to_tensor(xt), to_tensor(y)));
      },
      py::arg("pred_type"), py::arg("schedule"), py::arg("ts"), py::arg("xt"), py::arg("y"));
  m.def(
      "mixed_select",
      [](double d, double v, double a) {
        const std::array<double, 3> l{d, v, a};
        return std::string(name(mixed_select(l)));
      },
      py::arg("loss_d"), py::arg("loss_v"), py::arg("loss_a"));

  m.def(
      "generate_dataset",
      [](const std::string& kind, std::size_t n, double noise_std, std::uint64_t seed) {
        return to_array(generate(DatasetSpec{parse_dataset_kind(kind), n, noise_std, seed}));
      },
      py::arg("kind") = "eight_gaussians", py::arg("n") = 100000, py::arg("noise_std") = DatasetSpec{}.noise_std,
      py::arg("seed") = 0);

  m.def(
      "compute_slots", [](const std::vector<double>& means, std::size_t n) { return slots_list(compute_slots(means, n)); },
      py::arg("means"), py::arg("n_slots"));
  m.def(
      "read_profile", [](const std::filesystem::path& p) { return profile_dict(LossProfile::read_csv(p)); },
      py::arg("path"));

  m.def(
      "default_config", [] { return TrainConfig{}.to_json().dump(); }, "Default training config as JSON");

  py::class_<StepReport>(m, "StepReport")
      .def_readonly("step", &StepReport::step)
      .def_readonly("ts", &StepReport::ts)
      .def_readonly("loss", &StepReport::loss)
      .def_readonly("grad_norm", &StepReport::grad_norm)
      .def_property_readonly("selected", [](const StepReport& r) {
        std::vector<std::string> s;
        for (PredictionType p : r.selected) s.emplace_back(name(p));
        return s;
      });

  py::class_<Trainer>(m, "Trainer")
      .def(py::init([](const std::string& config_json) { return Trainer(config_from_str(config_json)); }),
           py::arg("config_json"))
      .def("step", &Trainer::step)
      .def_property_readonly("step_count", &Trainer::step_count)
      .def("config_json", [](const Trainer& t) { return t.config().to_json().dump(); })
      .def("data", [](const Trainer& t) { return to_array(t.data()); })
      .def(
          "profile",
          [](const Trainer& t, const std::string& space, std::size_t n_per_t, std::uint64_t seed) {
            ProfileOptions o;
            o.pred_type = t.config().mixed ? PredictionType::A : t.config().pred_type;
            o.space = parse_error_space(space);
            o.n_per_t = n_per_t;
            return profile_dict(profile(t.model(), t.data(), t.schedule(), o, Rng(seed).stream("profile")));
          },
          py::arg("space") = "target", py::arg("n_per_t") = 256, py::arg("seed") = 0)
      .def("save", [](const Trainer& t, const std::filesystem::path& p) { write_checkpoint(p, t.checkpoint()); });

  m.def(
      "run_training",
      [](const std::string& config_json, const std::filesystem::path& outdir) {
        Trainer t(config_from_str(config_json));
        const TrainArtifacts a = run_training(t, outdir);
        py::dict d;
        d["metrics_csv"] = a.metrics_csv;
        d["final_checkpoint"] = a.final_checkpoint;
        d["checkpoints"] = a.checkpoints;
        d["profiles"] = a.profiles;
        return d;
      },
      py::arg("config_json"), py::arg("outdir"));

  m.def(
      "sample",
      [](const std::filesystem::path& ckpt, std::size_t n, std::uint64_t seed) {
        const Loaded l = load(ckpt);
        return to_array(generate(l.model, l.schedule, l.head, n, seed));
      },
      py::arg("checkpoint"), py::arg("n"), py::arg("seed") = 0);

  m.def(
      "ablate",
      [](const std::filesystem::path& ckpt, const std::vector<std::optional<std::pair<int, int>>>& ranges,
         std::size_t trials, std::uint64_t seed) {
        const Loaded l = load(ckpt);
        const auto rows = ablate_reconstruction(l.model, l.schedule, l.head, generate(l.cfg.dataset), ranges, trials, seed);
        py::list out;
        for (const AblationRow& r : rows) {
          py::dict d;
          d["range"] = r.range;
          d["mean_mse"] = r.mean_mse;
          d["stderr"] = r.std_err;
          d["per_trial"] = r.per_trial;
          out.append(d);
        }
        return out;
      },
      py::arg("checkpoint"), py::arg("ranges"), py::arg("trials") = 20, py::arg("seed") = 0);

  m.def(
      "energy_distance", [](const Array& a, const Array& b) { return energy_distance(to_tensor(a), to_tensor(b)); },
      py::arg("a"), py::arg("b"));
}
