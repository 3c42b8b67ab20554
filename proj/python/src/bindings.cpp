#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include <torch/torch.h>

#include "sthyper/checkpoint.hpp"
#include "sthyper/config.hpp"
#include "sthyper/dataset.hpp"
#include "sthyper/dtw.hpp"
#include "sthyper/errors.hpp"
#include "sthyper/export.hpp"
#include "sthyper/metrics.hpp"
#include "sthyper/synthetic.hpp"
#include "sthyper/trainer.hpp"

namespace py = pybind11;
using namespace sthyper;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

torch::Tensor to_tensor(const Array& a) {
  std::vector<std::int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

Array to_array(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat64).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  Array out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<double>(), static_cast<std::size_t>(c.numel()) * sizeof(double));
  return out;
}

data::TimeSeriesDataset dataset_from(const Array& values) {
  if (values.ndim() != 2) throw ShapeError("values must be a 2-D array (variables x time)");
  data::TimeSeriesDataset ds;
  ds.values = to_tensor(values);
  for (std::int64_t t = 0; t < ds.length(); ++t) ds.timestamps.push_back(t);
  for (std::int64_t i = 0; i < ds.num_vars(); ++i) ds.variable_names.push_back("v" + std::to_string(i));
  return ds;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

ModelConfig config_from(const std::string& text) {
  try {
    return config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_sthyper, m) {
  m.doc() = "Multi-scale spatio-temporal hypergraph forecaster (C++ core)";

  py::register_exception<Error>(m, "Error");

  m.def("set_num_threads", [](int n) { torch::set_num_threads(n); });

  m.def(
      "dtw_distance",
      [](const std::vector<double>& a, const std::vector<double>& b) { return data::dtw_distance(a, b); },
      py::arg("a"), py::arg("b"));

  m.def(
      "dtw_affinity",
      [](const Array& series) {
        const auto r = data::compute_dtw_adjacency(to_tensor(series));
        return py::make_tuple(to_array(r.matrix), r.sigma);
      },
      py::arg("series"), "Returns (affinity N x N, sigma).");

  m.def(
      "generate_synthetic",
      [](std::int64_t n_groups, std::int64_t vars_per_group, std::int64_t length, double noise, std::uint64_t seed) {
        const auto ds = data::generate_synthetic({n_groups, vars_per_group, length, noise, seed});
        py::dict out;
        out["values"] = to_array(ds.values);
        out["group_labels"] = ds.group_labels;
        out["variable_names"] = ds.variable_names;
        return out;
      },
      py::arg("n_groups") = 3, py::arg("vars_per_group") = 4, py::arg("length") = 512, py::arg("noise") = 0.1,
      py::arg("seed") = 0);

  m.def(
      "default_config", [] { return to_json(ModelConfig{}).dump(); }, "Default configuration as a JSON string.");

  m.def(
      "validate_config",
      [](const std::string& config, std::int64_t n_vars) { return config_from(config).validate(n_vars); },
      py::arg("config"), py::arg("n_vars"), "Throws on invalid configs, returns warnings.");

  m.def(
      "compute_metrics",
      [](const Array& prediction, const Array& target) {
        return json_to_py(to_json(compute_metrics(to_tensor(prediction), to_tensor(target))));
      },
      py::arg("prediction"), py::arg("target"));

  m.def(
      "train",
      [](const std::string& config, const Array& values, const std::string& checkpoint_dir, std::int64_t max_steps) {
        const auto cfg = config_from(config);
        const auto ds = dataset_from(values);
        TrainHooks hooks;
        hooks.max_steps = max_steps;
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(cfg, ds, hooks);
          save_checkpoint(result.best, checkpoint_dir);
        }
        py::list history;
        for (const auto& r : result.history) {
          py::dict d;
          d["epoch"] = r.epoch;
          d["train_loss"] = r.train_loss;
          d["val_loss"] = r.val_loss;
          history.append(d);
        }
        py::dict out;
        out["history"] = history;
        out["best_epoch"] = result.best_epoch;
        out["steps"] = result.steps;
        out["stopped_early"] = result.stopped_early;
        return out;
      },
      py::arg("config"), py::arg("values"), py::arg("checkpoint_dir"), py::arg("max_steps") = -1,
      "Trains on values (variables x time) and saves the best checkpoint.");

  m.def(
      "evaluate",
      [](const std::string& checkpoint_dir, const Array& values, const std::string& split) {
        const auto ck = load_checkpoint(checkpoint_dir);
        return json_to_py(to_json(evaluate(ck, dataset_from(values), parse_split(split))));
      },
      py::arg("checkpoint_dir"), py::arg("values"), py::arg("split") = "test");

  m.def(
      "predict",
      [](const std::string& checkpoint_dir, const Array& window) {
        return to_array(predict(load_checkpoint(checkpoint_dir), to_tensor(window)).prediction);
      },
      py::arg("checkpoint_dir"), py::arg("window"), "Forecast (variables x horizon) for one raw input window.");

  m.def(
      "export_structures",
      [](const std::string& checkpoint_dir, const std::string& out_dir) {
        return export_structures(load_checkpoint(checkpoint_dir), out_dir);
      },
      py::arg("checkpoint_dir"), py::arg("out_dir"));
}
