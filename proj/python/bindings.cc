// Copyright 2026 The StitchFusion C++ Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "json.hpp"
#include "stitchfusion/checkpoint.h"
#include "stitchfusion/config.h"
#include "stitchfusion/param_count.h"
#include "stitchfusion/train.h"
#include "stitchfusion/verify.h"

namespace py = pybind11;
namespace sf = stitchfusion;
using nlohmann::json;

namespace {

py::dict metrics_dict(const sf::SegMetrics& m) {
  py::dict d;
  d["miou"] = m.miou;
  d["pixel_accuracy"] = m.pixel_accuracy;
  py::list per_class;
  for (const auto& v : m.class_iou) {
    if (v) {
      per_class.append(100.0 * *v);
    } else {
      per_class.append(py::none());
    }
  }
  d["class_iou"] = per_class;
  return d;
}

sf::CountSpec count_spec(const std::string& preset, std::size_t modalities, const std::string& density,
                         const std::string& stages, std::size_t rank, bool include_bias) {
  auto spec = sf::CountSpec::from_config(sf::EncoderConfig::from_preset(preset), modalities, sf::parse_density(density),
                                         sf::parse_stage_list(stages), rank, include_bias);
  spec.validate();
  return spec;
}

// Trains per a JSON run config (same keys as the CLI config file). Writes a
// checkpoint when the config names an output directory.
py::dict train(const std::string& config_json) {
  const auto cfg = sf::RunConfig::from_json(json::parse(config_json));
  cfg.validate();
  const auto data = sf::load_dataset(cfg.data);
  if (data.size() == 0) throw sf::ConfigError("data: training dataset has no samples");
  std::optional<sf::Dataset> eval;
  if (!cfg.eval_data.empty()) eval = sf::load_dataset(cfg.eval_data);
  const auto model = sf::build_model(cfg.model_config(data), cfg.train.seed);
  sf::TrainResult result;
  {
    py::gil_scoped_release release;
    result = sf::fit(model, data, cfg.train, eval ? &*eval : nullptr);
  }
  py::list history;
  for (const auto& r : result.history) {
    py::dict e;
    e["epoch"] = r.epoch;
    e["mean_loss"] = r.mean_loss;
    e["lr"] = r.lr_end;
    e["eval_miou"] = r.eval_miou ? py::cast(*r.eval_miou) : py::none();
    history.append(e);
  }
  py::dict out;
  out["steps"] = result.steps;
  out["history"] = history;
  if (eval) out["metrics"] = metrics_dict(sf::evaluate(model, *eval));
  if (!cfg.out.empty()) sf::save_checkpoint(model, std::filesystem::path(cfg.out) / "checkpoint");
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Frozen-encoder multimodal segmentation with cross-modal adapters";

  py::register_exception<sf::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<sf::FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<sf::TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def(
      "param_count",
      [](const std::string& preset, std::size_t modalities, const std::string& density, const std::string& stages,
         std::size_t rank, bool include_bias) {
        return sf::analytic_count(count_spec(preset, modalities, density, stages, rank, include_bias));
      },
      py::arg("preset") = "b2-like", py::arg("modalities") = 2, py::arg("density") = "pair-bi",
      py::arg("stages") = "1,2,3,4", py::arg("rank") = 8, py::arg("include_bias") = true,
      "Analytic adapter parameter count.");
  m.def(
      "empirical_param_count",
      [](const std::string& preset, std::size_t modalities, const std::string& density, const std::string& stages,
         std::size_t rank) {
        return sf::compare_counts("python", count_spec(preset, modalities, density, stages, rank, true)).empirical;
      },
      py::arg("preset") = "b2-like", py::arg("modalities") = 2, py::arg("density") = "pair-bi",
      py::arg("stages") = "1,2,3,4", py::arg("rank") = 8, "Parameter count enumerated from a built adapter bank.");

  m.def(
      "synth_data",
      [](const std::filesystem::path& out, std::size_t samples, std::uint64_t seed, std::size_t classes,
         std::size_t modalities, std::size_t height, std::size_t width, const std::string& split) {
        sf::SynthOptions o;
        o.samples = samples;
        o.seed = seed;
        o.num_classes = classes;
        o.modalities = modalities;
        o.height = height;
        o.width = width;
        o.split = split;
        const auto ds = sf::generate_synthetic(o);
        sf::save_dataset(ds, out);
        return ds.visibility;
      },
      py::arg("out"), py::arg("samples"), py::arg("seed") = 0, py::arg("classes") = 5, py::arg("modalities") = 2,
      py::arg("height") = 32, py::arg("width") = 32, py::arg("split") = "train",
      "Write a synthetic dataset; returns the class x modality visibility table.");

  m.def("train", &train, py::arg("config_json"), "Train from a JSON run config; returns history and metrics.");
  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& data) {
        const auto model = sf::load_checkpoint(checkpoint);
        const auto ds = sf::load_dataset(data);
        py::gil_scoped_release release;
        auto metrics = sf::evaluate(model, ds);
        py::gil_scoped_acquire acquire;
        return metrics_dict(metrics);
      },
      py::arg("checkpoint"), py::arg("data"));
  m.def(
      "evaluate_labels",
      [](const std::vector<std::vector<std::uint16_t>>& predictions,
         const std::vector<std::vector<std::uint16_t>>& ground_truth, std::size_t num_classes) {
        return metrics_dict(sf::evaluate_labels(predictions, ground_truth, num_classes));
      },
      py::arg("predictions"), py::arg("ground_truth"), py::arg("num_classes"),
      "mIoU over flat label maps; 255 marks ignored ground-truth pixels.");

  m.def(
      "equivalence_check",
      [](std::uint64_t seed, std::size_t inputs) {
        const auto r = sf::equivalence_check(seed, inputs);
        py::dict d;
        d["passed"] = r.passed();
        d["summary"] = r.summary();
        return d;
      },
      py::arg("seed") = 0, py::arg("inputs") = 10);
  m.def(
      "transparency_check",
      [](std::uint64_t seed, std::size_t modalities) {
        const auto r = sf::transparency_check(seed, modalities);
        py::dict d;
        d["passed"] = r.passed();
        d["configurations"] = r.configurations;
        d["matching"] = r.matching;
        return d;
      },
      py::arg("seed") = 0, py::arg("modalities") = 2);
  m.def("grad_case_names", &sf::grad_case_names, py::arg("include_end_to_end") = true);
  m.def(
      "grad_check",
      [](const std::string& name, std::uint64_t seed) { return sf::run_grad_case(name, seed).report.max_rel_error; },
      py::arg("name"), py::arg("seed") = 0, "Max relative finite-difference error of one registered case.");
  m.attr("GRAD_TOLERANCE") = sf::kGradTolerance;
}
