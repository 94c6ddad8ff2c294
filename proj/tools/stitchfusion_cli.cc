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

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "stitchfusion/checkpoint.h"
#include "stitchfusion/config.h"
#include "stitchfusion/param_count.h"
#include "stitchfusion/train.h"
#include "stitchfusion/verify.h"

namespace sf = stitchfusion;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

// Raised for missing or unreadable paths the user pointed at.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw sf::ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

sf::Dataset open_dataset(const std::string& path, const char* field) {
  if (path.empty()) throw sf::ConfigError(std::string(field) + ": a dataset directory is required");
  if (!fs::exists(path)) throw IoError(std::string(field) + ": no such directory " + path);
  return sf::load_dataset(path);
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// --- train / eval flags -----------------------------------------------------

// Flags whose presence overrides the config file.
struct TrainFlags {
  std::string config;
  std::optional<std::string> preset, modalities, density, stages, data, eval_data, out;
  std::optional<std::size_t> rank, decoder_dim, epochs, batch_size;
  std::optional<double> adapter_dropout, drop_path, lr, warmup, decay, weight_decay;
  std::optional<std::uint64_t> seed;
  bool ffm = false, no_ffm = false, no_stitch = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config, "JSON run config; flags override its values")->check(CLI::ExistingFile);
  cmd->add_option("--data", f.data, "training dataset directory");
  cmd->add_option("--eval-data", f.eval_data, "evaluation dataset directory (per-epoch mIoU)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--preset", f.preset, "backbone preset: tiny | b2-like");
  cmd->add_option("--modalities", f.modalities, "comma-separated modality names (default: all in the dataset)");
  cmd->add_option("--density", f.density, "adapter density: shared | pair-bi | two-uni");
  cmd->add_option("--stages", f.stages, "1-based active stages, e.g. 1,2,3,4");
  cmd->add_option("--r", f.rank, "adapter bottleneck width");
  cmd->add_flag("--ffm", f.ffm, "enable the post-encoder feature fusion module");
  cmd->add_flag("--no-ffm", f.no_ffm, "disable the feature fusion module");
  cmd->add_flag("--no-stitch", f.no_stitch, "disable cross-modal adapters");
  cmd->add_option("--adapter-dropout", f.adapter_dropout, "dropout inside adapters");
  cmd->add_option("--drop-path", f.drop_path, "encoder stochastic depth rate");
  cmd->add_option("--decoder-dim", f.decoder_dim, "decoder embedding width");
  cmd->add_option("--lr", f.lr, "base learning rate");
  cmd->add_option("--warmup", f.warmup, "warmup epochs");
  cmd->add_option("--decay", f.decay, "final learning-rate factor");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "samples per step");
  cmd->add_option("--weight-decay", f.weight_decay, "AdamW weight decay");
  cmd->add_option("--seed", f.seed, "seed for model init, shuffling and stochastic layers");
}

sf::RunConfig resolve(const TrainFlags& f) {
  sf::RunConfig c = f.config.empty() ? sf::RunConfig{} : sf::RunConfig::from_json(read_json_file(f.config));
  if (f.preset) c.preset = *f.preset;
  if (f.modalities) c.modalities = split_names(*f.modalities);
  if (f.density) c.density = *f.density;
  if (f.stages) c.stages = sf::parse_stage_list(*f.stages);
  if (f.rank) c.rank = *f.rank;
  if (f.ffm && f.no_ffm) throw sf::ConfigError("ffm: --ffm and --no-ffm are exclusive");
  if (f.ffm) c.ffm = true;
  if (f.no_ffm) c.ffm = false;
  if (f.no_stitch) c.stitched = false;
  if (f.adapter_dropout) c.adapter_dropout = *f.adapter_dropout;
  if (f.drop_path) c.drop_path = *f.drop_path;
  if (f.decoder_dim) c.decoder_dim = *f.decoder_dim;
  if (f.lr) c.train.base_lr = *f.lr;
  if (f.warmup) c.train.warmup_epochs = *f.warmup;
  if (f.decay) c.train.decay_factor = *f.decay;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.batch_size) c.train.batch_size = *f.batch_size;
  if (f.weight_decay) c.train.weight_decay = *f.weight_decay;
  if (f.seed) c.train.seed = *f.seed;
  if (f.data) c.data = *f.data;
  if (f.eval_data) c.eval_data = *f.eval_data;
  if (f.out) c.out = *f.out;
  c.validate();
  return c;
}

int cmd_train(const TrainFlags& flags) {
  const sf::RunConfig cfg = resolve(flags);
  if (cfg.out.empty()) throw sf::ConfigError("out: an output directory is required");
  const sf::Dataset train = open_dataset(cfg.data, "data");
  if (train.size() == 0) throw sf::ConfigError("data: training dataset has no samples");
  std::optional<sf::Dataset> eval;
  if (!cfg.eval_data.empty()) eval = open_dataset(cfg.eval_data, "eval_data");
  const sf::ModelConfig model_cfg = cfg.model_config(train);
  if (eval && eval->num_classes != train.num_classes)
    throw sf::ConfigError("eval_data: class count differs from the training set");

  const fs::path out(cfg.out);
  ensure_dir(out);
  json resolved = cfg.to_json();
  resolved["model"] = sf::model_config_to_json(model_cfg);
  write_text(out / "resolved_config.json", resolved.dump(2) + "\n");

  auto model = sf::build_model(model_cfg, cfg.train.seed);
  std::ostringstream log;
  log << "epoch,mean_loss,lr,eval_miou\n";
  auto on_epoch = [&](const sf::EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6g,%s\n", r.epoch, r.mean_loss, r.lr_end,
                  r.eval_miou ? std::to_string(*r.eval_miou).c_str() : "");
    log << line;
    std::printf("epoch %zu  loss %.4f  lr %.3g", r.epoch, r.mean_loss, r.lr_end);
    if (r.eval_miou) std::printf("  eval mIoU %.2f", *r.eval_miou);
    std::printf("\n");
    std::fflush(stdout);
  };
  const auto result = sf::fit(model, train, cfg.train, eval ? &*eval : nullptr, on_epoch);
  write_text(out / "train_log.csv", log.str());
  sf::save_checkpoint(model, out / "checkpoint");
  if (eval) {
    const auto metrics = sf::evaluate(model, *eval);
    write_text(out / "metrics.json", metrics.to_json() + "\n");
    write_text(out / "per_class.csv", metrics.per_class_csv());
  }
  std::printf("trained %zu steps; checkpoint in %s\n", result.steps, (out / "checkpoint").c_str());
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint, data, out;
};

int cmd_eval(const EvalFlags& f) {
  if (!fs::exists(fs::path(f.checkpoint) / "checkpoint.json"))
    throw IoError("checkpoint: no checkpoint.json under " + f.checkpoint);
  const auto model = sf::load_checkpoint(f.checkpoint);
  const sf::Dataset data = open_dataset(f.data, "data");
  if (data.size() == 0) throw sf::ConfigError("data: evaluation dataset has no samples");
  const auto metrics = sf::evaluate(model, data);
  std::printf("mIoU %.2f  pixel accuracy %.2f  (%zu samples)\n", metrics.miou, metrics.pixel_accuracy, data.size());
  if (!f.out.empty()) {
    const fs::path out(f.out);
    ensure_dir(out);
    json resolved{{"checkpoint", f.checkpoint}, {"data", f.data}, {"model", sf::model_config_to_json(model.config)},
                  {"seed", model.seed}};
    write_text(out / "resolved_config.json", resolved.dump(2) + "\n");
    write_text(out / "metrics.json", metrics.to_json() + "\n");
    write_text(out / "per_class.csv", metrics.per_class_csv());
  } else {
    std::cout << metrics.per_class_csv();
  }
  return kExitOk;
}

// --- synth-data -------------------------------------------------------------

struct SynthFlags {
  std::string out;
  std::string names;
  sf::SynthOptions options;
};

int cmd_synth(SynthFlags f) {
  if (f.out.empty()) throw sf::ConfigError("out: an output directory is required");
  if (!f.names.empty()) f.options.modality_names = split_names(f.names);
  sf::Dataset ds;
  try {
    ds = sf::generate_synthetic(f.options);
  } catch (const std::invalid_argument& e) {
    throw sf::ConfigError(e.what());
  }
  ensure_dir(f.out);
  sf::save_dataset(ds, f.out);
  std::printf("wrote %zu %s samples (%zu modalities, %zu classes, %zux%zu) to %s\n", ds.size(), ds.split.c_str(),
              ds.modalities.size(), ds.num_classes, ds.height, ds.width, f.out.c_str());
  for (std::size_t c = 1; c < ds.num_classes; ++c) {
    std::printf("  class %zu visible in:", c);
    for (std::size_t m = 0; m < ds.modalities.size(); ++m)
      if (ds.visibility[c][m]) std::printf(" %s", ds.modalities[m].name.c_str());
    std::printf("\n");
  }
  return kExitOk;
}

// --- param-count ------------------------------------------------------------

struct CountFlags {
  std::string preset = "b2-like";
  std::size_t modalities = 2;
  std::string density = "pair-bi";
  std::string stages = "1,2,3,4";
  std::size_t rank = sf::kDefaultAdapterRank;
  bool include_bias = false;
};

int cmd_param_count(const CountFlags& f) {
  sf::CountSpec spec;
  try {
    const auto enc = sf::EncoderConfig::from_preset(f.preset);
    spec = sf::CountSpec::from_config(enc, f.modalities, sf::parse_density(f.density), sf::parse_stage_list(f.stages),
                                      f.rank, true);
    spec.validate();
  } catch (const sf::ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw sf::ConfigError(e.what());
  }
  const auto row = sf::compare_counts("adapters", spec);
  const std::uint64_t selected = f.include_bias ? row.analytic_with_bias : row.analytic_without_bias;
  std::printf("preset %s, %zu modalities, density %s, stages %s, r=%zu\n", f.preset.c_str(), f.modalities,
              sf::density_name(spec.density).c_str(), sf::format_stage_list(spec.active_stages).c_str(), f.rank);
  std::printf("%-18s %12s %12s\n", "convention", "analytic", "empirical");
  std::printf("%-18s %12llu %12llu\n", "with biases", static_cast<unsigned long long>(row.analytic_with_bias),
              static_cast<unsigned long long>(row.empirical));
  std::printf("%-18s %12llu %12s\n", "weights only", static_cast<unsigned long long>(row.analytic_without_bias), "-");
  std::printf("%llu (+%sM)\n", static_cast<unsigned long long>(selected), sf::format_millions(selected).c_str());
  if (!row.agrees()) {
    std::fprintf(stderr, "analytic and empirical counts disagree\n");
    return kExitVerify;
  }
  return kExitOk;
}

// --- verification suites ----------------------------------------------------

struct GradFlags {
  std::size_t seeds = 10;
  std::uint64_t first_seed = 0;
  double tolerance = sf::kGradTolerance;
  std::size_t e2e_coords = 3;
  bool skip_e2e = false;
};

int cmd_grad_check(const GradFlags& f) {
  sf::GradSuiteOptions o;
  o.seeds.clear();
  for (std::size_t i = 0; i < f.seeds; ++i) o.seeds.push_back(f.first_seed + i);
  o.tolerance = f.tolerance;
  o.end_to_end_coords = f.e2e_coords;
  o.include_end_to_end = !f.skip_e2e;
  const auto result = sf::run_grad_suite(o, [&](const sf::GradCase& c) {
    if (!(c.report.max_rel_error < f.tolerance))
      std::printf("FAIL %s seed %llu: %.3e\n", c.name.c_str(), static_cast<unsigned long long>(c.seed),
                  c.report.max_rel_error);
  });
  for (const auto& line : result.summary_lines()) std::printf("%s\n", line.c_str());
  std::printf("%s: %zu checks, max relative error %.3e (tolerance %.0e)\n", result.passed() ? "PASS" : "FAIL",
              result.cases.size(), result.max_error(), f.tolerance);
  return result.passed() ? kExitOk : kExitVerify;
}

int cmd_equiv_check(std::uint64_t seed, std::size_t inputs) {
  const auto report = sf::equivalence_check(seed, inputs);
  std::printf("%s\n", report.summary().c_str());
  std::printf("%s\n", report.passed() ? "PASS" : "FAIL");
  return report.passed() ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal adapter-stitched segmentation: data, training, evaluation and verification"};
  app.require_subcommand(1);

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "generate a synthetic multimodal segmentation dataset");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--samples", synth.options.samples, "number of samples")->capture_default_str();
  synth_cmd->add_option("--height", synth.options.height, "image height")->capture_default_str();
  synth_cmd->add_option("--width", synth.options.width, "image width")->capture_default_str();
  synth_cmd->add_option("--classes", synth.options.num_classes, "classes including background")->capture_default_str();
  synth_cmd->add_option("--modalities", synth.options.modalities, "number of modalities")->capture_default_str();
  synth_cmd->add_option("--channels", synth.options.channels, "channels per modality")->capture_default_str();
  synth_cmd->add_option("--names", synth.names, "comma-separated modality names");
  synth_cmd->add_option("--split", synth.options.split, "split tag (train, eval, ...)")->capture_default_str();
  synth_cmd->add_option("--seed", synth.options.seed, "generator seed")->capture_default_str();

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "train adapters, fusion module and decoder on frozen encoders");
  add_train_flags(train_cmd, train);

  EvalFlags eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--data", eval.data, "dataset directory")->required();
  eval_cmd->add_option("--out", eval.out, "directory for metrics.json and per_class.csv");

  CountFlags count;
  auto* count_cmd = app.add_subcommand("param-count", "analytic vs enumerated adapter parameter counts");
  count_cmd->add_option("--preset", count.preset, "backbone preset: tiny | b2-like")->capture_default_str();
  count_cmd->add_option("--modalities", count.modalities, "number of modalities")->capture_default_str();
  count_cmd->add_option("--density", count.density, "shared | pair-bi | two-uni")->capture_default_str();
  count_cmd->add_option("--stages", count.stages, "1-based active stages")->capture_default_str();
  count_cmd->add_option("--r", count.rank, "adapter bottleneck width")->capture_default_str();
  count_cmd->add_flag("--include-bias", count.include_bias, "report the count including biases");

  GradFlags grad;
  auto* grad_cmd = app.add_subcommand("grad-check", "finite-difference gradient suite");
  grad_cmd->add_option("--seeds", grad.seeds, "number of seeds")->capture_default_str();
  grad_cmd->add_option("--seed", grad.first_seed, "first seed")->capture_default_str();
  grad_cmd->add_option("--tolerance", grad.tolerance, "maximum relative error")->capture_default_str();
  grad_cmd->add_option("--e2e-coords", grad.e2e_coords, "probed coordinates per tensor in the end-to-end case")
      ->capture_default_str();
  grad_cmd->add_flag("--skip-e2e", grad.skip_e2e, "skip the end-to-end model case");

  std::uint64_t equiv_seed = 0;
  std::size_t equiv_inputs = 10;
  auto* equiv_cmd = app.add_subcommand("equiv-check", "two-modality shared vs pairwise adapter equivalence");
  equiv_cmd->add_option("--seed", equiv_seed, "seed")->capture_default_str();
  equiv_cmd->add_option("--inputs", equiv_inputs, "random inputs per comparison")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*count_cmd) return cmd_param_count(count);
    if (*grad_cmd) return cmd_grad_check(grad);
    if (*equiv_cmd) return cmd_equiv_check(equiv_seed, equiv_inputs);
  } catch (const sf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const sf::FormatError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const sf::TrainingError& e) {
    std::fprintf(stderr, "training failed: %s\n", e.what());
    return kExitVerify;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
