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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <set>

#include "stitchfusion/checkpoint.h"
#include "stitchfusion/config.h"
#include "stitchfusion/param_count.h"
#include "stitchfusion/train.h"
#include "stitchfusion/verify.h"

namespace sf = stitchfusion;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<Outcome()> run;
};

void note(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome parameter_budget() {
  struct Row {
    std::size_t m;
    std::vector<std::size_t> stages;
    std::uint64_t expected;
    const char* delta;
  };
  const std::vector<Row> rows{{2, {0, 1, 2, 3}, 144000, "0.14"},
                              {3, {0, 1, 2, 3}, 432000, "0.43"},
                              {4, {2, 3}, 713664, "0.71"}};
  bool ok = true;
  for (const auto& r : rows) {
    const auto spec = sf::CountSpec::from_config(sf::EncoderConfig::b2_like(), r.m, sf::Density::kPairBidirectional,
                                                 r.stages, 8, true);
    const auto row = sf::compare_counts("m" + std::to_string(r.m), spec);
    const bool good = row.analytic_with_bias == r.expected && row.empirical == r.expected &&
                      sf::format_millions(row.analytic_with_bias) == r.delta;
    note("m=%zu stages %s: analytic %llu empirical %llu (+%sM, expected %llu / +%sM) %s", r.m,
         sf::format_stage_list(r.stages).c_str(), static_cast<unsigned long long>(row.analytic_with_bias),
         static_cast<unsigned long long>(row.empirical), sf::format_millions(row.analytic_with_bias).c_str(),
         static_cast<unsigned long long>(r.expected), r.delta, good ? "ok" : "MISMATCH");
    ok = ok && good;
  }
  return {ok, "3 configurations"};
}

Outcome equivalence() {
  bool ok = true;
  for (std::uint64_t seed : {0u, 7u}) {
    const auto report = sf::equivalence_check(seed, 10);
    note("seed %llu: %s", static_cast<unsigned long long>(seed), report.summary().c_str());
    ok = ok && report.passed();
  }
  return {ok, "10 random inputs per seed"};
}

Outcome transparency() {
  bool ok = true;
  std::size_t configs = 0;
  for (std::size_t m : {2u, 3u}) {
    const auto report = sf::transparency_check(11 + m, m);
    note("M=%zu: %zu/%zu configurations bit-identical", m, report.matching, report.configurations);
    for (const auto& f : report.failures) note("  %s", f.c_str());
    configs += report.configurations;
    ok = ok && report.passed();
  }
  return {ok, std::to_string(configs) + " density x stage-subset configurations"};
}

Outcome gradients() {
  std::map<std::string, double> worst;
  const auto result = sf::run_grad_suite({}, [&](const sf::GradCase& c) {
    auto& w = worst[c.name];
    w = std::max(w, c.report.max_rel_error);
  });
  std::set<std::uint64_t> seeds;
  for (const auto& c : result.cases) seeds.insert(c.seed);
  for (const auto& [name, err] : worst) note("%-18s max rel err %.2e%s", name.c_str(), err, err < result.tolerance ? "" : "  FAIL");
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu checks over %zu seeds, max rel err %.2e < %.0e", result.cases.size(),
                seeds.size(), result.max_error(), result.tolerance);
  return {result.passed() && seeds.size() >= 10, buf};
}

std::map<std::string, std::vector<double>> buffers(const sf::StitchModel& m, bool encoders) {
  std::map<std::string, std::vector<double>> out;
  auto take = [&](const std::string& n, const sf::Tensor& t) { out[n].assign(t.data().begin(), t.data().end()); };
  if (encoders) {
    m.visit_encoders(take);
  } else {
    m.visit_trainable(take);
  }
  return out;
}

bool bytes_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Outcome frozen_encoder() {
  sf::SynthOptions o;
  o.samples = 40;
  o.seed = 21;
  const auto data = sf::generate_synthetic(o);
  sf::ModelConfig mc;
  mc.modalities = {"mod0", "mod1"};
  mc.num_classes = data.num_classes;
  mc.use_ffm = true;
  mc.encoder.drop_path_rate = 0.1;
  const auto model = sf::build_model(mc, 21);
  const auto enc0 = buffers(model, true);
  const auto head0 = buffers(model, false);
  sf::TrainConfig tc;
  tc.epochs = 10;
  tc.warmup_epochs = 1;
  tc.batch_size = 4;
  tc.base_lr = 1e-3;
  tc.seed = 21;
  const auto result = sf::fit(model, data, tc);

  std::size_t enc_same = 0;
  for (const auto& [name, now] : buffers(model, true)) enc_same += bytes_equal(enc0.at(name), now);
  std::map<std::string, std::pair<std::size_t, std::size_t>> groups;  // prefix -> (changed, total)
  for (const auto& [name, now] : buffers(model, false)) {
    auto& g = groups[name.substr(0, name.find('.'))];
    g.first += !bytes_equal(head0.at(name), now);
    ++g.second;
  }
  note("%zu steps; encoder tensors unchanged: %zu/%zu", result.steps, enc_same, enc0.size());
  bool heads_moved = groups.size() == 3;
  for (const auto& [prefix, g] : groups) {
    note("%-8s tensors changed: %zu/%zu", prefix.c_str(), g.first, g.second);
    heads_moved = heads_moved && g.first == g.second;
  }
  return {result.steps == 100 && enc_same == enc0.size() && heads_moved, "100 AdamW steps, FFM on"};
}

// ---------------------------------------------------------------------------
// Fusion protocol shared by criteria 6 and 7.

struct Protocol {
  std::size_t seeds = 5;
  std::size_t epochs = 20;
  double lr = 2e-3;
  double warmup = 2.0;
};

struct SeedRuns {
  double stitched = 0, ffm = 0, mod0 = 0, mod1 = 0;
  double stitched_seconds = 0, ffm_seconds = 0, baseline_seconds = 0;
};

class FusionRuns {
 public:
  explicit FusionRuns(Protocol p) : p_(p), runs_(p.seeds) {}

  const Protocol& protocol() const { return p_; }
  SeedRuns& at(std::size_t s) { return runs_[s]; }

  void ensure_data(std::size_t s) {
    while (train_.size() <= s) {
      sf::SynthOptions o;
      o.samples = 200;
      o.seed = train_.size();
      train_.push_back(sf::generate_synthetic(o));
      o.samples = 50;
      o.split = "eval";
      eval_.push_back(sf::generate_synthetic(o));
    }
  }

  // Final eval mIoU of one model variant; returns wall seconds in `secs`.
  double train(std::size_t s, std::vector<std::string> modalities, bool ffm, double& secs) {
    ensure_data(s);
    const auto t0 = std::chrono::steady_clock::now();
    sf::ModelConfig mc;
    mc.modalities = std::move(modalities);
    mc.stitched = mc.modalities.size() >= 2;
    mc.use_ffm = ffm;
    mc.num_classes = train_[s].num_classes;
    const auto model = sf::build_model(mc, s);
    sf::TrainConfig tc;
    tc.base_lr = p_.lr;
    tc.warmup_epochs = p_.warmup;
    tc.epochs = p_.epochs;
    tc.batch_size = 8;
    tc.seed = s;
    sf::fit(model, train_[s], tc);
    const double miou = sf::evaluate(model, eval_[s]).miou;
    secs = seconds_since(t0);
    return miou;
  }

  bool have_stitched(std::size_t s) const { return stitched_done_.count(s) > 0; }
  void stitched(std::size_t s) {
    if (have_stitched(s)) return;
    runs_[s].stitched = train(s, {"mod0", "mod1"}, false, runs_[s].stitched_seconds);
    stitched_done_.insert(s);
  }

 private:
  Protocol p_;
  std::vector<SeedRuns> runs_;
  std::vector<sf::Dataset> train_, eval_;
  std::set<std::size_t> stitched_done_;
};

Outcome fusion_benefit(FusionRuns& fr) {
  std::size_t wins = 0;
  const std::size_t n = fr.protocol().seeds;
  for (std::size_t s = 0; s < n; ++s) {
    fr.stitched(s);
    auto& r = fr.at(s);
    double a = 0, b = 0;
    r.mod0 = fr.train(s, {"mod0"}, false, a);
    r.mod1 = fr.train(s, {"mod1"}, false, b);
    r.baseline_seconds = a + b;
    const double margin = r.stitched - std::max(r.mod0, r.mod1);
    wins += margin >= 5.0;
    note("seed %zu: stitched %.2f  mod0 %.2f  mod1 %.2f  margin %+.2f", s, r.stitched, r.mod0, r.mod1, margin);
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "margin >= 5 mIoU in %zu/%zu seeds", wins, n);
  return {n >= 5 && wins * 5 >= 4 * n, buf};
}

Outcome ffm_trend(FusionRuns& fr) {
  double sum_s = 0, sum_f = 0, secs = 0;
  const std::size_t n = fr.protocol().seeds;
  for (std::size_t s = 0; s < n; ++s) {
    const bool reused = fr.have_stitched(s);
    fr.stitched(s);
    auto& r = fr.at(s);
    r.ffm = fr.train(s, {"mod0", "mod1"}, true, r.ffm_seconds);
    sum_s += r.stitched;
    sum_f += r.ffm;
    secs += r.stitched_seconds + r.ffm_seconds;
    note("seed %zu: stitched %.2f%s  stitched+ffm %.2f", s, r.stitched, reused ? " (shared run)" : "", r.ffm);
  }
  const double ms = sum_s / n, mf = sum_f / n;
  char buf[160];
  std::snprintf(buf, sizeof buf, "mean stitched+ffm %.2f vs stitched %.2f (%+.2f); standalone cost %.0f s", mf, ms,
                mf - ms, secs);
  return {n >= 5 && mf >= ms - 0.5, buf};
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  constexpr std::size_t kSide = 16, kPairs = 100;
  sf::Rng rng(2024);
  std::size_t agree = 0;
  for (std::size_t t = 0; t < kPairs; ++t) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(2, 8));
    std::vector<std::uint16_t> gt(kSide * kSide), pred(kSide * kSide);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      gt[i] = rng.uniform() < 0.05 ? sf::kIgnoreIndex : static_cast<std::uint16_t>(rng.uniform_int(0, k - 1));
      // mix of copied and random predictions so IoU spans (0, 1)
      pred[i] = (rng.uniform() < 0.5 && gt[i] != sf::kIgnoreIndex) ? gt[i]
                                                                    : static_cast<std::uint16_t>(rng.uniform_int(0, k - 1));
    }
    const auto metrics = sf::evaluate_labels({pred}, {gt}, k);

    // brute force: per class, pixel sets intersected and united directly
    double sum = 0.0;
    std::size_t present = 0;
    bool same = true;
    for (std::size_t c = 0; c < k; ++c) {
      std::uint64_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == sf::kIgnoreIndex) continue;
        const bool in_gt = gt[i] == c, in_pred = pred[i] == c;
        inter += in_gt && in_pred;
        uni += in_gt || in_pred;
      }
      if (uni == 0) {
        same = same && !metrics.class_iou[c].has_value();
        continue;
      }
      const double iou = static_cast<double>(inter) / static_cast<double>(uni);
      same = same && metrics.class_iou[c].has_value() && *metrics.class_iou[c] == iou;
      sum += iou;
      ++present;
    }
    const double miou = 100.0 * (sum / static_cast<double>(present));
    agree += same && metrics.miou == miou;
  }
  note("%zu/%zu random %zux%zu pairs match the brute-force oracle exactly", agree, kPairs, kSide, kSide);
  return {agree == kPairs, "exact equality"};
}

bool datasets_identical(const sf::Dataset& a, const sf::Dataset& b) {
  if (a.size() != b.size() || a.visibility != b.visibility || a.num_classes != b.num_classes) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.samples[i].labels != b.samples[i].labels) return false;
    for (std::size_t m = 0; m < a.samples[i].images.size(); ++m) {
      const auto& x = a.samples[i].images[m];
      const auto& y = b.samples[i].images[m];
      if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) != 0) return false;
    }
  }
  return true;
}

Outcome determinism(const fs::path& workdir) {
  sf::SynthOptions o;
  o.samples = 24;
  o.seed = 31;
  const auto train = sf::generate_synthetic(o);
  o.samples = 8;
  o.split = "eval";
  const auto eval = sf::generate_synthetic(o);

  sf::RunConfig rc;
  rc.ffm = true;
  rc.drop_path = 0.1;
  rc.train.epochs = 2;
  rc.train.warmup_epochs = 1;
  rc.train.base_lr = 1e-3;
  rc.train.seed = 5;
  auto run = [&] {
    const auto model = sf::build_model(rc.model_config(train), rc.train.seed);
    const auto result = sf::fit(model, train, rc.train);
    return std::make_pair(model, result);
  };
  const auto [model_a, fit_a] = run();
  const auto [model_b, fit_b] = run();
  const auto ma = sf::evaluate(model_a, eval), mb = sf::evaluate(model_b, eval);
  bool same_loss = fit_a.history.size() == fit_b.history.size();
  for (std::size_t e = 0; same_loss && e < fit_a.history.size(); ++e)
    same_loss = std::memcmp(&fit_a.history[e].mean_loss, &fit_b.history[e].mean_loss, sizeof(double)) == 0;
  const bool same_metrics = ma.confusion == mb.confusion && std::memcmp(&ma.miou, &mb.miou, sizeof(double)) == 0;
  note("repeat run: losses %s, metrics %s (mIoU %.4f)", same_loss ? "bit-identical" : "DIFFER",
       same_metrics ? "bit-identical" : "DIFFER", ma.miou);

  const bool regenerated = datasets_identical(train, sf::generate_synthetic([&] {
    auto r = o;
    r.samples = 24;
    r.split = "train";
    return r;
  }()));
  std::error_code ec;
  fs::remove_all(workdir / "roundtrip", ec);
  sf::save_dataset(train, workdir / "roundtrip" / "data");
  const bool data_rt = datasets_identical(train, sf::load_dataset(workdir / "roundtrip" / "data"));
  note("dataset: regeneration %s, save/load %s", regenerated ? "identical" : "DIFFERS", data_rt ? "bit-exact" : "DIFFERS");

  sf::save_checkpoint(model_a, workdir / "roundtrip" / "ckpt");
  const auto loaded = sf::load_checkpoint(workdir / "roundtrip" / "ckpt", model_a.config);
  std::vector<std::vector<double>> pa, pb;
  model_a.visit([&](const std::string&, const sf::Tensor& t) { pa.emplace_back(t.data().begin(), t.data().end()); });
  loaded.visit([&](const std::string&, const sf::Tensor& t) { pb.emplace_back(t.data().begin(), t.data().end()); });
  bool ckpt_rt = pa.size() == pb.size();
  for (std::size_t i = 0; ckpt_rt && i < pa.size(); ++i) ckpt_rt = bytes_equal(pa[i], pb[i]);
  const auto ml = sf::evaluate(loaded, eval);
  const bool ckpt_metrics = ml.confusion == ma.confusion && std::memcmp(&ml.miou, &ma.miou, sizeof(double)) == 0;
  note("checkpoint: %zu tensors %s, reloaded metrics %s", pa.size(), ckpt_rt ? "bit-exact" : "DIFFER",
       ckpt_metrics ? "identical" : "DIFFER");
  return {same_loss && same_metrics && regenerated && data_rt && ckpt_rt && ckpt_metrics,
          "repeat training, dataset and checkpoint round-trips"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::string workdir = "acceptance_work";
  std::vector<int> only;
  Protocol protocol;
  app.add_option("--workdir", workdir, "scratch directory for round-trip artifacts")->capture_default_str();
  app.add_option("--only", only, "run only these criteria (1-9)")->delimiter(',');
  app.add_option("--fusion-epochs", protocol.epochs, "epochs per run in criteria 6-7")->capture_default_str();
  app.add_option("--fusion-lr", protocol.lr, "base learning rate in criteria 6-7")->capture_default_str();
  app.add_option("--fusion-seeds", protocol.seeds, "seeds in criteria 6-7")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  FusionRuns fusion(protocol);
  const std::vector<Criterion> criteria{
      {1, "parameter budget (b2-like, r=8, pair-bi)", 1.0, parameter_budget},
      {2, "two-modality shared == pair-bi equivalence", 30.0, equivalence},
      {3, "zero-adapter transparency", 30.0, transparency},
      {4, "finite-difference gradient integrity", 300.0, gradients},
      {5, "frozen encoders after 100 steps", 300.0, frozen_encoder},
      {6, "fusion benefit over single modalities", 900.0, [&] { return fusion_benefit(fusion); }},
      {7, "FFM non-inferiority", 900.0, [&] { return ffm_trend(fusion); }},
      {8, "metric vs brute-force oracle", 60.0, metric_oracle},
      {9, "determinism and round-trips", 120.0, [&] { return determinism(workdir); }},
  };
  std::printf("fusion protocol: %zu seeds, 200 train / 50 eval, 32x32, 5 classes, tiny preset, %zu epochs, "
              "lr %.1e, warmup %.0f, batch 8\n",
              protocol.seeds, protocol.epochs, protocol.lr, protocol.warmup);

  std::vector<std::string> lines;
  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    std::printf("[%d] %s\n", c.id, c.title.c_str());
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = seconds_since(t0);
    // Criterion 7 reuses the stitched runs of 6; its budget applies to the standalone cost.
    if (c.id == 7) {
      secs = 0;
      for (std::size_t s = 0; s < protocol.seeds; ++s) secs += fusion.at(s).stitched_seconds + fusion.at(s).ffm_seconds;
    }
    const bool in_time = secs < c.budget_seconds;
    const bool ok = o.ok && in_time;
    all = all && ok;
    char line[512];
    std::snprintf(line, sizeof line, "%s criterion %d: %s: %s (%.1f s, budget %.0f s%s)", ok ? "PASS" : "FAIL", c.id,
                  c.title.c_str(), o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", OVER BUDGET");
    std::printf("%s\n", line);
    std::fflush(stdout);
    lines.emplace_back(line);
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  return all ? 0 : 1;
}
