// Copyright 2026 The biscc Authors. All Rights Reserved.
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

// biscc: dataset generation, training, localization, evaluation, sweeps and
// trace reports from the command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "biscc/trainer.hpp"
#include "report.hpp"

namespace {

namespace fs = std::filesystem;
using namespace biscc;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void init_logging() {
  auto logger = spdlog::stderr_logger_mt("biscc");
  logger->set_pattern("[%H:%M:%S] [%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("BISCC_LOG"); env && *env) {
    const std::string name(env);
    const auto level = spdlog::level::from_str(name);
    if (level == spdlog::level::off && name != "off") {
      spdlog::warn("ignoring unknown BISCC_LOG level '{}'", name);
    } else {
      spdlog::set_level(level);
    }
  }
}

/// Destination directory for one command. Refuses to reuse a non-empty
/// directory unless forced, and deletes what it wrote if the command does not
/// reach commit().
class OutputDir {
 public:
  OutputDir(fs::path dir, bool force) : dir_(std::move(dir)) {
    if (dir_.empty()) throw UsageError("--out is required");
    if (fs::exists(dir_)) {
      if (!fs::is_directory(dir_)) {
        throw UsageError("output path " + dir_.string() +
                         " exists and is not a directory");
      }
      if (!fs::is_empty(dir_) && !force) {
        throw UsageError("output directory " + dir_.string() +
                         " is not empty (pass --force to overwrite)");
      }
    } else {
      fs::create_directories(dir_);
      created_ = true;
    }
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  ~OutputDir() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = written_.rbegin(); it != written_.rend(); ++it) {
      fs::remove_all(*it, ec);
    }
    if (created_) fs::remove(dir_, ec);
  }

  fs::path file(const std::string& name) {
    written_.push_back(dir_ / name);
    return written_.back();
  }

  fs::path subdir(const std::string& name) {
    const fs::path p = file(name);
    fs::create_directories(p);
    return p;
  }

  void commit() { committed_ = true; }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool created_ = false;
  bool committed_ = false;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << std::setprecision(10);
  return out;
}

// ---------------------------------------------------------------------------
// Option groups.

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

void add_common(CLI::App& app, Common& c, bool out_required = true) {
  app.set_config("--config", "", "read options from a key=value file")
      ->check(CLI::ExistingFile);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--seed", c.seed, "seed for every random stream")
      ->capture_default_str();
  auto* out = app.add_option("--out", c.out, "output directory");
  if (out_required) out->required();
  app.add_flag("--force", c.force, "allow writing into a non-empty directory");
}

void add_data_options(CLI::App& app, SyntheticSpec& s) {
  app.add_option("--classes", s.num_classes, "number of action classes")
      ->capture_default_str();
  app.add_option("--segments", s.segments_per_video, "segments per video")
      ->capture_default_str();
  app.add_option("--feature-dim", s.feature_dim, "feature width (even)")
      ->capture_default_str();
  app.add_option("--train", s.num_train, "training videos")
      ->capture_default_str();
  app.add_option("--test", s.num_test, "test videos")->capture_default_str();
  app.add_option("--actions-min", s.actions_min, "fewest actions per video")
      ->capture_default_str();
  app.add_option("--actions-max", s.actions_max, "most actions per video")
      ->capture_default_str();
  app.add_option("--length-min", s.length_min, "shortest action in segments")
      ->capture_default_str();
  app.add_option("--length-max", s.length_max, "longest action in segments")
      ->capture_default_str();
  app.add_option("--scene-correlation", s.scene_correlation,
                 "scene component carried by action segments")
      ->capture_default_str();
  app.add_option("--co-scene-fraction", s.co_scene_fraction,
                 "share of context segments showing the action's scene")
      ->capture_default_str();
  app.add_option("--noise", s.noise_sigma, "Gaussian feature noise")
      ->capture_default_str();
}

struct TrainOptions {
  TrainConfig cfg;
  std::string ctg = "max";
  std::string augment = "temporal-context";

  const std::map<std::string, AugmentKind>& augment_kinds() const {
    static const std::map<std::string, AugmentKind> m = {
        {"temporal-context", AugmentKind::kTemporalContext},
        {"gaussian-noise", AugmentKind::kGaussianNoise},
        {"random-mask", AugmentKind::kRandomMask},
        {"resolution", AugmentKind::kResolution}};
    return m;
  }

  TrainConfig resolve(std::uint64_t seed) const {
    TrainConfig c = cfg;
    c.seed = seed;
    c.ctg_mode = ctg == "avg" ? CtgMode::kAvg : CtgMode::kMax;
    c.augment = augment_kinds().at(augment);
    c.validate();
    return c;
  }
};

void add_train_options(CLI::App& app, TrainOptions& o) {
  TrainConfig& c = o.cfg;
  app.add_option("--alpha", c.alpha, "weight of the consistency term")
      ->capture_default_str();
  app.add_option("--gamma", c.gamma, "pseudo-action threshold")
      ->capture_default_str();
  app.add_option("--views", c.views, "intra-video views per teacher (K)")
      ->capture_default_str();
  app.add_option("--inflate", c.inflate, "instance inflation per side")
      ->capture_default_str();
  app.add_option("--topk-divisor", c.topk_divisor, "k = T / divisor")
      ->capture_default_str();
  app.add_option("--lr", c.lr, "learning rate")->capture_default_str();
  app.add_option("--weight-decay", c.weight_decay, "decoupled weight decay")
      ->capture_default_str();
  app.add_option("--ema", c.ema_momentum, "teacher EMA momentum")
      ->capture_default_str();
  app.add_option("--batch-size", c.batch_size, "videos per step")
      ->capture_default_str();
  app.add_option("--steps", c.steps_per_iteration, "steps per iteration")
      ->capture_default_str();
  app.add_option("--iterations", c.iterations, "outer iterations")
      ->capture_default_str();
  app.add_option("--hidden", c.hidden, "hidden width, 0 = feature width")
      ->capture_default_str();
  app.add_option("--ctg", o.ctg, "teacher view reduction")
      ->check(CLI::IsMember({"max", "avg"}))
      ->capture_default_str();
  app.add_option("--augment", o.augment, "augmentation of the second branch")
      ->check(CLI::IsMember({"temporal-context", "gaussian-noise", "random-mask",
                             "resolution"}))
      ->capture_default_str();
  app.add_option("--inter-tca", c.inter_tca, "swap context between videos")
      ->capture_default_str();
  app.add_option("--intra-tca", c.intra_tca, "relocate instances in teacher views")
      ->capture_default_str();
  app.add_option("--norm-loss", c.losses.norm, "attention sparsity term")
      ->capture_default_str();
  app.add_option("--guide-loss", c.losses.guide, "attention guide term")
      ->capture_default_str();
  app.add_option("--cas-loss", c.losses.cas, "co-activity term")
      ->capture_default_str();
}

void add_localize_options(CLI::App& app, LocalizeConfig& l) {
  app.add_option("--class-threshold", l.class_threshold,
                 "video probability needed to localize a class")
      ->capture_default_str();
  app.add_option("--nms-iou", l.nms_iou, "suppression overlap")
      ->capture_default_str();
  app.add_option("--attention-thresholds", l.attention_thresholds,
                 "attention cut levels for proposals")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--outer-only", l.outer_only,
                 "contrast against the outer ring only")
      ->capture_default_str();
}

void validate_localize(const LocalizeConfig& l) {
  if (!(l.class_threshold >= 0.0 && l.class_threshold < 1.0)) {
    throw UsageError("--class-threshold must be in [0,1)");
  }
  if (!(l.nms_iou >= 0.0 && l.nms_iou <= 1.0)) {
    throw UsageError("--nms-iou must be in [0,1]");
  }
  if (l.attention_thresholds.empty()) {
    throw UsageError("--attention-thresholds must not be empty");
  }
}

const std::vector<VideoSample>& pick_split(const Dataset& d,
                                           const std::string& split) {
  return split == "train" ? d.train : d.test;
}

ModelParams load_named(const fs::path& path, const std::string& prefix) {
  return load_model(path, prefix);
}

void write_config(OutputDir& out, const CLI::App& app) {
  std::ofstream f = open_out(out.file("config.ini"));
  f << app.config_to_str(true, false);
}

// ---------------------------------------------------------------------------
// Metrics.

/// Per-step loss rows; the last step of each iteration also carries q and
/// mAP@0.5.
class MetricsLog {
 public:
  explicit MetricsLog(const fs::path& path) : out_(open_out(path)) {
    out_ << "step,loss_total,loss_cls,loss_bi_scc,loss_norm,loss_guide,"
            "loss_cas,q,map50\n";
  }
  ~MetricsLog() { flush(); }

  void step(long global_step, const LossBreakdown& l) {
    flush();
    pending_ = fmt::format("{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}",
                           global_step, l.total, l.cls,
                           l.bi_scc, l.norm, l.guide, l.cas);
    last_step_ = global_step;
  }

  void iteration_end(double q, double map50) {
    if (!pending_) pending_ = fmt::format("{},,,,,,", last_step_);
    out_ << *pending_ << ',' << q << ',' << map50 << '\n';
    pending_.reset();
    out_.flush();
  }

  void flush() {
    if (pending_) out_ << *pending_ << ",,\n";
    pending_.reset();
  }

 private:
  std::ofstream out_;
  std::optional<std::string> pending_;
  long last_step_ = 0;
};

void write_iteration_row(std::ofstream& f, const IterationMetrics& m) {
  f << m.iteration << ',' << m.q;
  for (double v : m.eval.map.map) f << ',' << v;
  f << ',' << m.eval.map.average << ',' << m.eval.coscene_fp_rate << '\n';
}

std::string iteration_header(std::span<const double> ious) {
  std::string h = "iteration,q";
  for (double iou : ious) h += fmt::format(",map@{}", iou);
  return h + ",map_avg,coscene_fp\n";
}

// ---------------------------------------------------------------------------
// Commands.

using Command = std::function<int(int, char**)>;

int parse(CLI::App& app, int argc, char** argv) {
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ConfigError& e) {
    throw UsageError(std::string("config file: ") + e.what());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  return -1;
}

int cmd_gen_data(int argc, char** argv) {
  CLI::App app{"Generate a synthetic confounded dataset", "biscc gen-data"};
  Common c;
  SyntheticSpec spec;
  add_common(app, c);
  add_data_options(app, spec);
  if (int rc = parse(app, argc, argv); rc >= 0) return rc;

  spec.seed = c.seed;
  spec.validate();
  OutputDir out(c.out, c.force);
  const Dataset d = generate_synthetic(spec);
  save_dataset(d, out.file("dataset.bscc"));
  write_config(out, app);
  out.commit();
  spdlog::info("wrote {} train and {} test videos to {}", d.train.size(),
               d.test.size(), out.path().string());
  return 0;
}

struct TrainCommand {
  CLI::App app;
  Common common;
  TrainOptions train;
  LocalizeConfig loc;
  std::string data;

  explicit TrainCommand(const std::string& desc, const std::string& name)
      : app(desc, name) {
    add_common(app, common);
    app.add_option("--data", data, "dataset file")
        ->required()
        ->check(CLI::ExistingFile);
    add_train_options(app, train);
    add_localize_options(app, loc);
  }
};

int cmd_train_baseline(int argc, char** argv) {
  TrainCommand t("Train the mean-teacher baseline", "biscc train-baseline");
  if (int rc = parse(t.app, argc, argv); rc >= 0) return rc;

  const TrainConfig cfg = t.train.resolve(t.common.seed);
  validate_localize(t.loc);
  const Dataset d = load_dataset(t.data);
  OutputDir out(t.common.out, t.common.force);
  write_config(out, t.app);
  BranchState st;
  {
    MetricsLog log(out.file("metrics.csv"));
    st = train_baseline(d, cfg, [&](const StepRecord& r) {
      log.step(r.step, r.loss);
      if (r.step % 100 == 0) {
        spdlog::debug("step {} loss {:.5f}", r.step, r.loss.total);
      }
    });
    const double q = pseudo_label_precision(st.student(), d.train, cfg.gamma);
    const EvalMetrics m = evaluate_model(st.student(), d.test,
                                         d.spec.num_classes, t.loc,
                                         default_eval_ious(), cfg.gamma);
    log.iteration_end(q, m.map_at(0.5));
    spdlog::info("baseline: q={:.4f} mAP@0.5={:.4f} avg mAP={:.4f}", q,
                 m.map_at(0.5), m.map.average);
  }
  save_checkpoint(out.file("model.bscp"),
                  {{"original", st.student()}, {"original_teacher", st.teacher()}});
  out.commit();
  return 0;
}

int cmd_train(int argc, char** argv) {
  TrainCommand t("Train Bi-SCC with iterative pseudo-label refresh",
                 "biscc train");
  if (int rc = parse(t.app, argc, argv); rc >= 0) return rc;

  const TrainConfig cfg = t.train.resolve(t.common.seed);
  validate_localize(t.loc);
  const Dataset d = load_dataset(t.data);
  OutputDir out(t.common.out, t.common.force);
  write_config(out, t.app);
  fs::copy_file(t.data, out.file("dataset.bscc"),
                fs::copy_options::overwrite_existing);

  IterateResult res;
  {
    MetricsLog log(out.file("metrics.csv"));
    std::ofstream iters = open_out(out.file("iterations.csv"));
    iters << iteration_header(default_eval_ious());
    const long per_itr = cfg.steps_per_iteration;
    res = iterate(
        d, cfg, t.loc,
        [&](const StepRecord& r) {
          log.step((r.iteration - 1) * per_itr + r.step, r.loss);
          if (r.step % 100 == 0) {
            spdlog::debug("iteration {} step {} loss {:.5f} bi-scc {:.5f}",
                          r.iteration, r.step, r.loss.total, r.loss.bi_scc);
          }
        },
        [&](const IterationMetrics& m, const StepRecord&) {
          log.iteration_end(m.q, m.eval.map_at(0.5));
          write_iteration_row(iters, m);
          spdlog::info("iteration {}: q={:.4f} mAP@0.5={:.4f} avg mAP={:.4f} "
                       "co-scene FP={:.4f}",
                       m.iteration, m.q, m.eval.map_at(0.5), m.eval.map.average,
                       m.eval.coscene_fp_rate);
        });
  }
  std::vector<NamedModel> models = {
      {"baseline", res.baseline.student()},
      {"baseline_teacher", res.baseline.teacher()},
      {"original", res.original.student()},
      {"original_teacher", res.original.teacher()}};
  if (res.augmented) {
    models.push_back({"augmented", res.augmented->student()});
    models.push_back({"augmented_teacher", res.augmented->teacher()});
  }
  save_checkpoint(out.file("model.bscp"), models);
  out.commit();
  return 0;
}

int cmd_localize(int argc, char** argv) {
  CLI::App app{"Write proposals for a dataset split", "biscc localize"};
  Common c;
  LocalizeConfig loc;
  std::string data;
  std::string model;
  std::string prefix = "original";
  std::string split = "test";
  add_common(app, c);
  app.add_option("--data", data, "dataset file")->required()->check(CLI::ExistingFile);
  app.add_option("--model", model, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--model-prefix", prefix, "model inside the checkpoint")
      ->capture_default_str();
  app.add_option("--split", split, "which split to localize")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  add_localize_options(app, loc);
  if (int rc = parse(app, argc, argv); rc >= 0) return rc;

  validate_localize(loc);
  const Dataset d = load_dataset(data);
  const ModelParams params = load_named(model, prefix);
  OutputDir out(c.out, c.force);
  const auto props = localize_all(params, pick_split(d, split), loc);
  write_proposals_csv(out.file("proposals.csv"), props);
  write_config(out, app);
  out.commit();
  spdlog::info("wrote {} proposals", props.size());
  return 0;
}

int cmd_eval(int argc, char** argv) {
  CLI::App app{"Score proposals against ground truth", "biscc eval"};
  Common c;
  LocalizeConfig loc;
  std::string data;
  std::string proposals;
  std::string model;
  std::string prefix = "original";
  std::string split = "test";
  std::vector<double> ious = default_eval_ious();
  add_common(app, c);
  app.add_option("--data", data, "dataset file")->required()->check(CLI::ExistingFile);
  auto* p_opt = app.add_option("--proposals", proposals, "proposals CSV")
                    ->check(CLI::ExistingFile);
  auto* m_opt = app.add_option("--model", model, "localize with this checkpoint")
                    ->check(CLI::ExistingFile);
  p_opt->excludes(m_opt);
  app.add_option("--model-prefix", prefix, "model inside the checkpoint")
      ->capture_default_str();
  app.add_option("--split", split, "which split to score")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  app.add_option("--iou", ious, "IoU thresholds")
      ->delimiter(',')
      ->capture_default_str();
  add_localize_options(app, loc);
  if (int rc = parse(app, argc, argv); rc >= 0) return rc;

  if (proposals.empty() && model.empty()) {
    throw UsageError("eval needs --proposals or --model");
  }
  if (ious.empty()) throw UsageError("--iou must not be empty");
  for (double v : ious) {
    if (!(v > 0.0 && v <= 1.0)) throw UsageError("--iou values must be in (0,1]");
  }
  const Dataset d = load_dataset(data);
  const auto& vids = pick_split(d, split);
  std::vector<Proposal> props;
  if (!proposals.empty()) {
    if (fs::file_size(proposals) > 0) props = read_proposals_csv(proposals);
  } else {
    validate_localize(loc);
    props = localize_all(load_named(model, prefix), vids, loc);
  }
  OutputDir out(c.out, c.force);
  const MapResult r =
      evaluate_map(props, ground_truth(vids), ious, d.spec.num_classes);
  write_map_report(out.file("map.csv"), r);
  write_config(out, app);
  out.commit();
  std::string line;
  for (std::size_t i = 0; i < ious.size(); ++i) {
    line += fmt::format("mAP@{}={:.4f} ", ious[i], r.map[i]);
  }
  spdlog::info("{}avg={:.4f}", line, r.average);
  return 0;
}

int cmd_sweep(int argc, char** argv) {
  TrainCommand t("Rerun training across values of one parameter",
                 "biscc sweep");
  std::string param;
  std::vector<std::string> values;
  t.app.add_option("--param", param, "parameter to vary")
      ->required()
      ->check(CLI::IsMember(
          {"alpha", "gamma", "views", "inflate", "ctg_mode", "augment"}));
  t.app.add_option("--values", values, "comma-separated values")
      ->required()
      ->delimiter(',');
  if (int rc = parse(t.app, argc, argv); rc >= 0) return rc;

  validate_localize(t.loc);
  // Every value is resolved before the first run starts.
  std::vector<TrainConfig> configs;
  for (const std::string& v : values) {
    TrainOptions o = t.train;
    try {
      if (param == "alpha") o.cfg.alpha = std::stod(v);
      if (param == "gamma") o.cfg.gamma = std::stod(v);
      if (param == "views") o.cfg.views = std::stoi(v);
      if (param == "inflate") o.cfg.inflate = std::stoi(v);
    } catch (const std::exception&) {
      throw UsageError("--values: '" + v + "' is not a number");
    }
    if (param == "ctg_mode") {
      if (v != "max" && v != "avg") throw UsageError("--values: ctg_mode is max or avg");
      o.ctg = v;
    }
    if (param == "augment") {
      if (!o.augment_kinds().count(v)) {
        throw UsageError("--values: unknown augmentation '" + v + "'");
      }
      o.augment = v;
    }
    configs.push_back(o.resolve(t.common.seed));
  }

  const Dataset d = load_dataset(t.data);
  OutputDir out(t.common.out, t.common.force);
  write_config(out, t.app);
  std::ofstream table = open_out(out.file("sweep.csv"));
  table << "param,value,q";
  for (double iou : default_eval_ious()) table << fmt::format(",map@{}", iou);
  table << ",map_avg,coscene_fp\n";
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const fs::path run = out.subdir(fmt::format("run_{:02d}", i));
    IterateResult res;
    {
      MetricsLog log(run / "metrics.csv");
      std::ofstream iters = open_out(run / "iterations.csv");
      iters << iteration_header(default_eval_ious());
      const long per_itr = configs[i].steps_per_iteration;
      res = iterate(
          d, configs[i], t.loc,
          [&](const StepRecord& r) {
            log.step((r.iteration - 1) * per_itr + r.step, r.loss);
          },
          [&](const IterationMetrics& m, const StepRecord&) {
            log.iteration_end(m.q, m.eval.map_at(0.5));
            write_iteration_row(iters, m);
          });
    }
    const IterationMetrics& last = res.iterations.back();
    table << param << ',' << values[i] << ',' << last.q;
    for (double m : last.eval.map.map) table << ',' << m;
    table << ',' << last.eval.map.average << ',' << last.eval.coscene_fp_rate
          << '\n';
    table.flush();
    spdlog::info("{}={}: avg mAP={:.4f} q={:.4f}", param, values[i],
                 last.eval.map.average, last.q);
  }
  out.commit();
  return 0;
}

int cmd_report(int argc, char** argv) {
  CLI::App app{"Render attention and activation traces of a training run",
               "biscc report"};
  Common c;
  LocalizeConfig loc;
  std::string run;
  std::string data;
  int videos = 5;
  double gamma = TrainConfig{}.gamma;
  add_common(app, c, false);
  app.add_option("--run", run, "directory written by `biscc train`")
      ->required()
      ->check(CLI::ExistingDirectory);
  app.add_option("--data", data, "dataset file (default: <run>/dataset.bscc)");
  app.add_option("--videos", videos, "test videos to draw")->capture_default_str();
  app.add_option("--gamma", gamma, "action threshold for q and co-scene FP")
      ->capture_default_str();
  add_localize_options(app, loc);
  if (int rc = parse(app, argc, argv); rc >= 0) return rc;

  if (videos < 0) throw UsageError("--videos must be >= 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("--gamma must be in (0,1)");
  validate_localize(loc);
  const fs::path run_dir(run);
  const fs::path data_path = data.empty() ? run_dir / "dataset.bscc" : fs::path(data);
  const fs::path model_path = run_dir / "model.bscp";
  for (const auto& p : {data_path, model_path}) {
    if (!fs::exists(p)) throw UsageError("missing run artifact " + p.string());
  }
  const Dataset d = load_dataset(data_path);
  const ModelParams baseline = load_named(model_path, "baseline");
  const ModelParams biscc = load_named(model_path, "original");
  if (c.out.empty()) c.out = (run_dir / "report").string();
  OutputDir out(c.out, c.force);

  std::ofstream summary = open_out(out.file("summary.csv"));
  summary << "model,q";
  for (double iou : default_eval_ious()) summary << fmt::format(",map@{}", iou);
  summary << ",map_avg,coscene_fp\n";
  for (const auto& [name, params] :
       {std::pair<const char*, const ModelParams*>{"baseline", &baseline},
        {"biscc", &biscc}}) {
    const EvalMetrics m = evaluate_model(*params, d.test, d.spec.num_classes, loc,
                                         default_eval_ious(), gamma);
    summary << name << ',' << pseudo_label_precision(*params, d.train, gamma);
    for (double v : m.map.map) summary << ',' << v;
    summary << ',' << m.map.average << ',' << m.coscene_fp_rate << '\n';
  }

  // A seeded partial shuffle picks the videos; they are drawn in split order.
  std::vector<std::size_t> idx(d.test.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng = make_rng(c.seed, kStreamReport);
  const std::size_t n = std::min(idx.size(), static_cast<std::size_t>(videos));
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) {
    const VideoSample& v = d.test[i];
    const std::vector<report::Trace> traces = {
        report::make_trace("baseline", baseline, v),
        report::make_trace("Bi-SCC", biscc, v)};
    std::ofstream f = open_out(out.file(v.id + ".svg"));
    f << report::render_svg(v, traces);
  }
  write_config(out, app);
  out.commit();
  spdlog::info("wrote {} traces to {}", n, out.path().string());
  return 0;
}

const std::vector<std::pair<std::string, std::pair<Command, std::string>>>&
commands() {
  static const std::vector<std::pair<std::string, std::pair<Command, std::string>>>
      table = {
          {"gen-data", {cmd_gen_data, "generate a synthetic dataset"}},
          {"train-baseline", {cmd_train_baseline, "train the baseline model"}},
          {"train", {cmd_train, "train Bi-SCC (baseline, then refinement)"}},
          {"localize", {cmd_localize, "write proposals for a split"}},
          {"eval", {cmd_eval, "compute mAP for proposals or a model"}},
          {"sweep", {cmd_sweep, "ablation over one training parameter"}},
          {"report", {cmd_report, "SVG traces and a baseline comparison"}},
      };
  return table;
}

void print_usage(std::ostream& os) {
  os << "usage: biscc <command> [options]\n\ncommands:\n";
  for (const auto& [name, entry] : commands()) {
    os << "  " << std::left << std::setw(16) << name << entry.second << '\n';
  }
  os << "\nRun `biscc <command> --help` for the options of one command.\n"
        "Set BISCC_LOG=debug|info|warn|error|off to change log verbosity.\n";
}

int run(int argc, char** argv) {
  if (argc < 2) throw UsageError("expected a command; run `biscc --help`");
  const std::string name = argv[1];
  if (name == "--help" || name == "-h" || name == "help") {
    print_usage(std::cout);
    return 0;
  }
  for (const auto& [cmd, entry] : commands()) {
    if (cmd == name) return entry.first(argc - 1, argv + 1);
  }
  throw UsageError("unknown command '" + name + "'; run `biscc --help`");
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "biscc: error: " << one_line(e.what()) << std::endl;
    return 1;
  }
}
