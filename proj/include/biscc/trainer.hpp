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

// Mean-teacher training.
//
// train_baseline: one student/teacher pair; the student is trained with the
// MIL and auxiliary losses plus a consistency term against its EMA teacher
// on the same input.
//
// train_biscc: an original branch (input X) and an augmentation branch
// (input X' from inter-video context swapping). Each teacher sees K
// intra-video permutations of its branch input; their outputs are restored
// and reduced into a comprehensive T-CAM, which supervises the *other*
// branch's student.
//
// iterate: iteration 1 trains the baseline that produces pseudo labels;
// every later iteration trains both branches and hands the original-branch
// student over as the next pseudo-label model.

#ifndef BISCC_TRAINER_HPP_
#define BISCC_TRAINER_HPP_

#include "biscc/augment.hpp"
#include "biscc/datamodel.hpp"
#include "biscc/localize.hpp"
#include "biscc/losses.hpp"
#include "biscc/network.hpp"
#include "biscc/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace biscc {

struct LossToggles {
  bool norm = true;
  bool guide = true;
  bool cas = true;
};

struct TrainConfig {
  double alpha = 0.25;
  double gamma = 0.6;
  int views = 3;  // K intra-video transforms per teacher
  int inflate = 1;
  int topk_divisor = 8;
  double lr = 5e-4;
  double weight_decay = 1e-3;
  double ema_momentum = 0.999;
  int batch_size = 10;
  int steps_per_iteration = 1500;
  int iterations = 3;
  CtgMode ctg_mode = CtgMode::kMax;
  bool inter_tca = true;
  bool intra_tca = true;
  AugmentKind augment = AugmentKind::kTemporalContext;
  LossToggles losses;
  /// Hidden width; 0 means "same as the feature dimension".
  int hidden = 0;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& m) {
      throw std::invalid_argument("TrainConfig: " + m);
    };
    if (!(alpha >= 0.0)) fail("alpha must be >= 0");
    if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must be in (0,1)");
    if (views < 1) fail("views (K) must be >= 1");
    if (inflate < 0) fail("inflate must be >= 0");
    if (topk_divisor < 1) fail("topk_divisor must be >= 1");
    if (!(lr >= 0.0)) fail("lr must be >= 0");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (!(ema_momentum >= 0.0 && ema_momentum <= 1.0)) {
      fail("ema_momentum must be in [0,1]");
    }
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (steps_per_iteration < 0) fail("steps_per_iteration must be >= 0");
    if (iterations < 1) fail("iterations must be >= 1");
    if (hidden < 0) fail("hidden must be >= 0");
  }
};

/// Adam with decoupled weight decay:
///   m ← β1·m + (1−β1)·g,  v ← β2·v + (1−β2)·g²
///   θ ← θ − lr·( m̂ / (√v̂ + ε) + wd·θ )
class AdamW {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  void step(ModelParams& params, const std::array<Matrix, kNumParams>& grads,
            double lr, double weight_decay) {
    if (m_[0].size() == 0) {
      for (std::size_t i = 0; i < kNumParams; ++i) {
        m_[i] = Matrix::Zero(params[i].rows(), params[i].cols());
        v_[i] = Matrix::Zero(params[i].rows(), params[i].cols());
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < kNumParams; ++i) {
      const Matrix& g = grads[i];
      if (g.rows() != params[i].rows() || g.cols() != params[i].cols()) {
        throw ShapeError("AdamW: gradient shape mismatch for " +
                         std::string(kParamNames[i]));
      }
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g.cwiseProduct(g);
      Matrix update = (m_[i] / bc1).array() /
                      ((v_[i] / bc2).array().sqrt() + kEps);
      params[i] -= lr * (update + weight_decay * params[i]);
    }
  }

  long steps() const { return t_; }

 private:
  std::array<Matrix, kNumParams> m_;
  std::array<Matrix, kNumParams> v_;
  long t_ = 0;
};

/// θ_T ← momentum·θ_T + (1−momentum)·θ_S
inline void ema_update(ModelParams& teacher, const ModelParams& student,
                       double momentum) {
  if (!(teacher.shape() == student.shape())) {
    throw ShapeError("ema_update: teacher and student shapes differ");
  }
  for (std::size_t i = 0; i < kNumParams; ++i) {
    teacher[i] = momentum * teacher[i] + (1.0 - momentum) * student[i];
  }
}

/// Student/teacher pair. Only the student is optimized; the teacher moves
/// only through ema().
class BranchState {
 public:
  BranchState() = default;
  explicit BranchState(ModelParams init)
      : student_(init), teacher_(std::move(init)) {}

  const ModelParams& student() const { return student_; }
  const ModelParams& teacher() const { return teacher_; }

  void optimize(const std::array<Matrix, kNumParams>& grads, double lr,
                double weight_decay) {
    optimizer_.step(student_, grads, lr, weight_decay);
  }
  void ema(double momentum) { ema_update(teacher_, student_, momentum); }

  long optimizer_steps() const { return optimizer_.steps(); }

 private:
  ModelParams student_;
  ModelParams teacher_;
  AdamW optimizer_;
};

inline ModelShape model_shape(const SyntheticSpec& data, const TrainConfig& cfg) {
  return {data.feature_dim, cfg.hidden > 0 ? cfg.hidden : data.feature_dim,
          data.num_classes};
}

inline BranchState fresh_branch(const ModelShape& shape, std::uint64_t seed,
                                RngStream stream) {
  Rng rng = make_rng(seed, stream);
  return BranchState(ModelParams::initialize(shape, rng));
}

struct StepRecord {
  int iteration = 1;
  int step = 0;  // 1-based within the iteration
  LossBreakdown loss;
  /// Original-branch objective (cls + norm + guide + cas).
  double original_loss = 0.0;
};

using StepObserver = std::function<void(const StepRecord&)>;

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Epoch-style sampler: a fresh permutation of the training set is walked
/// batch by batch.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed)
      : n_(n), rng_(make_rng(seed, kStreamBatches)) {}

  std::vector<std::size_t> next(int batch_size) {
    const std::size_t b = std::min<std::size_t>(
        static_cast<std::size_t>(batch_size), n_);
    std::vector<std::size_t> out;
    while (out.size() < b) {
      if (pos_ == order_.size()) {
        order_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct BranchOutputs {
  std::vector<TCamPair> tcams;
  ad::Var objective;  // 1×1
  BranchLoss values;
};

/// Per-branch objective: mean over the batch of cls + norm + guide, plus the
/// co-activity term over the batch.
inline BranchOutputs branch_forward(ad::Tape& tape, const BoundParams& params,
                                    const std::vector<ad::Var>& inputs,
                                    const std::vector<const VideoSample*>& vids,
                                    const TrainConfig& cfg) {
  using namespace ad;
  BranchOutputs out;
  std::vector<CasItem> cas_items;
  std::optional<Var> acc;
  const double inv_b = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    TCamPair p = tcam_forward(inputs[i], params);
    const Eigen::Index k = topk_for(p.s.rows(), cfg.topk_divisor);
    Var term = mil_loss(p.s, p.s_bar, vids[i]->label, k);
    out.values.cls += term.scalar() * inv_b;
    if (cfg.losses.norm) {
      Var n = norm_loss(p.a);
      out.values.norm += n.scalar() * inv_b;
      term = add(term, n);
    }
    if (cfg.losses.guide) {
      Var g = guide_loss(p.a, p.s);
      out.values.guide += g.scalar() * inv_b;
      term = add(term, g);
    }
    acc = acc ? add(*acc, term) : term;
    cas_items.push_back({p.s_bar, inputs[i], vids[i]->label});
    out.tcams.push_back(p);
  }
  Var objective = scale(*acc, inv_b);
  if (cfg.losses.cas) {
    Var c = cas_loss(tape, cas_items);
    out.values.cas = c.scalar();
    objective = add(objective, c);
  }
  out.objective = objective;
  return out;
}

inline void check_trainable(const Dataset& data) {
  if (data.train.empty()) {
    throw std::invalid_argument("training requires a non-empty train split");
  }
  for (const auto& v : data.train) {
    if (std::none_of(v.label.begin(), v.label.end(),
                     [](std::uint8_t b) { return b != 0; })) {
      throw std::invalid_argument("training video " + v.id + " has no label");
    }
  }
}

template <typename F>
auto guarded(int step, F&& f) {
  try {
    return f();
  } catch (const NonFiniteError& e) {
    throw TrainingDiverged("training diverged at step " +
                           std::to_string(step) + ": " + e.what());
  }
}

/// Random derangement of [0, n) (identity for n < 2).
inline std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
  std::vector<std::size_t> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = i;
  if (n < 2) return d;
  while (true) {
    std::shuffle(d.begin(), d.end(), rng);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) ok = d[i] != i;
    if (ok) return d;
  }
}

}  // namespace detail

/// Mean-teacher baseline. `init` defaults to a fresh seeded model.
inline BranchState train_baseline(const Dataset& data, const TrainConfig& cfg,
                                  const StepObserver& observer = {},
                                  std::optional<BranchState> init = {},
                                  int iteration = 1) {
  cfg.validate();
  detail::check_trainable(data);
  BranchState state =
      init ? std::move(*init)
           : fresh_branch(model_shape(data.spec, cfg), cfg.seed,
                          kStreamInitOriginal);
  detail::BatchSampler sampler(data.train.size(), cfg.seed);

  for (int step = 1; step <= cfg.steps_per_iteration; ++step) {
    const auto batch = sampler.next(cfg.batch_size);
    detail::guarded(step, [&] {
      ad::Tape tape;
      const BoundParams student = bind(tape, state.student(), true);
      std::vector<ad::Var> inputs;
      std::vector<const VideoSample*> vids;
      for (std::size_t idx : batch) {
        vids.push_back(&data.train[idx]);
        inputs.push_back(tape.constant(data.train[idx].features));
      }
      auto ori = detail::branch_forward(tape, student, inputs, vids, cfg);

      double scc_value = 0.0;
      ad::Var objective = ori.objective;
      if (cfg.alpha > 0.0) {
        std::optional<ad::Var> scc;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          ad::Var target =
              tape.constant(infer(state.teacher(), vids[i]->features).s_bar);
          ad::Var term = scc_loss(target, ori.tcams[i].s_bar);
          scc = scc ? ad::add(*scc, term) : term;
        }
        ad::Var mean_scc =
            ad::scale(*scc, 1.0 / static_cast<double>(inputs.size()));
        scc_value = mean_scc.scalar();
        objective = ad::add(objective, ad::scale(mean_scc, cfg.alpha));
      }
      tape.backward(objective);
      state.optimize(gradients(student), cfg.lr, cfg.weight_decay);
      state.ema(cfg.ema_momentum);

      if (observer) {
        StepRecord rec;
        rec.iteration = iteration;
        rec.step = step;
        const BranchLoss branches[] = {ori.values};
        rec.loss = total_loss(branches, scc_value, cfg.alpha);
        rec.original_loss = ori.objective.scalar();
        observer(rec);
      }
      return 0;
    });
  }
  return state;
}

struct BiSccResult {
  BranchState original;
  BranchState augmented;
};

/// Dual-branch training against a frozen pseudo-label model.
inline BiSccResult train_biscc(const Dataset& data, const TrainConfig& cfg,
                               const ModelParams& pseudo_model,
                               const StepObserver& observer = {},
                               std::optional<BiSccResult> init = {},
                               int iteration = 2) {
  cfg.validate();
  detail::check_trainable(data);
  const ModelShape shape = model_shape(data.spec, cfg);
  BiSccResult st =
      init ? std::move(*init)
           : BiSccResult{fresh_branch(shape, cfg.seed, kStreamInitOriginal),
                         fresh_branch(shape, cfg.seed, kStreamInitAugmented)};
  detail::BatchSampler sampler(data.train.size(), cfg.seed);
  Rng aug_rng = make_rng(cfg.seed, kStreamAugment);
  const int views = cfg.intra_tca ? cfg.views : 1;

  for (int step = 1; step <= cfg.steps_per_iteration; ++step) {
    const auto batch = sampler.next(cfg.batch_size);
    const std::size_t b = batch.size();
    std::vector<const VideoSample*> vids;
    for (std::size_t idx : batch) vids.push_back(&data.train[idx]);

    detail::guarded(step, [&] {
      // (a) pseudo instance masks from the frozen model.
      std::vector<InstanceMask> masks;
      for (const auto* v : vids) {
        masks.push_back(
            collect_instance_mask(infer(pseudo_model, v->features).s_bar,
                                  cfg.gamma));
      }

      // (b) augmented inputs.
      std::vector<Matrix> augmented;
      if (!cfg.inter_tca) {
        for (const auto* v : vids) augmented.push_back(v->features);
      } else if (cfg.augment == AugmentKind::kTemporalContext) {
        const auto partner = detail::derangement(b, aug_rng);
        for (std::size_t i = 0; i < b; ++i) {
          // Prefer the drawn partner; fall back to any other video that has
          // context rows.
          std::size_t j = partner[i];
          auto has_context = [&](std::size_t k) {
            return std::any_of(masks[k].begin(), masks[k].end(),
                               [](std::uint8_t m) { return m == 0; });
          };
          if (j == i || !has_context(j)) {
            for (std::size_t k = 1; k < b; ++k) {
              const std::size_t cand = (j + k) % b;
              if (cand != i && has_context(cand)) {
                j = cand;
                break;
              }
            }
          }
          if (j == i) {
            augmented.push_back(vids[i]->features);
          } else {
            augmented.push_back(replace_context(vids[i]->features, masks[i],
                                                vids[j]->features, masks[j]));
          }
        }
      } else {
        for (const auto* v : vids) {
          switch (cfg.augment) {
            case AugmentKind::kGaussianNoise:
              augmented.push_back(
                  gaussian_noise_augment(v->features, 0.1, aug_rng));
              break;
            case AugmentKind::kRandomMask:
              augmented.push_back(random_mask_augment(v->features, 0.2, aug_rng));
              break;
            case AugmentKind::kResolution:
              augmented.push_back(resolution_augment(v->features, 0.5));
              break;
            case AugmentKind::kTemporalContext:
              break;
          }
        }
      }

      // (c, d) comprehensive teacher T-CAMs for both branches.
      auto comprehensive = [&](const ModelParams& teacher, const Matrix& x,
                               const InstanceMask& m) {
        std::vector<BlockPermutation> perms;
        std::vector<Matrix> outs;
        for (int k = 0; k < views; ++k) {
          perms.push_back(cfg.intra_tca
                              ? intra_tca(m, cfg.inflate, aug_rng)
                              : BlockPermutation::identity(
                                    static_cast<int>(x.rows())));
          outs.push_back(infer(teacher, apply_perm(perms.back(), x)).s_bar);
        }
        return ctg(outs, perms, cfg.ctg_mode);
      };
      std::vector<Matrix> ct_original;
      std::vector<Matrix> ct_augmented;
      for (std::size_t i = 0; i < b; ++i) {
        ct_original.push_back(
            comprehensive(st.original.teacher(), vids[i]->features, masks[i]));
        ct_augmented.push_back(
            comprehensive(st.augmented.teacher(), augmented[i], masks[i]));
      }

      // Students.
      ad::Tape tape;
      const BoundParams ori_p = bind(tape, st.original.student(), true);
      const BoundParams aug_p = bind(tape, st.augmented.student(), true);
      std::vector<ad::Var> ori_in;
      std::vector<ad::Var> aug_in;
      for (std::size_t i = 0; i < b; ++i) {
        ori_in.push_back(tape.constant(vids[i]->features));
        aug_in.push_back(tape.constant(augmented[i]));
      }
      auto ori = detail::branch_forward(tape, ori_p, ori_in, vids, cfg);
      auto aug = detail::branch_forward(tape, aug_p, aug_in, vids, cfg);

      // (e) bidirectional consistency.
      std::optional<ad::Var> bi;
      for (std::size_t i = 0; i < b; ++i) {
        ad::Var term = bi_scc_loss(tape.constant(ct_original[i]),
                                   aug.tcams[i].s_bar,
                                   tape.constant(ct_augmented[i]),
                                   ori.tcams[i].s_bar);
        bi = bi ? ad::add(*bi, term) : term;
      }
      ad::Var mean_bi = ad::scale(*bi, 1.0 / static_cast<double>(b));

      // (f) joint objective; (g) EMA.
      ad::Var objective = ad::add(ori.objective, aug.objective);
      if (cfg.alpha > 0.0) {
        objective = ad::add(objective, ad::scale(mean_bi, cfg.alpha));
      }
      tape.backward(objective);
      st.original.optimize(gradients(ori_p), cfg.lr, cfg.weight_decay);
      st.augmented.optimize(gradients(aug_p), cfg.lr, cfg.weight_decay);
      st.original.ema(cfg.ema_momentum);
      st.augmented.ema(cfg.ema_momentum);

      if (observer) {
        StepRecord rec;
        rec.iteration = iteration;
        rec.step = step;
        const BranchLoss branches[] = {ori.values, aug.values};
        rec.loss = total_loss(branches, mean_bi.scalar(), cfg.alpha);
        rec.original_loss = ori.objective.scalar();
        observer(rec);
      }
      return 0;
    });
  }
  return st;
}

// ---------------------------------------------------------------------------
// Evaluation and the outer loop.

inline const std::vector<double>& default_eval_ious() {
  static const std::vector<double> v = {0.3, 0.5, 0.7};
  return v;
}

struct EvalMetrics {
  MapResult map;
  double coscene_fp_rate = 0.0;

  double map_at(double iou) const {
    for (std::size_t i = 0; i < map.iou_thresholds.size(); ++i) {
      if (std::abs(map.iou_thresholds[i] - iou) < 1e-9) return map.map[i];
    }
    return std::nan("");
  }
};

inline EvalMetrics evaluate_model(const ModelParams& params,
                                  const std::vector<VideoSample>& videos,
                                  int num_classes, const LocalizeConfig& loc,
                                  std::span<const double> ious, double gamma) {
  EvalMetrics m;
  m.map = evaluate_map(localize_all(params, videos, loc), ground_truth(videos),
                       ious, num_classes);
  m.coscene_fp_rate = coscene_false_positive_rate(params, videos, gamma);
  return m;
}

/// Micro-averaged pseudo-label precision over a split.
inline double pseudo_label_precision(const ModelParams& params,
                                     const std::vector<VideoSample>& videos,
                                     double gamma) {
  PrecisionCount pc;
  for (const auto& v : videos) {
    pc += pseudo_precision_count(
        collect_instance_mask(infer(params, v.features).s_bar, gamma),
        v.gt_segments);
  }
  return pc.value();
}

struct IterationMetrics {
  int iteration = 0;
  double q = 0.0;
  EvalMetrics eval;
};

struct IterateResult {
  BranchState baseline;
  /// Equal to the baseline when only one iteration runs.
  BranchState original;
  std::optional<BranchState> augmented;
  std::vector<IterationMetrics> iterations;
};

using IterationObserver =
    std::function<void(const IterationMetrics&, const StepRecord& last)>;

/// Iteration 1 trains the baseline. Every later iteration warm-starts both
/// branches from the previous one, so iteration 2 starts each branch from a
/// copy of the baseline. The pseudo-label model after iteration i is the
/// original-branch student of iteration i.
inline IterateResult iterate(const Dataset& data, const TrainConfig& cfg,
                             const LocalizeConfig& loc = {},
                             const StepObserver& on_step = {},
                             const IterationObserver& on_iteration = {},
                             std::span<const double> eval_ious =
                                 default_eval_ious()) {
  cfg.validate();
  IterateResult res;
  StepRecord last;
  auto record_step = [&](const StepRecord& r) {
    last = r;
    if (on_step) on_step(r);
  };
  auto finish_iteration = [&](int itr, const ModelParams& model) {
    IterationMetrics m;
    m.iteration = itr;
    m.q = pseudo_label_precision(model, data.train, cfg.gamma);
    m.eval = evaluate_model(model, data.test, data.spec.num_classes, loc,
                            eval_ious, cfg.gamma);
    res.iterations.push_back(m);
    if (on_iteration) on_iteration(m, last);
  };

  res.baseline = train_baseline(data, cfg, record_step, std::nullopt, 1);
  res.original = res.baseline;
  finish_iteration(1, res.baseline.student());

  std::optional<BiSccResult> warm = BiSccResult{res.baseline, res.baseline};
  ModelParams pseudo = res.baseline.student();
  for (int itr = 2; itr <= cfg.iterations; ++itr) {
    BiSccResult out = train_biscc(data, cfg, pseudo, record_step, warm, itr);
    pseudo = out.original.student();
    res.original = out.original;
    res.augmented = out.augmented;
    warm = std::move(out);
    finish_iteration(itr, pseudo);
  }
  return res;
}

}  // namespace biscc

#endif  // BISCC_TRAINER_HPP_
