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

#include "biscc/trainer.hpp"

#include <gtest/gtest.h>

namespace biscc {
namespace {

SyntheticSpec tiny_spec(std::uint64_t seed = 1) {
  SyntheticSpec s;
  s.segments_per_video = 32;
  s.feature_dim = 16;
  s.num_classes = 3;
  s.num_train = 24;
  s.num_test = 8;
  s.length_min = 2;
  s.length_max = 6;
  s.seed = seed;
  return s;
}

TrainConfig tiny_config(int steps, std::uint64_t seed = 1) {
  TrainConfig c;
  c.steps_per_iteration = steps;
  c.batch_size = 4;
  c.seed = seed;
  return c;
}

double param_distance(const ModelParams& a, const ModelParams& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kNumParams; ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s);
}

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(TrainConfig{}.validate());
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), std::invalid_argument);
  };
  bad([](TrainConfig& c) { c.alpha = -0.1; });
  bad([](TrainConfig& c) { c.gamma = 1.0; });
  bad([](TrainConfig& c) { c.views = 0; });
  bad([](TrainConfig& c) { c.ema_momentum = 1.5; });
  bad([](TrainConfig& c) { c.iterations = 0; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
}

TEST(Ema, Arithmetic) {
  const ModelShape shape{4, 4, 2};
  ModelParams teacher(shape);
  ModelParams student(shape);
  for (std::size_t i = 0; i < kNumParams; ++i) student[i].setOnes();
  ModelParams t = teacher;
  ema_update(t, student, 0.999);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    EXPECT_TRUE(t[i].isApproxToConstant(0.001, 1e-15));
  }
  t = teacher;
  ema_update(t, student, 0.0);
  EXPECT_EQ(t, student);
  t = teacher;
  ema_update(t, student, 1.0);
  EXPECT_EQ(t, teacher);
  EXPECT_THROW(ema_update(t, ModelParams(ModelShape{4, 4, 3}), 0.5), ShapeError);
}

TEST(AdamW, ZeroGradientAppliesOnlyWeightDecay) {
  const ModelShape shape{4, 4, 2};
  Rng rng = make_rng(3, kStreamInitOriginal);
  ModelParams p = ModelParams::initialize(shape, rng);
  const ModelParams before = p;
  std::array<Matrix, kNumParams> zero;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    zero[i] = Matrix::Zero(p[i].rows(), p[i].cols());
  }
  AdamW opt;
  opt.step(p, zero, 0.1, 0.01);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    EXPECT_TRUE(p[i].isApprox(before[i] * (1.0 - 0.1 * 0.01), 1e-15));
  }
  EXPECT_EQ(opt.steps(), 1);
}

TEST(AdamW, FirstStepMovesBySignTimesLr) {
  const ModelShape shape{4, 4, 2};
  ModelParams p(shape);
  std::array<Matrix, kNumParams> g;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    g[i] = Matrix::Constant(p[i].rows(), p[i].cols(), i % 2 ? 3.0 : -0.5);
  }
  AdamW opt;
  opt.step(p, g, 0.01, 0.0);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    EXPECT_TRUE(p[i].isApproxToConstant(i % 2 ? -0.01 : 0.01, 1e-7));
  }
}

TEST(Baseline, ZeroLearningRateLeavesStudentUnchanged) {
  const Dataset d = generate_synthetic(tiny_spec());
  TrainConfig c = tiny_config(5);
  c.lr = 0.0;
  const BranchState s = train_baseline(d, c);
  const BranchState init =
      fresh_branch(model_shape(d.spec, c), c.seed, kStreamInitOriginal);
  EXPECT_EQ(s.student(), init.student());
  EXPECT_LT(param_distance(s.teacher(), init.teacher()), 1e-12);
  EXPECT_EQ(s.optimizer_steps(), 5);
}

TEST(Baseline, Deterministic) {
  const Dataset d = generate_synthetic(tiny_spec());
  const TrainConfig c = tiny_config(20);
  const BranchState a = train_baseline(d, c);
  const BranchState b = train_baseline(d, c);
  EXPECT_EQ(a.student(), b.student());
  EXPECT_EQ(a.teacher(), b.teacher());
  const BranchState other = train_baseline(d, tiny_config(20, 2));
  EXPECT_FALSE(a.student() == other.student());
}

TEST(Baseline, ObserverSeesEveryStep) {
  const Dataset d = generate_synthetic(tiny_spec());
  std::vector<StepRecord> recs;
  train_baseline(d, tiny_config(7),
                 [&](const StepRecord& r) { recs.push_back(r); });
  ASSERT_EQ(recs.size(), 7u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& l = recs[i].loss;
    EXPECT_EQ(recs[i].step, static_cast<int>(i + 1));
    EXPECT_NEAR(l.total, l.cls + l.norm + l.guide + l.cas + l.alpha * l.bi_scc,
                1e-12);
    EXPECT_TRUE(std::isfinite(l.total));
  }
}

TEST(Baseline, RejectsUnlabeledOrEmptyData) {
  Dataset d = generate_synthetic(tiny_spec());
  Dataset empty = d;
  empty.train.clear();
  EXPECT_THROW(train_baseline(empty, tiny_config(1)), std::invalid_argument);
  std::fill(d.train[0].label.begin(), d.train[0].label.end(), 0);
  EXPECT_THROW(train_baseline(d, tiny_config(1)), std::invalid_argument);
}

TEST(Baseline, DivergenceIsReported) {
  const Dataset d = generate_synthetic(tiny_spec());
  TrainConfig c = tiny_config(10);
  c.lr = 1e300;
  EXPECT_THROW(train_baseline(d, c), TrainingDiverged);
}

TEST(Baseline, SeparableNoiselessDataIsClassified) {
  SyntheticSpec s;
  s.scene_correlation = 0.0;
  s.noise_sigma = 0.0;
  s.seed = 4;
  s.num_train = 100;
  s.num_test = 100;
  const Dataset d = generate_synthetic(s);
  TrainConfig c;
  c.steps_per_iteration = 500;
  c.seed = 4;
  const BranchState st = train_baseline(d, c);
  int correct = 0;
  for (const auto& v : d.test) {
    const TCamValues out = infer(st.student(), v.features);
    ad::Tape t;
    const Matrix p =
        video_class_probs(t.constant(out.s_bar), topk_for(out.s_bar.rows()))
            .value();
    Eigen::Index row = 0;
    Eigen::Index best = 0;
    p.leftCols(s.num_classes).maxCoeff(&row, &best);
    correct += v.label[static_cast<std::size_t>(best)] ? 1 : 0;
  }
  EXPECT_GT(correct, 95);
}

TEST(Baseline, TeacherLagShrinksWithLearningRate) {
  const Dataset d = generate_synthetic(tiny_spec());
  TrainConfig fast = tiny_config(100);
  TrainConfig slow = fast;
  slow.lr = fast.lr / 10.0;
  const BranchState a = train_baseline(d, fast);
  const BranchState b = train_baseline(d, slow);
  const double lag_fast = param_distance(a.teacher(), a.student());
  const double lag_slow = param_distance(b.teacher(), b.student());
  EXPECT_GT(lag_fast, 0.0);
  EXPECT_LT(lag_slow, lag_fast);
}

TEST(BiScc, ReducesToBaselineWithoutConsistencyOrAugmentation) {
  const Dataset d = generate_synthetic(tiny_spec(5));
  TrainConfig c = tiny_config(50, 5);
  c.alpha = 0.0;
  c.inter_tca = false;
  c.intra_tca = false;
  std::vector<double> base;
  std::vector<double> dual;
  const BranchState b = train_baseline(
      d, c, [&](const StepRecord& r) { base.push_back(r.original_loss); });
  const BranchState pseudo =
      fresh_branch(model_shape(d.spec, c), c.seed, kStreamInitOriginal);
  const BiSccResult r = train_biscc(
      d, c, pseudo.student(),
      [&](const StepRecord& s) { dual.push_back(s.original_loss); });
  ASSERT_EQ(base.size(), 50u);
  EXPECT_EQ(base, dual);
  EXPECT_EQ(b.student(), r.original.student());
}

TEST(BiScc, DeterministicWithAugmentation) {
  const Dataset d = generate_synthetic(tiny_spec(6));
  const TrainConfig c = tiny_config(8, 6);
  const BranchState pseudo = train_baseline(d, c);
  const BiSccResult a = train_biscc(d, c, pseudo.student());
  const BiSccResult b = train_biscc(d, c, pseudo.student());
  EXPECT_EQ(a.original.student(), b.original.student());
  EXPECT_EQ(a.augmented.teacher(), b.augmented.teacher());
}

TEST(BiScc, LossBreakdownIsConsistent) {
  const Dataset d = generate_synthetic(tiny_spec(7));
  const TrainConfig c = tiny_config(6, 7);
  const BranchState pseudo = train_baseline(d, c);
  std::vector<StepRecord> recs;
  train_biscc(d, c, pseudo.student(),
              [&](const StepRecord& r) { recs.push_back(r); });
  ASSERT_EQ(recs.size(), 6u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.iteration, 2);
    EXPECT_GE(r.loss.bi_scc, 0.0);
    EXPECT_NEAR(r.loss.total,
                r.loss.cls + r.loss.norm + r.loss.guide + r.loss.cas +
                    c.alpha * r.loss.bi_scc,
                1e-12);
  }
}

TEST(Iterate, SingleIterationIsBaseline) {
  const Dataset d = generate_synthetic(tiny_spec(8));
  TrainConfig c = tiny_config(10, 8);
  c.iterations = 1;
  const IterateResult r = iterate(d, c);
  EXPECT_EQ(r.baseline.student(), train_baseline(d, c).student());
  EXPECT_EQ(r.original.student(), r.baseline.student());
  EXPECT_FALSE(r.augmented.has_value());
  ASSERT_EQ(r.iterations.size(), 1u);
}

TEST(Iterate, RecordsEveryIteration) {
  const Dataset d = generate_synthetic(tiny_spec(9));
  TrainConfig c = tiny_config(6, 9);
  c.iterations = 3;
  int seen = 0;
  const IterateResult r =
      iterate(d, c, {}, {}, [&](const IterationMetrics&, const StepRecord& s) {
        ++seen;
        EXPECT_EQ(s.step, 6);
      });
  EXPECT_EQ(seen, 3);
  ASSERT_EQ(r.iterations.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(r.iterations[static_cast<std::size_t>(i)].iteration, i + 1);
    const double q = r.iterations[static_cast<std::size_t>(i)].q;
    EXPECT_GE(q, 0.0);
    EXPECT_LE(q, 1.0);
  }
  ASSERT_TRUE(r.augmented.has_value());
  // Both branches continue from the baseline, so their optimizers carry the
  // baseline's step count forward.
  EXPECT_EQ(r.original.optimizer_steps(), 18);
  EXPECT_EQ(r.augmented->optimizer_steps(), 18);
}

}  // namespace
}  // namespace biscc
