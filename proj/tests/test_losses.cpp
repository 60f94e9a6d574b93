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

#include "biscc/losses.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "grad_cases.hpp"

namespace biscc {
namespace {

using Label = std::vector<std::uint8_t>;

TEST(VideoClassProbs, TopOneIsColumnMax) {
  ad::Tape t;
  Matrix s(8, 2);
  s.col(0).setConstant(1.0);
  s.col(1).setConstant(2.0);
  const Matrix p = video_class_probs(t.constant(s), topk_for(8)).value();
  const double e = std::exp(1.0);
  EXPECT_NEAR(p(0, 0), 1.0 / (1.0 + e), 1e-15);
  EXPECT_NEAR(p(0, 1), e / (1.0 + e), 1e-15);
}

TEST(VideoClassProbs, UniformAndNormalized) {
  ad::Tape t;
  const Matrix p = video_class_probs(t.constant(Matrix::Zero(16, 6)), 2).value();
  EXPECT_TRUE(p.isApproxToConstant(1.0 / 6.0, 1e-15));
  std::mt19937 rng(1);
  for (int i = 0; i < 20; ++i) {
    const Matrix s = testing::random_matrix(24, 6, rng, -5.0, 5.0);
    EXPECT_NEAR(video_class_probs(t.constant(s), 3).value().sum(), 1.0, 1e-9);
  }
}

TEST(TopkFor, Rule) {
  EXPECT_EQ(topk_for(64), 8);
  EXPECT_EQ(topk_for(8), 1);
  EXPECT_EQ(topk_for(7), 1);
  EXPECT_EQ(topk_for(1), 1);
  EXPECT_EQ(topk_for(17), 2);
}

TEST(MilLoss, UniformPredictionSingleLabel) {
  // Uniform p gives log(C+1) for each of the two heads.
  ad::Tape t;
  const Matrix z = Matrix::Zero(8, 5);
  const double v =
      mil_loss(t.constant(z), t.constant(z), Label{0, 1, 0, 0}, 1).scalar();
  EXPECT_NEAR(v, 2.0 * std::log(5.0), 1e-12);
}

TEST(MilLoss, ApproachesEntropyFloor) {
  const Label y{1, 0, 1};
  // Logits favouring exactly the normalized label support of each head.
  Matrix s = Matrix::Constant(8, 4, -40.0);
  s.col(0).setZero();
  s.col(2).setZero();
  s.col(3).setZero();
  Matrix s_bar = Matrix::Constant(8, 4, -40.0);
  s_bar.col(0).setZero();
  s_bar.col(2).setZero();
  ad::Tape t;
  const double v = mil_loss(t.constant(s), t.constant(s_bar), y, 1).scalar();
  EXPECT_NEAR(v, mil_entropy_floor(y), 1e-12);
  EXPECT_NEAR(mil_entropy_floor(y), std::log(3.0) + std::log(2.0), 1e-15);
}

TEST(MilLoss, NeverBelowFloor) {
  std::mt19937 rng(2);
  for (int i = 0; i < 200; ++i) {
    Label y(4, 0);
    for (auto& b : y) b = rng() % 2;
    y[rng() % 4] = 1;
    ad::Tape t;
    const Matrix s = testing::random_matrix(16, 5, rng, -6.0, 6.0);
    const Matrix sb = testing::random_matrix(16, 5, rng, -6.0, 6.0);
    const double v = mil_loss(t.constant(s), t.constant(sb), y, 2).scalar();
    EXPECT_GE(v - mil_entropy_floor(y), -1e-12);
    EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(MilLoss, RejectsBadLabels) {
  ad::Tape t;
  const ad::Var z = t.constant(Matrix::Zero(8, 3));
  EXPECT_THROW(mil_loss(z, z, Label{0, 0}, 1), std::invalid_argument);
  EXPECT_THROW(mil_loss(z, z, Label{1, 0, 0}, 1), ShapeError);
}

TEST(NormLoss, Examples) {
  ad::Tape t;
  EXPECT_DOUBLE_EQ(norm_loss(t.constant(Matrix::Zero(4, 1))).scalar(), 0.0);
  EXPECT_DOUBLE_EQ(norm_loss(t.constant(Matrix::Ones(4, 1))).scalar(), 1.0);
  Matrix a(2, 1);
  a << 0.2, 0.4;
  EXPECT_NEAR(norm_loss(t.constant(a)).scalar(), 0.3, 1e-15);
}

TEST(GuideLoss, Examples) {
  ad::Tape t;
  // Background dominating everywhere with A = 1 gives 1.
  Matrix s = Matrix::Zero(3, 4);
  s.col(3).setConstant(800.0);
  EXPECT_NEAR(guide_loss(t.constant(Matrix::Ones(3, 1)), t.constant(s)).scalar(),
              1.0, 1e-15);
  // A equal to the foreground complement gives 0.
  std::mt19937 rng(3);
  const Matrix r = testing::random_matrix(6, 4, rng);
  const Matrix p = softmax_rows_value(r);
  const Matrix a = (1.0 - p.col(3).array()).matrix();
  EXPECT_NEAR(guide_loss(t.constant(a), t.constant(r)).scalar(), 0.0, 1e-15);
}

TEST(GuideLoss, BoundedInUnitInterval) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    ad::Tape t;
    Matrix a(10, 1);
    for (Eigen::Index r = 0; r < 10; ++r) a(r, 0) = u(rng);
    const double v = guide_loss(t.constant(a),
                                t.constant(testing::random_matrix(10, 6, rng,
                                                                  -8.0, 8.0)))
                         .scalar();
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  ad::Tape t;
  EXPECT_THROW(guide_loss(t.constant(Matrix::Zero(3, 1)),
                          t.constant(Matrix::Zero(4, 2))),
               ShapeError);
}

TEST(CasLoss, NoSharedClassIsZero) {
  ad::Tape t;
  const Label y1{1, 0};
  const Label y2{0, 1};
  std::mt19937 rng(5);
  const std::vector<CasItem> items = {
      {t.constant(testing::random_matrix(6, 3, rng)),
       t.constant(testing::random_matrix(6, 4, rng)), y1},
      {t.constant(testing::random_matrix(6, 3, rng)),
       t.constant(testing::random_matrix(6, 4, rng)), y2}};
  EXPECT_EQ(cas_loss(t, items).scalar(), 0.0);
  EXPECT_EQ(cas_loss(t, std::span<const CasItem>{}).scalar(), 0.0);
}

TEST(CasLoss, OrthogonalLowFeaturesLeaveHingeInactive) {
  // Two videos whose class-0 mass sits on identical feature rows and whose
  // remaining rows are orthogonal to them.
  ad::Tape t;
  const Label y{1};
  Matrix s_bar = Matrix::Zero(2, 2);
  s_bar(0, 0) = 60.0;
  s_bar(1, 0) = -60.0;
  Matrix x(2, 2);
  x << 1.0, 0.0, 0.0, 1.0;
  const std::vector<CasItem> items = {{t.constant(s_bar), t.constant(x), y},
                                      {t.constant(s_bar), t.constant(x), y}};
  EXPECT_NEAR(cas_loss(t, items).scalar(), 0.0, 1e-12);
  // Identical high and low pools leave only the margin.
  const Matrix flat = Matrix::Zero(2, 2);
  const Matrix same = Matrix::Ones(2, 2);
  const std::vector<CasItem> tied = {{t.constant(flat), t.constant(same), y},
                                     {t.constant(flat), t.constant(same), y}};
  EXPECT_NEAR(cas_loss(t, tied).scalar(), kCasMargin, 1e-12);
}

TEST(CasLoss, NonNegativeOnRandomBatches) {
  std::mt19937 rng(6);
  for (int i = 0; i < 50; ++i) {
    ad::Tape t;
    std::vector<Label> labels(4, Label{0, 0, 0});
    for (auto& l : labels) l[rng() % 3] = 1;
    std::vector<CasItem> items;
    for (const auto& l : labels) {
      items.push_back({t.constant(testing::random_matrix(8, 4, rng)),
                       t.constant(testing::random_matrix(8, 5, rng)), l});
    }
    EXPECT_GE(cas_loss(t, items).scalar(), 0.0);
  }
}

TEST(SccLoss, Properties) {
  std::mt19937 rng(7);
  ad::Tape t;
  const Matrix a = testing::random_matrix(5, 4, rng);
  const Matrix b = testing::random_matrix(5, 4, rng);
  EXPECT_NEAR(scc_loss(t.constant(a), t.constant(a)).scalar(), 0.0, 1e-15);
  EXPECT_GE(scc_loss(t.constant(a), t.constant(b)).scalar(), 0.0);
  Matrix shifted = a;
  for (Eigen::Index r = 0; r < shifted.rows(); ++r) {
    shifted.row(r).array() += 0.37 * static_cast<double>(r + 1);
  }
  EXPECT_NEAR(scc_loss(t.constant(a), t.constant(shifted)).scalar(), 0.0,
              1e-12);
  EXPECT_THROW(scc_loss(t.constant(a), t.constant(Matrix::Zero(5, 3))),
               ShapeError);
}

TEST(SccLoss, TeacherReceivesNoGradient) {
  std::mt19937 rng(8);
  ad::Tape t;
  ad::Var teacher = t.leaf(testing::random_matrix(4, 3, rng), true);
  ad::Var student = t.leaf(testing::random_matrix(4, 3, rng), true);
  t.backward(scc_loss(teacher, student));
  EXPECT_TRUE(teacher.grad().isZero(0.0));
  EXPECT_FALSE(student.grad().isZero(0.0));
}

TEST(BiSccLoss, DecompositionAndSymmetry) {
  std::mt19937 rng(9);
  ad::Tape t;
  std::vector<ad::Var> v;
  for (int i = 0; i < 4; ++i) {
    v.push_back(t.constant(testing::random_matrix(6, 4, rng)));
  }
  const double bi = bi_scc_loss(v[0], v[1], v[2], v[3]).scalar();
  const double parts =
      scc_loss(v[0], v[1]).scalar() + scc_loss(v[2], v[3]).scalar();
  EXPECT_EQ(bi, parts);
  EXPECT_NEAR(bi_scc_loss(v[2], v[3], v[0], v[1]).scalar(), bi, 1e-15);
  EXPECT_EQ(bi_scc_loss(v[0], v[0], v[0], v[0]).scalar(), 0.0);
}

TEST(TotalLoss, WeightedSum) {
  const BranchLoss ori{1.0, 0.0, 0.0, 0.0};
  const BranchLoss aug{0.5, 0.25, 0.125, 0.125};
  const BranchLoss both[] = {ori, aug};
  const LossBreakdown b = total_loss(both, 2.0, 0.25);
  EXPECT_DOUBLE_EQ(b.total, 2.5);
  EXPECT_DOUBLE_EQ(b.cls + b.norm + b.guide + b.cas + b.alpha * b.bi_scc,
                   b.total);
  EXPECT_EQ(total_loss(both, 123.0, 0.0).total, total_loss(both, 0.0, 0.0).total);
  EXPECT_THROW(total_loss(both, 1.0, -0.1), std::invalid_argument);
}

}  // namespace
}  // namespace biscc
