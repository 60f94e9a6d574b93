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

#include "biscc/localize.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace biscc {
namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("biscc_loc_" + std::to_string(::getpid()) + "_" + name);
}

TEST(SelectClasses, Examples) {
  const std::vector<double> uniform(6, 1.0 / 6.0);
  EXPECT_TRUE(select_classes(uniform, 0.2).empty());
  const std::vector<double> one_hot = {0.0, 0.0, 1.0, 0.0};
  const auto c = select_classes(one_hot, 0.999);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].cls, 2);
  EXPECT_EQ(select_classes(uniform, 0.0).size(), 5u);
  // The background entry is never selected.
  EXPECT_TRUE(select_classes(std::vector<double>{0.1, 0.9}, 0.2).empty());
}

TEST(TemporalIou, Examples) {
  EXPECT_EQ(temporal_iou({2, 7}, {2, 7}), 1.0);
  EXPECT_EQ(temporal_iou({0, 3}, {3, 6}), 0.0);
  EXPECT_DOUBLE_EQ(temporal_iou({0, 10}, {5, 15}), 1.0 / 3.0);
  EXPECT_THROW(temporal_iou({3, 3}, {0, 4}), std::invalid_argument);
  std::mt19937 rng(1);
  for (int i = 0; i < 500; ++i) {
    const int s1 = static_cast<int>(rng() % 20);
    const int s2 = static_cast<int>(rng() % 20);
    const int e1 = s1 + 1 + static_cast<int>(rng() % 10);
    const int e2 = s2 + 1 + static_cast<int>(rng() % 10);
    EXPECT_DOUBLE_EQ(temporal_iou({s1, e1}, {s2, e2}),
                     testing::iou_by_counting(s1, e1, s2, e2));
  }
}

TEST(OuterInner, HandExample) {
  std::vector<double> col(10, 0.1);
  for (int t = 4; t < 8; ++t) col[static_cast<std::size_t>(t)] = 0.9;
  EXPECT_NEAR(outer_inner_score(col, 4, 8, 0.5), 0.3667, 1e-4);
  EXPECT_NEAR(outer_inner_score(col, 4, 8, 0.5), 0.9 - 3.8 / 6.0 + 0.1, 1e-15);
}

TEST(OuterInner, FlatColumnGivesPriorBonus) {
  const std::vector<double> col(12, 0.37);
  for (int s = 0; s < 12; ++s) {
    for (int e = s + 1; e <= 12; ++e) {
      EXPECT_DOUBLE_EQ(outer_inner_score(col, s, e, 0.8), 0.2 * 0.8);
    }
  }
}

TEST(OuterInner, ClampsAtEdges) {
  const std::vector<double> col = {1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
  // s = 0: l = 1, window is [0, 3).
  EXPECT_DOUBLE_EQ(outer_inner_score(col, 0, 2, 0.0), 1.0 - 2.0 / 3.0);
  EXPECT_THROW(outer_inner_score(col, 3, 3, 0.0), std::invalid_argument);
  EXPECT_THROW(outer_inner_score(col, 0, 7, 0.0), std::invalid_argument);
}

TEST(OuterInner, OuterOnlyVariant) {
  std::vector<double> col(10, 0.1);
  for (int t = 4; t < 8; ++t) col[static_cast<std::size_t>(t)] = 0.9;
  EXPECT_NEAR(outer_inner_score(col, 4, 8, 0.5, true), 0.9 - 0.1 + 0.1, 1e-15);
}

TEST(OuterInner, MatchesReferenceOnRandomColumns) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const int t_len = 1 + static_cast<int>(rng() % 40);
    std::vector<double> col(static_cast<std::size_t>(t_len));
    for (auto& v : col) v = u(rng);
    const int s = static_cast<int>(rng() % static_cast<unsigned>(t_len));
    const int e = s + 1 + static_cast<int>(rng() % static_cast<unsigned>(t_len - s));
    const double p = u(rng);
    EXPECT_NEAR(outer_inner_score(col, s, e, p),
                testing::outer_inner_reference(col, s, e, p), 1e-12);
  }
}

TEST(GenerateProposals, RunsAtOneThreshold) {
  const std::vector<double> att = {0.9, 0.9, 0.1, 0.9};
  const Matrix probs = Matrix::Constant(4, 2, 0.5);
  const std::vector<ClassScore> cls = {{0, 0.7}};
  const std::vector<double> th = {0.5};
  const auto p = generate_proposals(att, probs, cls, th, "v");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].start, 0);
  EXPECT_EQ(p[0].end, 2);
  EXPECT_EQ(p[1].start, 3);
  EXPECT_EQ(p[1].end, 4);
  EXPECT_DOUBLE_EQ(p[0].conf, 0.2 * 0.7);
}

TEST(GenerateProposals, EmptyCases) {
  const std::vector<double> att(5, 0.05);
  const Matrix probs = Matrix::Constant(5, 3, 0.3);
  const std::vector<ClassScore> cls = {{0, 0.7}, {1, 0.4}};
  EXPECT_TRUE(generate_proposals(att, probs, cls,
                                 default_attention_thresholds())
                  .empty());
  EXPECT_TRUE(generate_proposals(std::vector<double>(5, 0.9), probs, {},
                                 default_attention_thresholds())
                  .empty());
  EXPECT_THROW(generate_proposals(att, probs, cls, {}), std::invalid_argument);
  EXPECT_THROW(generate_proposals(att, Matrix::Zero(4, 3), cls,
                                  default_attention_thresholds()),
               ShapeError);
}

TEST(GenerateProposals, NestedThresholds) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> att(30);
    for (auto& a : att) a = u(rng);
    const double t1 = u(rng);
    const double t2 = t1 + (1.0 - t1) * u(rng);
    InstanceMask m1(att.size());
    InstanceMask m2(att.size());
    for (std::size_t t = 0; t < att.size(); ++t) {
      m1[t] = att[t] > t1;
      m2[t] = att[t] > t2;
    }
    const auto r1 = mask_to_instances(m1);
    for (const auto& r : mask_to_instances(m2)) {
      EXPECT_TRUE(std::any_of(r1.begin(), r1.end(), [&](const Interval& o) {
        return o.start <= r.start && r.end <= o.end;
      }));
    }
  }
}

TEST(GenerateProposals, DuplicatesKeepBestConfidence) {
  // Both thresholds yield the run [1, 3); each class appears once.
  const std::vector<double> att = {0.0, 0.8, 0.8, 0.0};
  Matrix probs = Matrix::Zero(4, 3);
  probs.col(0) << 0.1, 0.9, 0.9, 0.1;
  const std::vector<ClassScore> cls = {{0, 0.5}, {1, 0.3}};
  const std::vector<double> th = {0.2, 0.6};
  const auto p = generate_proposals(att, probs, cls, th);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].cls, 0);
  EXPECT_EQ(p[1].cls, 1);
}

TEST(Nms, Examples) {
  const std::vector<Proposal> chain = {{"v", 0, 0, 10, 0.9},
                                       {"v", 0, 5, 15, 0.8},
                                       {"v", 0, 12, 20, 0.7}};
  const auto kept = nms(chain, 0.3);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].start, 0);
  EXPECT_EQ(kept[1].start, 12);

  const auto dup = nms({{"v", 1, 2, 6, 0.8}, {"v", 1, 2, 6, 0.9}}, 0.45);
  ASSERT_EQ(dup.size(), 1u);
  EXPECT_EQ(dup[0].conf, 0.9);

  EXPECT_EQ(nms({{"v", 0, 0, 3, 0.5}, {"v", 0, 5, 8, 0.4}}, 0.45).size(), 2u);
  // Different classes and different videos never suppress each other.
  EXPECT_EQ(nms({{"v", 0, 0, 3, 0.5}, {"v", 1, 0, 3, 0.4}, {"w", 0, 0, 3, 0.3}},
                0.45)
                .size(),
            3u);
}

TEST(Nms, InvariantToInputOrder) {
  std::mt19937 rng(4);
  for (int i = 0; i < 50; ++i) {
    std::vector<Proposal> p;
    for (int k = 0; k < 12; ++k) {
      const int s = static_cast<int>(rng() % 20);
      p.push_back({"v", static_cast<int>(rng() % 2), s,
                   s + 1 + static_cast<int>(rng() % 6), 0.01 * k + 0.001});
    }
    const auto ref = nms(p, 0.45);
    std::shuffle(p.begin(), p.end(), rng);
    EXPECT_EQ(nms(p, 0.45), ref);
  }
}

TEST(AveragePrecision, Examples) {
  const std::vector<GtInstance> gt = {{"v", 0, 10, 20}};
  const std::vector<Proposal> props = {{"v", 0, 30, 40, 0.95},
                                       {"v", 0, 10, 20, 0.9}};
  const std::vector<double> ious = {0.5};
  EXPECT_DOUBLE_EQ(evaluate_map(props, gt, ious, 1).map[0], 0.5);

  const std::vector<GtInstance> gts = {{"a", 0, 0, 4}, {"a", 1, 6, 9},
                                       {"b", 0, 2, 5}};
  std::vector<Proposal> exact;
  for (const auto& g : gts) exact.push_back({g.video_id, g.cls, g.start, g.end, 0.5});
  const std::vector<double> all = {0.3, 0.5, 0.7};
  const MapResult r = evaluate_map(exact, gts, all, 3);
  for (double m : r.map) EXPECT_EQ(m, 1.0);
  EXPECT_EQ(r.average, 1.0);
  EXPECT_TRUE(std::isnan(r.ap[0][2]));
  EXPECT_EQ(evaluate_map({}, gts, all, 3).average, 0.0);
}

TEST(EvaluateMap, MatchesBruteForceOracle) {
  std::mt19937 rng(5);
  const std::vector<double> ious = {0.3, 0.5, 0.7};
  for (int i = 0; i < 500; ++i) {
    const auto inst = testing::random_map_instance(rng);
    const MapResult r = evaluate_map(inst.props, inst.gt, ious, inst.num_classes);
    for (std::size_t k = 0; k < ious.size(); ++k) {
      EXPECT_EQ(r.map[k], testing::brute_force_map(inst.props, inst.gt,
                                                   inst.num_classes, ious[k]));
    }
  }
}

TEST(EvaluateMap, MonotoneInThreshold) {
  std::mt19937 rng(6);
  const std::vector<double> ious = {0.1, 0.3, 0.5, 0.7, 0.9};
  for (int i = 0; i < 500; ++i) {
    const auto inst = testing::random_map_instance(rng);
    const MapResult r = evaluate_map(inst.props, inst.gt, ious, inst.num_classes);
    for (std::size_t k = 1; k < ious.size(); ++k) {
      EXPECT_LE(r.map[k], r.map[k - 1] + 1e-15);
    }
  }
}

TEST(PseudoPrecision, Examples) {
  const std::vector<LabeledInterval> gt = {{0, 2, 5}};
  EXPECT_EQ(pseudo_precision(InstanceMask{0, 0, 1, 1, 0, 0}, gt), 1.0);
  EXPECT_EQ(pseudo_precision(InstanceMask{1, 1, 0, 0, 0, 1}, gt), 0.0);
  EXPECT_EQ(pseudo_precision(InstanceMask{0, 1, 1, 1, 1, 0}, gt), 0.75);
  EXPECT_EQ(pseudo_precision(InstanceMask(6, 0), gt), 1.0);
}

TEST(ProposalsCsv, RoundTrip) {
  const std::vector<Proposal> p = {{"video_0001", 3, 4, 9, 0.1234567890123},
                                   {"video_0002", 0, 0, 1, -0.5}};
  const auto path = temp_path("props.csv");
  write_proposals_csv(path, p);
  EXPECT_EQ(read_proposals_csv(path), p);
  std::filesystem::remove(path);
}

TEST(ProposalsCsv, RejectsMalformedFiles) {
  const auto path = temp_path("bad.csv");
  auto check = [&](const std::string& body) {
    std::ofstream(path) << body;
    EXPECT_THROW(read_proposals_csv(path), FormatError) << body;
  };
  check("");
  check("id,cls\n");
  check("video_id,class,start,end,conf\nv,1,2\n");
  check("video_id,class,start,end,conf\nv,x,2,3,0.5\n");
  check("video_id,class,start,end,conf\nv,1,3,3,0.5\n");
  check("video_id,class,start,end,conf\nv,1,2,3,nan\n");
  std::filesystem::remove(path);
  EXPECT_THROW(read_proposals_csv(temp_path("missing.csv")), std::runtime_error);
}

TEST(MapReport, Format) {
  MapResult r;
  r.iou_thresholds = {0.3, 0.5};
  r.map = {0.75, 0.25};
  r.average = 0.5;
  const auto path = temp_path("map.csv");
  write_map_report(path, r);
  std::ifstream in(path);
  const std::string body((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  EXPECT_EQ(body, "iou,map\n0.3,0.75\n0.5,0.25\navg,0.5\n");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace biscc
