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

// Straight-line reference implementations used to cross-check the library.
// They favour obviousness over speed and share no code with it.

#ifndef BISCC_TESTS_ORACLES_HPP_
#define BISCC_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "biscc/localize.hpp"

namespace biscc::testing {

/// Overlap ratio by counting segment indices one at a time.
inline double iou_by_counting(int s1, int e1, int s2, int e2) {
  int inter = 0;
  int uni = 0;
  for (int t = std::min(s1, s2); t < std::max(e1, e2); ++t) {
    const bool in1 = t >= s1 && t < e1;
    const bool in2 = t >= s2 && t < e2;
    inter += in1 && in2;
    uni += in1 || in2;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// AP for one class at one threshold. Detections are ranked by confidence
/// with ties kept in input order, every detection is compared against every
/// still-free ground truth of its video, and the precision/recall curve is
/// materialized before it is integrated.
inline double brute_force_ap(const std::vector<Proposal>& props,
                             const std::vector<GtInstance>& gt, int cls,
                             double thr) {
  std::vector<GtInstance> g;
  for (const auto& x : gt) {
    if (x.cls == cls) g.push_back(x);
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].cls == cls) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return props[a].conf > props[b].conf;
  });
  std::vector<bool> taken(g.size(), false);
  std::vector<double> precision;
  std::vector<double> recall;
  int tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const Proposal& p = props[order[rank]];
    int pick = -1;
    double pick_iou = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (taken[j] || g[j].video_id != p.video_id) continue;
      const double iou = iou_by_counting(p.start, p.end, g[j].start, g[j].end);
      if (iou < thr) continue;
      if (pick < 0 || iou > pick_iou) {
        pick = static_cast<int>(j);
        pick_iou = iou;
      }
    }
    if (pick >= 0) {
      taken[static_cast<std::size_t>(pick)] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(g.size()));
  }
  double ap = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    const double prev = i == 0 ? 0.0 : recall[i - 1];
    ap += (recall[i] - prev) * precision[i];
  }
  return ap;
}

/// Mean AP over the classes present in the ground truth.
inline double brute_force_map(const std::vector<Proposal>& props,
                              const std::vector<GtInstance>& gt,
                              int num_classes, double thr) {
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    const bool has = std::any_of(gt.begin(), gt.end(),
                                 [c](const GtInstance& x) { return x.cls == c; });
    if (!has) continue;
    sum += brute_force_ap(props, gt, c, thr);
    ++present;
  }
  return present > 0 ? sum / present : 0.0;
}

struct MapInstance {
  std::vector<Proposal> props;
  std::vector<GtInstance> gt;
  int num_classes = 0;
};

/// At most five ground truths and ten proposals over two videos, with
/// proposals drawn near the ground truth so that every threshold matters.
/// Confidences are quantized to force ties now and then.
inline MapInstance random_map_instance(std::mt19937& rng) {
  std::uniform_int_distribution<int> n_gt(1, 5);
  std::uniform_int_distribution<int> n_prop(0, 10);
  std::uniform_int_distribution<int> cls(0, 2);
  std::uniform_int_distribution<int> vid(0, 1);
  std::uniform_int_distribution<int> start(0, 20);
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_int_distribution<int> jitter(-3, 3);
  std::uniform_int_distribution<int> conf(0, 12);
  MapInstance m;
  m.num_classes = 3;
  const int g = n_gt(rng);
  for (int i = 0; i < g; ++i) {
    const int s = start(rng);
    m.gt.push_back({"v" + std::to_string(vid(rng)), cls(rng), s, s + len(rng)});
  }
  const int p = n_prop(rng);
  for (int i = 0; i < p; ++i) {
    Proposal x;
    if (rng() % 4 != 0) {
      const GtInstance& base = m.gt[rng() % m.gt.size()];
      x.video_id = base.video_id;
      x.cls = rng() % 5 == 0 ? cls(rng) : base.cls;
      x.start = std::max(0, base.start + jitter(rng));
      x.end = std::max(x.start + 1, base.end + jitter(rng));
    } else {
      x.video_id = "v" + std::to_string(vid(rng));
      x.cls = cls(rng);
      x.start = start(rng);
      x.end = x.start + len(rng);
    }
    x.conf = conf(rng) / 12.0;
    m.props.push_back(x);
  }
  return m;
}

/// Outer-inner score recomputed from its definition, by explicit sums over
/// index sets.
inline double outer_inner_reference(const std::vector<double>& col, int s,
                                    int e, double p_hat) {
  const int t_len = static_cast<int>(col.size());
  const int l = std::max(1, static_cast<int>(std::floor(0.25 * (e - s) + 0.5)));
  std::vector<double> inner(col.begin() + s, col.begin() + e);
  std::vector<double> window;
  for (int t = s - l; t < e + l; ++t) {
    if (t >= 0 && t < t_len) window.push_back(col[static_cast<std::size_t>(t)]);
  }
  const double mi = std::accumulate(inner.begin(), inner.end(), 0.0) /
                    static_cast<double>(inner.size());
  const double mw = std::accumulate(window.begin(), window.end(), 0.0) /
                    static_cast<double>(window.size());
  return mi - mw + 0.2 * p_hat;
}

}  // namespace biscc::testing

#endif  // BISCC_TESTS_ORACLES_HPP_
