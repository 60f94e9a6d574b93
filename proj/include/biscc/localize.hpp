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

// Test-time action localization and its evaluation.
//
// Proposals are the connected runs of segments whose attention exceeds each
// threshold of a multi-threshold set, emitted once per selected class and
// scored with the outer-inner contrast of the class probability column.
// Evaluation is non-interpolated average precision at temporal IoU
// thresholds, averaged over classes that occur in the ground truth.

#ifndef BISCC_LOCALIZE_HPP_
#define BISCC_LOCALIZE_HPP_

#include "biscc/augment.hpp"
#include "biscc/datamodel.hpp"
#include "biscc/losses.hpp"
#include "biscc/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace biscc {

struct Proposal {
  std::string video_id;
  int cls = 0;
  int start = 0;  // inclusive
  int end = 0;    // exclusive
  double conf = 0.0;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct GtInstance {
  std::string video_id;
  int cls = 0;
  int start = 0;
  int end = 0;
};

struct ClassScore {
  int cls = 0;
  double prob = 0.0;
};

/// {0.10, 0.15, ..., 0.90}
inline std::vector<double> default_attention_thresholds() {
  std::vector<double> th;
  for (int i = 0; i <= 16; ++i) th.push_back(0.10 + 0.05 * i);
  return th;
}

struct LocalizeConfig {
  double class_threshold = 0.2;
  double nms_iou = 0.45;
  std::vector<double> attention_thresholds = default_attention_thresholds();
  /// Contrast against the outer ring only instead of the inflated window.
  bool outer_only = false;
  int topk_divisor = 8;
};

/// |a∩b| / |a∪b| for half-open intervals.
inline double temporal_iou(Interval a, Interval b) {
  if (a.start >= a.end || b.start >= b.end) {
    throw std::invalid_argument("temporal_iou: degenerate interval");
  }
  const int inter =
      std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const int uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Action classes (background excluded) whose video probability exceeds
/// the threshold. `probs` has C+1 entries.
inline std::vector<ClassScore> select_classes(std::span<const double> probs,
                                              double threshold) {
  std::vector<ClassScore> out;
  for (std::size_t c = 0; c + 1 < probs.size(); ++c) {
    if (probs[c] > threshold) out.push_back({static_cast<int>(c), probs[c]});
  }
  return out;
}

/// Outer-inner score of [s, e) on one class-probability column:
///   Avg(col[s:e]) − Avg(col[s−l : e+l]) + 0.2·p̂,  l = max(1, round(0.25(e−s)))
/// with the outer window clamped to the video.
inline double outer_inner_score(std::span<const double> column, int s, int e,
                                double p_hat, bool outer_only = false) {
  const int t_len = static_cast<int>(column.size());
  if (s < 0 || s >= e || e > t_len) {
    throw std::invalid_argument("outer_inner_score: invalid interval");
  }
  const int l = std::max(1, static_cast<int>(std::lround(0.25 * (e - s))));
  const int os = std::max(0, s - l);
  const int oe = std::min(t_len, e + l);
  double inner = 0.0;
  for (int t = s; t < e; ++t) inner += column[static_cast<std::size_t>(t)];
  inner /= static_cast<double>(e - s);
  double outer = 0.0;
  int n_outer = 0;
  for (int t = os; t < oe; ++t) {
    if (outer_only && t >= s && t < e) continue;
    outer += column[static_cast<std::size_t>(t)];
    ++n_outer;
  }
  outer = n_outer > 0 ? outer / static_cast<double>(n_outer) : 0.0;
  return inner - outer + 0.2 * p_hat;
}

/// Runs of attention > θ for every θ, one proposal per selected class.
/// Duplicate (class, start, end) triples keep their highest confidence.
inline std::vector<Proposal> generate_proposals(
    std::span<const double> attention, const Matrix& class_probs,
    std::span<const ClassScore> classes, std::span<const double> thresholds,
    const std::string& video_id = {}, bool outer_only = false) {
  if (thresholds.empty()) {
    throw std::invalid_argument("generate_proposals: empty threshold set");
  }
  if (class_probs.rows() != static_cast<Eigen::Index>(attention.size())) {
    throw ShapeError("generate_proposals: attention and T-CAM lengths differ");
  }
  std::map<std::tuple<int, int, int>, double> best;
  std::vector<std::uint8_t> keep(attention.size());
  std::vector<double> column(attention.size());
  for (double th : thresholds) {
    for (std::size_t t = 0; t < attention.size(); ++t) {
      keep[t] = attention[t] > th ? 1 : 0;
    }
    for (const Interval& run : mask_to_instances(keep)) {
      for (const ClassScore& cs : classes) {
        for (std::size_t t = 0; t < column.size(); ++t) {
          column[t] = class_probs(static_cast<Eigen::Index>(t), cs.cls);
        }
        const double conf = outer_inner_score(column, run.start, run.end,
                                              cs.prob, outer_only);
        auto key = std::make_tuple(cs.cls, run.start, run.end);
        auto it = best.find(key);
        if (it == best.end() || conf > it->second) best[key] = conf;
      }
    }
  }
  std::vector<Proposal> out;
  for (const auto& [key, conf] : best) {
    out.push_back({video_id, std::get<0>(key), std::get<1>(key),
                   std::get<2>(key), conf});
  }
  return out;
}

namespace detail {

/// Descending confidence; ties fall back to a total order on the rest of
/// the tuple so the result never depends on input order.
inline bool conf_greater(const Proposal& a, const Proposal& b) {
  if (a.conf != b.conf) return a.conf > b.conf;
  return std::tie(a.video_id, a.cls, a.start, a.end) <
         std::tie(b.video_id, b.cls, b.start, b.end);
}

}  // namespace detail

/// Greedy per-(video, class) suppression; output sorted by confidence.
inline std::vector<Proposal> nms(std::vector<Proposal> proposals,
                                 double iou_threshold) {
  std::sort(proposals.begin(), proposals.end(), detail::conf_greater);
  std::vector<Proposal> kept;
  for (const auto& p : proposals) {
    bool ok = true;
    for (const auto& k : kept) {
      if (k.cls != p.cls || k.video_id != p.video_id) continue;
      if (temporal_iou({k.start, k.end}, {p.start, p.end}) > iou_threshold) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(p);
  }
  return kept;
}

struct MapResult {
  std::vector<double> iou_thresholds;
  std::vector<double> map;  // one per threshold
  double average = 0.0;
  /// ap[threshold][class]; NaN for classes absent from the ground truth.
  std::vector<std::vector<double>> ap;
};

/// Non-interpolated AP: Σ (r_i − r_{i−1})·p_i over the ranked list.
inline double average_precision(std::span<const std::uint8_t> tp_ranked,
                                int num_positives) {
  double ap = 0.0;
  double prev_recall = 0.0;
  int cum_tp = 0;
  for (std::size_t i = 0; i < tp_ranked.size(); ++i) {
    cum_tp += tp_ranked[i];
    const double precision =
        static_cast<double>(cum_tp) / static_cast<double>(i + 1);
    const double recall =
        static_cast<double>(cum_tp) / static_cast<double>(num_positives);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

inline MapResult evaluate_map(const std::vector<Proposal>& proposals,
                              const std::vector<GtInstance>& gt,
                              std::span<const double> iou_thresholds,
                              int num_classes) {
  MapResult res;
  res.iou_thresholds.assign(iou_thresholds.begin(), iou_thresholds.end());
  for (double thr : iou_thresholds) {
    std::vector<double> ap_row(static_cast<std::size_t>(num_classes),
                               std::nan(""));
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
      std::map<std::string, std::vector<Interval>> gt_by_video;
      int npos = 0;
      for (const auto& g : gt) {
        if (g.cls != c) continue;
        gt_by_video[g.video_id].push_back({g.start, g.end});
        ++npos;
      }
      if (npos == 0) continue;
      std::vector<Proposal> dets;
      for (const auto& p : proposals) {
        if (p.cls == c) dets.push_back(p);
      }
      std::stable_sort(dets.begin(), dets.end(),
                       [](const Proposal& a, const Proposal& b) {
                         return a.conf > b.conf;
                       });
      std::map<std::string, std::vector<std::uint8_t>> used;
      for (const auto& [vid, segs] : gt_by_video) {
        used[vid].assign(segs.size(), 0);
      }
      std::vector<std::uint8_t> tp(dets.size(), 0);
      for (std::size_t i = 0; i < dets.size(); ++i) {
        auto it = gt_by_video.find(dets[i].video_id);
        if (it == gt_by_video.end()) continue;
        auto& flags = used[dets[i].video_id];
        double best_iou = -1.0;
        std::size_t best = 0;
        for (std::size_t g = 0; g < it->second.size(); ++g) {
          if (flags[g]) continue;
          const double iou =
              temporal_iou({dets[i].start, dets[i].end}, it->second[g]);
          if (iou >= thr && iou > best_iou) {
            best_iou = iou;
            best = g;
          }
        }
        if (best_iou >= 0.0) {
          flags[best] = 1;
          tp[i] = 1;
        }
      }
      const double ap = average_precision(tp, npos);
      ap_row[static_cast<std::size_t>(c)] = ap;
      sum += ap;
      ++present;
    }
    res.map.push_back(present > 0 ? sum / present : 0.0);
    res.ap.push_back(std::move(ap_row));
  }
  if (!res.map.empty()) {
    double s = 0.0;
    for (double m : res.map) s += m;
    res.average = s / static_cast<double>(res.map.size());
  }
  return res;
}

struct PrecisionCount {
  long hits = 0;
  long total = 0;

  /// 1.0 for an empty mask (vacuous precision).
  double value() const {
    return total == 0 ? 1.0 : static_cast<double>(hits) / total;
  }
  PrecisionCount& operator+=(const PrecisionCount& o) {
    hits += o.hits;
    total += o.total;
    return *this;
  }
};

inline PrecisionCount pseudo_precision_count(
    std::span<const std::uint8_t> mask,
    const std::vector<LabeledInterval>& gt) {
  PrecisionCount pc;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    ++pc.total;
    for (const auto& g : gt) {
      if (g.contains(static_cast<int>(t))) {
        ++pc.hits;
        break;
      }
    }
  }
  return pc;
}

/// Fraction of pseudo-foreground segments lying inside some ground-truth
/// action.
inline double pseudo_precision(std::span<const std::uint8_t> mask,
                               const std::vector<LabeledInterval>& gt) {
  return pseudo_precision_count(mask, gt).value();
}

// ---------------------------------------------------------------------------
// Model-level pipeline.

inline std::vector<Proposal> localize_video(const ModelParams& params,
                                            const VideoSample& video,
                                            const LocalizeConfig& cfg) {
  const TCamValues out = infer(params, video.features);
  const Eigen::Index k = topk_for(out.s_bar.rows(), cfg.topk_divisor);
  ad::Tape tape;
  const Matrix vp =
      video_class_probs(tape.constant(out.s_bar), k).value();
  std::vector<double> probs(vp.data(), vp.data() + vp.size());
  const auto classes = select_classes(probs, cfg.class_threshold);
  const Matrix class_probs = softmax_rows_value(out.s_bar);
  std::vector<double> att(out.a.data(), out.a.data() + out.a.size());
  return nms(generate_proposals(att, class_probs, classes,
                                cfg.attention_thresholds, video.id,
                                cfg.outer_only),
             cfg.nms_iou);
}

inline std::vector<Proposal> localize_all(const ModelParams& params,
                                          const std::vector<VideoSample>& vids,
                                          const LocalizeConfig& cfg) {
  std::vector<Proposal> all;
  for (const auto& v : vids) {
    auto p = localize_video(params, v, cfg);
    all.insert(all.end(), p.begin(), p.end());
  }
  return all;
}

inline std::vector<GtInstance> ground_truth(
    const std::vector<VideoSample>& vids) {
  std::vector<GtInstance> gt;
  for (const auto& v : vids) {
    for (const auto& g : v.gt_segments) {
      gt.push_back({v.id, g.cls, g.start, g.end});
    }
  }
  return gt;
}

/// Fraction of co-scene segments whose best action probability exceeds
/// gamma; 0 when the videos have no co-scene segments.
inline double coscene_false_positive_rate(const ModelParams& params,
                                          const std::vector<VideoSample>& vids,
                                          double gamma) {
  long fired = 0;
  long total = 0;
  for (const auto& v : vids) {
    if (v.coscene_segments.empty()) continue;
    const InstanceMask m =
        collect_instance_mask(infer(params, v.features).s_bar, gamma);
    for (const auto& c : v.coscene_segments) {
      for (int t = c.start; t < c.end; ++t) {
        ++total;
        fired += m[static_cast<std::size_t>(t)];
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(fired) / total;
}

// ---------------------------------------------------------------------------
// CSV files.

inline void write_proposals_csv(const std::filesystem::path& path,
                                const std::vector<Proposal>& props) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "video_id,class,start,end,conf\n";
  out << std::setprecision(17);
  for (const auto& p : props) {
    out << p.video_id << ',' << p.cls << ',' << p.start << ',' << p.end << ','
        << p.conf << '\n';
  }
}

inline std::vector<Proposal> read_proposals_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "video_id,class,start,end,conf") {
    throw FormatError(path.string() + ": missing proposals header");
  }
  std::vector<Proposal> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    Proposal p;
    std::string cls, s, e, conf;
    if (!std::getline(ss, p.video_id, ',') || !std::getline(ss, cls, ',') ||
        !std::getline(ss, s, ',') || !std::getline(ss, e, ',') ||
        !std::getline(ss, conf)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 5 fields");
    }
    try {
      p.cls = std::stoi(cls);
      p.start = std::stoi(s);
      p.end = std::stoi(e);
      p.conf = std::stod(conf);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": malformed number");
    }
    if (p.start < 0 || p.start >= p.end || p.cls < 0 ||
        !std::isfinite(p.conf)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": invalid proposal");
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// `iou,map` rows plus a final `avg,<mean>` row.
inline void write_map_report(const std::filesystem::path& path,
                             const MapResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iou,map\n" << std::setprecision(10);
  for (std::size_t i = 0; i < r.map.size(); ++i) {
    out << r.iou_thresholds[i] << ',' << r.map[i] << '\n';
  }
  out << "avg," << r.average << '\n';
}

}  // namespace biscc

#endif  // BISCC_LOCALIZE_HPP_
