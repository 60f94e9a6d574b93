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

// Video samples, the synthetic co-scene confound generator, temporal
// resampling and the on-disk dataset format.

#ifndef BISCC_DATAMODEL_HPP_
#define BISCC_DATAMODEL_HPP_

#include "biscc/autodiff.hpp"
#include "biscc/binary_io.hpp"
#include "biscc/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace biscc {

/// T×F segment features; the first F/2 columns are the "rgb" stream and the
/// last F/2 the "flow" stream.
using FeatureSequence = Matrix;

/// Half-open labeled interval [start, end) in segment units.
struct LabeledInterval {
  int cls = 0;
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool contains(int t) const { return t >= start && t < end; }
  friend bool operator==(const LabeledInterval&,
                         const LabeledInterval&) = default;
};

struct VideoSample {
  std::string id;
  FeatureSequence features;
  /// Video-level multi-hot label, length C.
  std::vector<std::uint8_t> label;
  /// Positive-action intervals; evaluation only.
  std::vector<LabeledInterval> gt_segments;
  /// Co-scene context intervals written by the generator; evaluation only.
  std::vector<LabeledInterval> coscene_segments;

  int num_segments() const { return static_cast<int>(features.rows()); }

  friend bool operator==(const VideoSample& a, const VideoSample& b) {
    return a.id == b.id && a.label == b.label &&
           a.gt_segments == b.gt_segments &&
           a.coscene_segments == b.coscene_segments &&
           a.features.rows() == b.features.rows() &&
           a.features.cols() == b.features.cols() &&
           a.features == b.features;
  }
};

struct SyntheticSpec {
  int num_classes = 5;
  int segments_per_video = 64;
  int feature_dim = 32;
  int num_train = 200;
  int num_test = 100;
  int actions_min = 1;
  int actions_max = 3;
  int length_min = 4;
  int length_max = 10;
  double scene_correlation = 0.8;
  double co_scene_fraction = 0.3;
  double noise_sigma = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& m) {
      throw std::invalid_argument("SyntheticSpec: " + m);
    };
    if (num_classes < 1) fail("num_classes must be >= 1");
    if (segments_per_video < 1) fail("segments_per_video must be >= 1");
    if (feature_dim < 2 || feature_dim % 2 != 0) {
      fail("feature_dim must be even and >= 2");
    }
    if (2 * num_classes > feature_dim / 2) {
      fail("feature_dim/2 must hold 2*num_classes orthonormal signatures");
    }
    if (num_train < 0 || num_test < 0) fail("split sizes must be >= 0");
    if (actions_min < 1 || actions_max < actions_min) {
      fail("actions range must satisfy 1 <= min <= max");
    }
    if (length_min < 1 || length_max < length_min) {
      fail("action length range must satisfy 1 <= min <= max");
    }
    if (length_max > segments_per_video) {
      fail("action length exceeds segments_per_video");
    }
    if (!(scene_correlation >= 0.0 && scene_correlation <= 1.0)) {
      fail("scene_correlation must be in [0,1]");
    }
    if (!(co_scene_fraction >= 0.0 && co_scene_fraction <= 1.0)) {
      fail("co_scene_fraction must be in [0,1]");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
      fail("noise_sigma must be finite and >= 0");
    }
  }

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct Dataset {
  std::vector<VideoSample> train;
  std::vector<VideoSample> test;
  SyntheticSpec spec;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Per-class unit signatures spanning F dims (both stream halves identical).
struct ClassSignatures {
  Matrix action;  // C×F
  Matrix scene;   // C×F
};

/// Linear interpolation along time with aligned endpoints.
inline FeatureSequence resample_time(const FeatureSequence& x, int t_target) {
  if (x.rows() < 1) throw std::invalid_argument("resample_time: empty input");
  if (t_target < 1) {
    throw std::invalid_argument("resample_time: target length must be >= 1");
  }
  const Eigen::Index t_src = x.rows();
  FeatureSequence out(t_target, x.cols());
  if (t_target == 1 || t_src == 1) {
    for (int t = 0; t < t_target; ++t) out.row(t) = x.row(0);
    return out;
  }
  if (t_target == t_src) return x;
  const double step =
      static_cast<double>(t_src - 1) / static_cast<double>(t_target - 1);
  for (int t = 0; t < t_target; ++t) {
    const double pos = static_cast<double>(t) * step;
    auto lo = static_cast<Eigen::Index>(std::floor(pos));
    lo = std::min(lo, t_src - 1);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= t_src || frac == 0.0) {
      out.row(t) = x.row(lo);
    } else {
      out.row(t) = (1.0 - frac) * x.row(lo) + frac * x.row(lo + 1);
    }
  }
  return out;
}

/// Gram–Schmidt over seeded Gaussian draws: 2C orthonormal directions in the
/// per-stream space, copied into both halves and rescaled to unit norm.
inline ClassSignatures make_signatures(const SyntheticSpec& spec) {
  const int c = spec.num_classes;
  const int d = spec.feature_dim / 2;
  Rng rng = make_rng(spec.seed, kStreamSignatures);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> basis;
  while (static_cast<int>(basis.size()) < 2 * c) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = normal(rng);
    for (const auto& b : basis) v -= v.dot(b) * b;
    const double n = v.norm();
    if (n < 1e-6) continue;
    basis.push_back(v / n);
  }
  ClassSignatures sig{Matrix(c, spec.feature_dim),
                      Matrix(c, spec.feature_dim)};
  const double half = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < c; ++k) {
    const auto& a = basis[static_cast<std::size_t>(2 * k)];
    const auto& s = basis[static_cast<std::size_t>(2 * k + 1)];
    sig.action.row(k).head(d) = a.transpose() * half;
    sig.action.row(k).tail(d) = a.transpose() * half;
    sig.scene.row(k).head(d) = s.transpose() * half;
    sig.scene.row(k).tail(d) = s.transpose() * half;
  }
  return sig;
}

namespace detail {

/// Non-overlapping action intervals separated by at least one segment.
inline std::vector<LabeledInterval> place_actions(const SyntheticSpec& spec,
                                                  int cls, Rng& rng) {
  const int t_len = spec.segments_per_video;
  int n = uniform_int(rng, spec.actions_min, spec.actions_max);
  std::vector<int> lengths;
  for (int i = 0; i < n; ++i) {
    lengths.push_back(uniform_int(rng, spec.length_min, spec.length_max));
  }
  auto footprint = [&]() {
    int s = 0;
    for (int l : lengths) s += l;
    return s + static_cast<int>(lengths.size()) - 1;
  };
  while (lengths.size() > 1 && footprint() > t_len) lengths.pop_back();
  const int slack = t_len - footprint();
  std::vector<int> offsets;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    offsets.push_back(uniform_int(rng, 0, slack));
  }
  std::sort(offsets.begin(), offsets.end());
  std::vector<LabeledInterval> out;
  int cursor = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const int start = cursor + offsets[i];
    out.push_back({cls, start, start + lengths[i]});
    cursor += lengths[i] + 1;
  }
  return out;
}

/// Contiguous co-scene runs covering round(fraction · #context) segments.
inline std::vector<LabeledInterval> place_coscene(
    const SyntheticSpec& spec, int cls,
    const std::vector<LabeledInterval>& actions, Rng& rng) {
  const int t_len = spec.segments_per_video;
  std::vector<std::uint8_t> busy(static_cast<std::size_t>(t_len), 0);
  int n_context = t_len;
  for (const auto& a : actions) {
    for (int t = a.start; t < a.end; ++t) busy[static_cast<std::size_t>(t)] = 1;
    n_context -= a.length();
  }
  int remaining = static_cast<int>(
      std::lround(spec.co_scene_fraction * static_cast<double>(n_context)));
  std::vector<LabeledInterval> runs;
  while (remaining > 0) {
    int len = std::min(remaining,
                       uniform_int(rng, spec.length_min, spec.length_max));
    std::vector<int> starts;
    while (len > 0) {
      starts.clear();
      for (int s = 0; s + len <= t_len; ++s) {
        bool ok = true;
        for (int t = s; t < s + len && ok; ++t) {
          ok = busy[static_cast<std::size_t>(t)] == 0;
        }
        if (ok) starts.push_back(s);
      }
      if (!starts.empty()) break;
      --len;
    }
    if (len == 0) break;
    const int s = starts[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(starts.size()) - 1))];
    for (int t = s; t < s + len; ++t) busy[static_cast<std::size_t>(t)] = 2;
    runs.push_back({cls, s, s + len});
    remaining -= len;
  }
  std::sort(runs.begin(), runs.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  return runs;
}

inline VideoSample make_video(const SyntheticSpec& spec,
                              const ClassSignatures& sig, std::string id,
                              Rng& rng) {
  const int t_len = spec.segments_per_video;
  const int f = spec.feature_dim;
  const int cls = uniform_int(rng, 0, spec.num_classes - 1);
  VideoSample v;
  v.id = std::move(id);
  v.label.assign(static_cast<std::size_t>(spec.num_classes), 0);
  v.label[static_cast<std::size_t>(cls)] = 1;
  v.gt_segments = place_actions(spec, cls, rng);
  v.coscene_segments = place_coscene(spec, cls, v.gt_segments, rng);

  Matrix x = Matrix::Zero(t_len, f);
  const Eigen::RowVectorXd action_row =
      sig.action.row(cls) + spec.scene_correlation * sig.scene.row(cls);
  for (const auto& a : v.gt_segments) {
    for (int t = a.start; t < a.end; ++t) x.row(t) = action_row;
  }
  for (const auto& c : v.coscene_segments) {
    for (int t = c.start; t < c.end; ++t) x.row(t) = sig.scene.row(cls);
  }
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += noise(rng);
  }
  // Stored on disk as 32-bit floats; keep memory and disk bit-identical.
  v.features = x.cast<float>().cast<double>();
  return v;
}

}  // namespace detail

/// Deterministic given spec.seed. Each class owns an action and a scene
/// signature; positive-action segments carry action + ρ·scene, co-scene
/// context segments carry the scene signature alone.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const ClassSignatures sig = make_signatures(spec);
  Dataset d;
  d.spec = spec;
  Rng train_rng = make_rng(spec.seed, kStreamTrainSplit);
  Rng test_rng = make_rng(spec.seed, kStreamTestSplit);
  char buf[32];
  for (int i = 0; i < spec.num_train; ++i) {
    std::snprintf(buf, sizeof(buf), "train_%05d", i);
    d.train.push_back(detail::make_video(spec, sig, buf, train_rng));
  }
  for (int i = 0; i < spec.num_test; ++i) {
    std::snprintf(buf, sizeof(buf), "test_%05d", i);
    d.test.push_back(detail::make_video(spec, sig, buf, test_rng));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Dataset file.
//
//   "BSCC" u16 version
//   payload:
//     u32 C, u32 T, u32 F, u32 n_train, u32 n_test
//     generator spec (see write_spec)
//     per video: u32 id length, id bytes, ceil(C/8) label bytes (LSB first),
//                u32 #gt, {u32 start, u32 end, u16 class}...,
//                u32 #co-scene, {u32 start, u32 end, u16 class}...,
//                T·F f32 features, row-major
//   u32 CRC32(payload)
// All integers and floats little-endian.

inline constexpr char kDatasetMagic[4] = {'B', 'S', 'C', 'C'};
inline constexpr std::uint16_t kDatasetVersion = 1;

namespace detail {

inline void write_intervals(ByteWriter& w,
                            const std::vector<LabeledInterval>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& s : v) {
    w.u32(static_cast<std::uint32_t>(s.start));
    w.u32(static_cast<std::uint32_t>(s.end));
    w.u16(static_cast<std::uint16_t>(s.cls));
  }
}

inline std::vector<LabeledInterval> read_intervals(ByteReader& r, int t_len,
                                                   int num_classes) {
  const std::uint32_t n = r.u32();
  if (n > static_cast<std::uint32_t>(t_len)) {
    throw FormatError("interval count exceeds segment count");
  }
  std::vector<LabeledInterval> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    LabeledInterval s;
    s.start = static_cast<int>(r.u32());
    s.end = static_cast<int>(r.u32());
    s.cls = r.u16();
    if (s.start < 0 || s.start >= s.end || s.end > t_len ||
        s.cls >= num_classes) {
      throw FormatError("invalid interval in dataset file");
    }
    out.push_back(s);
  }
  return out;
}

inline void write_video(ByteWriter& w, const VideoSample& v, int c) {
  w.str(v.id);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>((c + 7) / 8), 0);
  for (int j = 0; j < c; ++j) {
    if (v.label[static_cast<std::size_t>(j)]) {
      bits[static_cast<std::size_t>(j / 8)] |=
          static_cast<std::uint8_t>(1u << (j % 8));
    }
  }
  w.bytes(bits.data(), bits.size());
  write_intervals(w, v.gt_segments);
  write_intervals(w, v.coscene_segments);
  for (Eigen::Index i = 0; i < v.features.size(); ++i) {
    w.f32(static_cast<float>(v.features.data()[i]));
  }
}

inline VideoSample read_video(ByteReader& r, int c, int t_len, int f) {
  VideoSample v;
  v.id = r.str();
  std::vector<std::uint8_t> bits(static_cast<std::size_t>((c + 7) / 8));
  r.bytes(bits.data(), bits.size());
  v.label.assign(static_cast<std::size_t>(c), 0);
  for (int j = 0; j < c; ++j) {
    v.label[static_cast<std::size_t>(j)] =
        (bits[static_cast<std::size_t>(j / 8)] >> (j % 8)) & 1u;
  }
  v.gt_segments = read_intervals(r, t_len, c);
  v.coscene_segments = read_intervals(r, t_len, c);
  v.features.resize(t_len, f);
  for (Eigen::Index i = 0; i < v.features.size(); ++i) {
    v.features.data()[i] = static_cast<double>(r.f32());
  }
  return v;
}

inline void write_spec(ByteWriter& w, const SyntheticSpec& s) {
  w.u32(static_cast<std::uint32_t>(s.actions_min));
  w.u32(static_cast<std::uint32_t>(s.actions_max));
  w.u32(static_cast<std::uint32_t>(s.length_min));
  w.u32(static_cast<std::uint32_t>(s.length_max));
  w.f64(s.scene_correlation);
  w.f64(s.co_scene_fraction);
  w.f64(s.noise_sigma);
  w.u64(s.seed);
}

inline void read_spec(ByteReader& r, SyntheticSpec& s) {
  s.actions_min = static_cast<int>(r.u32());
  s.actions_max = static_cast<int>(r.u32());
  s.length_min = static_cast<int>(r.u32());
  s.length_max = static_cast<int>(r.u32());
  s.scene_correlation = r.f64();
  s.co_scene_fraction = r.f64();
  s.noise_sigma = r.f64();
  s.seed = r.u64();
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
  const auto& s = d.spec;
  ByteWriter payload;
  payload.u32(static_cast<std::uint32_t>(s.num_classes));
  payload.u32(static_cast<std::uint32_t>(s.segments_per_video));
  payload.u32(static_cast<std::uint32_t>(s.feature_dim));
  payload.u32(static_cast<std::uint32_t>(d.train.size()));
  payload.u32(static_cast<std::uint32_t>(d.test.size()));
  detail::write_spec(payload, s);
  for (const auto* split : {&d.train, &d.test}) {
    for (const auto& v : *split) {
      if (v.features.rows() != s.segments_per_video ||
          v.features.cols() != s.feature_dim ||
          v.label.size() != static_cast<std::size_t>(s.num_classes)) {
        throw std::invalid_argument("save_dataset: video " + v.id +
                                    " does not match dataset shape");
      }
      detail::write_video(payload, v, s.num_classes);
    }
  }
  return frame(kDatasetMagic, kDatasetVersion, payload.buffer());
}

inline Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  ByteReader r = unframe(bytes, kDatasetMagic, kDatasetVersion, "dataset");
  Dataset d;
  auto& s = d.spec;
  s.num_classes = static_cast<int>(r.u32());
  s.segments_per_video = static_cast<int>(r.u32());
  s.feature_dim = static_cast<int>(r.u32());
  const std::uint32_t n_train = r.u32();
  const std::uint32_t n_test = r.u32();
  if (s.num_classes < 1 || s.segments_per_video < 1 || s.feature_dim < 1) {
    throw FormatError("dataset header has empty dimensions");
  }
  s.num_train = static_cast<int>(n_train);
  s.num_test = static_cast<int>(n_test);
  detail::read_spec(r, s);
  const std::size_t per_video_min =
      static_cast<std::size_t>(s.segments_per_video) *
      static_cast<std::size_t>(s.feature_dim) * 4;
  if ((static_cast<std::size_t>(n_train) + n_test) * per_video_min >
      r.remaining()) {
    throw FormatError("dataset file truncated");
  }
  for (std::uint32_t i = 0; i < n_train; ++i) {
    d.train.push_back(detail::read_video(r, s.num_classes,
                                         s.segments_per_video, s.feature_dim));
  }
  for (std::uint32_t i = 0; i < n_test; ++i) {
    d.test.push_back(detail::read_video(r, s.num_classes, s.segments_per_video,
                                        s.feature_dim));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in dataset file");
  return d;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  write_file(path, encode_dataset(d));
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file(path));
}

}  // namespace biscc

#endif  // BISCC_DATAMODEL_HPP_
