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

// Temporal context augmentation.
//
// Pseudo action instances are collected by thresholding a background
// suppressed T-CAM. Inter-video augmentation swaps the context rows of two
// videos; intra-video augmentation relocates action blocks inside a video.
// The intra-video transform is an explicit row permutation, so its inverse
// restores teacher T-CAMs to the original timeline exactly before they are
// reduced into one comprehensive T-CAM.

#ifndef BISCC_AUGMENT_HPP_
#define BISCC_AUGMENT_HPP_

#include "biscc/autodiff.hpp"
#include "biscc/datamodel.hpp"
#include "biscc/random.hpp"

#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace biscc {

/// 1 = pseudo action segment, 0 = pseudo temporal context.
using InstanceMask = std::vector<std::uint8_t>;

/// Half-open [start, end) run of segments.
struct Interval {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Row permutation: output row r is input row perm[r]; inv is its inverse.
class BlockPermutation {
 public:
  static BlockPermutation identity(int t_len) {
    std::vector<int> p(static_cast<std::size_t>(t_len));
    std::iota(p.begin(), p.end(), 0);
    return BlockPermutation(std::move(p));
  }

  explicit BlockPermutation(std::vector<int> perm) : perm_(std::move(perm)) {
    inv_.assign(perm_.size(), -1);
    for (std::size_t r = 0; r < perm_.size(); ++r) {
      const int src = perm_[r];
      if (src < 0 || static_cast<std::size_t>(src) >= perm_.size() ||
          inv_[static_cast<std::size_t>(src)] != -1) {
        throw std::invalid_argument("BlockPermutation: not a bijection");
      }
      inv_[static_cast<std::size_t>(src)] = static_cast<int>(r);
    }
  }

  const std::vector<int>& perm() const { return perm_; }
  const std::vector<int>& inv() const { return inv_; }
  int size() const { return static_cast<int>(perm_.size()); }
  bool is_identity() const {
    for (std::size_t i = 0; i < perm_.size(); ++i) {
      if (perm_[i] != static_cast<int>(i)) return false;
    }
    return true;
  }

 private:
  std::vector<int> perm_;
  std::vector<int> inv_;
};

/// m[t] = 1 iff the largest action-class probability of softmax(S̄[t,:])
/// exceeds gamma. The last column of S̄ is background and is ignored.
inline InstanceMask collect_instance_mask(const Matrix& s_bar, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("collect_instance_mask: gamma must be in (0,1)");
  }
  if (s_bar.cols() < 2) {
    throw ShapeError("collect_instance_mask: need at least one action class");
  }
  const Matrix probs = softmax_rows_value(s_bar);
  InstanceMask m(static_cast<std::size_t>(s_bar.rows()), 0);
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    m[static_cast<std::size_t>(t)] =
        probs.row(t).head(probs.cols() - 1).maxCoeff() > gamma ? 1 : 0;
  }
  return m;
}

/// Maximal runs of ones, sorted by start.
inline std::vector<Interval> mask_to_instances(std::span<const std::uint8_t> m) {
  std::vector<Interval> out;
  const int n = static_cast<int>(m.size());
  int t = 0;
  while (t < n) {
    if (!m[static_cast<std::size_t>(t)]) {
      ++t;
      continue;
    }
    int e = t;
    while (e < n && m[static_cast<std::size_t>(e)]) ++e;
    out.push_back({t, e});
    t = e;
  }
  return out;
}

namespace detail {

inline void check_mask(const Matrix& x, std::span<const std::uint8_t> m,
                       const char* op) {
  if (static_cast<Eigen::Index>(m.size()) != x.rows()) {
    throw ShapeError(std::string(op) + ": mask length " +
                     std::to_string(m.size()) + " != " +
                     std::to_string(x.rows()) + " segments");
  }
}

/// Rows of x where the mask is zero, in temporal order.
inline Matrix gather_context(const Matrix& x, std::span<const std::uint8_t> m) {
  std::vector<Eigen::Index> rows;
  for (std::size_t t = 0; t < m.size(); ++t) {
    if (!m[t]) rows.push_back(static_cast<Eigen::Index>(t));
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  return out;
}

}  // namespace detail

/// One side of the inter-video swap: keeps the pseudo action rows of x and
/// fills its context rows with the partner's context, resampled to T.
/// If the partner has no context rows, x is returned unchanged.
inline Matrix replace_context(const Matrix& x, std::span<const std::uint8_t> m,
                              const Matrix& partner,
                              std::span<const std::uint8_t> partner_mask) {
  detail::check_mask(x, m, "inter_tca");
  detail::check_mask(partner, partner_mask, "inter_tca");
  if (x.rows() != partner.rows() || x.cols() != partner.cols()) {
    throw ShapeError("inter_tca: videos differ in shape " + shape_str(x) +
                     " vs " + shape_str(partner));
  }
  const Matrix partner_context = detail::gather_context(partner, partner_mask);
  if (partner_context.rows() == 0) return x;
  const Matrix upsampled =
      resample_time(partner_context, static_cast<int>(x.rows()));
  Matrix out = x;
  for (std::size_t t = 0; t < m.size(); ++t) {
    if (!m[t]) out.row(static_cast<Eigen::Index>(t)) =
        upsampled.row(static_cast<Eigen::Index>(t));
  }
  return out;
}

/// Inter-video temporal context augmentation of a pair of videos.
inline std::pair<Matrix, Matrix> inter_tca(const Matrix& x1,
                                           std::span<const std::uint8_t> m1,
                                           const Matrix& x2,
                                           std::span<const std::uint8_t> m2) {
  return {replace_context(x1, m1, x2, m2), replace_context(x2, m2, x1, m1)};
}

namespace detail {

/// Instances grown by `inflate` segments per side; a block never crosses
/// into the previous (already grown) block or the next original instance.
inline std::vector<Interval> inflate_instances(std::vector<Interval> inst,
                                               int inflate, int t_len) {
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const int prev_end = i == 0 ? 0 : inst[i - 1].end;
    const int next_start =
        i + 1 < inst.size() ? inst[i + 1].start : t_len;
    inst[i].start = std::max(inst[i].start - inflate, prev_end);
    inst[i].end = std::min(inst[i].end + inflate, next_start);
  }
  return inst;
}

inline void append_range(std::vector<int>& v, int start, int end) {
  for (int t = start; t < end; ++t) v.push_back(t);
}

}  // namespace detail

/// Permutation exchanging blocks a and b (a before b, disjoint); every
/// other segment keeps its relative order.
inline BlockPermutation swap_blocks(int t_len, Interval a, Interval b) {
  if (a.start > b.start) std::swap(a, b);
  if (a.start < 0 || a.end > b.start || b.end > t_len || a.length() <= 0 ||
      b.length() <= 0) {
    throw std::invalid_argument("swap_blocks: blocks must be disjoint and "
                                "inside the video");
  }
  std::vector<int> p;
  p.reserve(static_cast<std::size_t>(t_len));
  detail::append_range(p, 0, a.start);
  detail::append_range(p, b.start, b.end);
  detail::append_range(p, a.end, b.start);
  detail::append_range(p, a.start, a.end);
  detail::append_range(p, b.end, t_len);
  return BlockPermutation(std::move(p));
}

/// Permutation moving block b so it starts at `offset` in the output.
inline BlockPermutation move_block(int t_len, Interval b, int offset) {
  if (b.start < 0 || b.end > t_len || b.length() <= 0 || offset < 0 ||
      offset + b.length() > t_len) {
    throw std::invalid_argument("move_block: block or offset out of range");
  }
  std::vector<int> rest;
  detail::append_range(rest, 0, b.start);
  detail::append_range(rest, b.end, t_len);
  std::vector<int> p(rest.begin(), rest.begin() + offset);
  detail::append_range(p, b.start, b.end);
  p.insert(p.end(), rest.begin() + offset, rest.end());
  return BlockPermutation(std::move(p));
}

/// Intra-video temporal context augmentation.
///
/// Two or more instances: two distinct instances are inflated and swapped.
/// One instance: the inflated block moves to a random new offset.
/// None: identity.
inline BlockPermutation intra_tca(std::span<const std::uint8_t> m, int inflate,
                                  Rng& rng) {
  if (inflate < 0) throw std::invalid_argument("intra_tca: inflate must be >= 0");
  const int t_len = static_cast<int>(m.size());
  const auto inst =
      detail::inflate_instances(mask_to_instances(m), inflate, t_len);
  if (inst.empty()) return BlockPermutation::identity(t_len);
  if (inst.size() == 1) {
    const Interval b = inst.front();
    const int max_offset = t_len - b.length();
    if (max_offset == 0) return BlockPermutation::identity(t_len);
    // Uniform over offsets other than the current one.
    int offset = uniform_int(rng, 0, max_offset - 1);
    if (offset >= b.start) ++offset;
    return move_block(t_len, b, offset);
  }
  const int n = static_cast<int>(inst.size());
  const int i = uniform_int(rng, 0, n - 1);
  int j = uniform_int(rng, 0, n - 2);
  if (j >= i) ++j;
  return swap_blocks(t_len, inst[static_cast<std::size_t>(i)],
                     inst[static_cast<std::size_t>(j)]);
}

inline Matrix apply_perm(const BlockPermutation& p, const Matrix& x) {
  if (p.size() != x.rows()) {
    throw ShapeError("apply_perm: permutation of " + std::to_string(p.size()) +
                     " rows applied to " + shape_str(x));
  }
  Matrix out(x.rows(), x.cols());
  for (int r = 0; r < p.size(); ++r) {
    out.row(r) = x.row(p.perm()[static_cast<std::size_t>(r)]);
  }
  return out;
}

inline Matrix invert_perm(const BlockPermutation& p, const Matrix& x) {
  if (p.size() != x.rows()) {
    throw ShapeError("invert_perm: permutation of " +
                     std::to_string(p.size()) + " rows applied to " +
                     shape_str(x));
  }
  Matrix out(x.rows(), x.cols());
  for (int t = 0; t < p.size(); ++t) {
    out.row(t) = x.row(p.inv()[static_cast<std::size_t>(t)]);
  }
  return out;
}

enum class CtgMode { kMax, kAvg };

/// Comprehensive T-CAM: restores each teacher T-CAM to the original
/// timeline, then reduces elementwise.
inline Matrix ctg(std::span<const Matrix> tcams,
                  std::span<const BlockPermutation> perms, CtgMode mode) {
  if (tcams.empty()) throw std::invalid_argument("ctg: empty T-CAM list");
  if (tcams.size() != perms.size()) {
    throw std::invalid_argument("ctg: need one permutation per T-CAM");
  }
  Matrix out = invert_perm(perms[0], tcams[0]);
  for (std::size_t k = 1; k < tcams.size(); ++k) {
    if (tcams[k].rows() != out.rows() || tcams[k].cols() != out.cols()) {
      throw ShapeError("ctg: T-CAM shapes differ");
    }
    const Matrix restored = invert_perm(perms[k], tcams[k]);
    if (mode == CtgMode::kMax) {
      out = out.cwiseMax(restored);
    } else {
      out += restored;
    }
  }
  if (mode == CtgMode::kAvg) out /= static_cast<double>(tcams.size());
  return out;
}

// ---------------------------------------------------------------------------
// Alternative feature augmentations, used only for comparison runs.

enum class AugmentKind { kTemporalContext, kGaussianNoise, kRandomMask,
                         kResolution };

inline Matrix gaussian_noise_augment(const Matrix& x, double sigma, Rng& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] += n(rng);
  return out;
}

/// Zeroes each segment independently with probability `drop`.
inline Matrix random_mask_augment(const Matrix& x, double drop, Rng& rng) {
  std::bernoulli_distribution b(drop);
  Matrix out = x;
  for (Eigen::Index t = 0; t < out.rows(); ++t) {
    if (b(rng)) out.row(t).setZero();
  }
  return out;
}

/// Down-samples by `factor` and interpolates back to the original length.
inline Matrix resolution_augment(const Matrix& x, double factor) {
  const int t_len = static_cast<int>(x.rows());
  const int low = std::max(1, static_cast<int>(std::lround(t_len * factor)));
  return resample_time(resample_time(x, low), t_len);
}

}  // namespace biscc

#endif  // BISCC_AUGMENT_HPP_
