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

// Training objectives over tape tensors.
//
// Consistency losses compare per-segment class distributions (row softmax
// over the C+1 columns). Targets are always detached: kl_rows never sends a
// gradient into its first argument.

#ifndef BISCC_LOSSES_HPP_
#define BISCC_LOSSES_HPP_

#include "biscc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace biscc {

/// Top-k size for T segments: max(1, T / divisor).
inline Eigen::Index topk_for(Eigen::Index t_len, int divisor = 8) {
  return std::max<Eigen::Index>(1, t_len / divisor);
}

/// softmax over classes of the per-class top-k temporal mean; 1×(C+1).
inline ad::Var video_class_probs(const ad::Var& scores, Eigen::Index k) {
  return ad::softmax_rows(ad::topk_mean_time(scores, k));
}

namespace detail {

/// Label extended by a background entry, then L1-normalized; 1×(C+1).
inline Matrix extended_label(std::span<const std::uint8_t> y,
                             double background) {
  Matrix out(1, static_cast<Eigen::Index>(y.size()) + 1);
  for (std::size_t j = 0; j < y.size(); ++j) {
    out(0, static_cast<Eigen::Index>(j)) = y[j] ? 1.0 : 0.0;
  }
  out(0, static_cast<Eigen::Index>(y.size())) = background;
  const double n = out.sum();
  if (n <= 0.0) throw std::invalid_argument("mil_loss: all-zero video label");
  return out / n;
}

inline ad::Var cross_entropy(const ad::Var& scores, const Matrix& target,
                             Eigen::Index k) {
  ad::Tape& t = *scores.tape();
  ad::Var logp = ad::log_softmax_rows(ad::topk_mean_time(scores, k));
  return ad::scale(ad::sum(ad::mul(t.constant(target), logp)), -1.0);
}

}  // namespace detail

/// Top-k MIL classification on S (background label 1) and S̄ (background
/// label 0).
inline ad::Var mil_loss(const ad::Var& s, const ad::Var& s_bar,
                        std::span<const std::uint8_t> y, Eigen::Index k) {
  if (static_cast<Eigen::Index>(y.size()) + 1 != s.cols() ||
      s.cols() != s_bar.cols()) {
    throw ShapeError("mil_loss: label length " + std::to_string(y.size()) +
                     " does not match T-CAM width " + std::to_string(s.cols()));
  }
  const Matrix y_full = detail::extended_label(y, 1.0);
  const Matrix y_supp = detail::extended_label(y, 0.0);
  return ad::add(detail::cross_entropy(s, y_full, k),
                 detail::cross_entropy(s_bar, y_supp, k));
}

/// Minimum of mil_loss: the entropy of the two normalized label vectors.
inline double mil_entropy_floor(std::span<const std::uint8_t> y) {
  double floor = 0.0;
  for (double bg : {1.0, 0.0}) {
    const Matrix l = detail::extended_label(y, bg);
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      if (l(0, j) > 0.0) floor -= l(0, j) * std::log(l(0, j));
    }
  }
  return floor;
}

/// Attention sparsity: mean |A|.
inline ad::Var norm_loss(const ad::Var& a) { return ad::mean(ad::abs(a)); }

/// mean |A − (1 − p_bg)| with p_bg the background column of softmax(S).
inline ad::Var guide_loss(const ad::Var& a, const ad::Var& s) {
  if (a.rows() != s.rows() || a.cols() != 1) {
    throw ShapeError("guide_loss: attention " + shape_str(a.value()) +
                     " vs T-CAM " + shape_str(s.value()));
  }
  ad::Var p_bg = ad::col(ad::softmax_rows(s), s.cols() - 1);
  ad::Var fg = ad::add_scalar(ad::scale(p_bg, -1.0), 1.0);
  return ad::mean(ad::abs(ad::sub(a, fg)));
}

/// One video's contribution to the co-activity similarity loss.
struct CasItem {
  ad::Var s_bar;     // T×(C+1)
  ad::Var features;  // T×F
  std::span<const std::uint8_t> label;
};

inline constexpr double kCasMargin = 0.5;

namespace detail {

/// High- and low-attention pooled features for class c.
inline std::pair<ad::Var, ad::Var> cas_pool(const CasItem& v, Eigen::Index c) {
  using namespace ad;
  const double t_len = static_cast<double>(v.s_bar.rows());
  Var w = transpose(softmax_rows(transpose(col(v.s_bar, c))));  // T×1
  Var high = matmul(transpose(w), v.features);
  Var comp = scale(add_scalar(scale(w, -1.0), 1.0),
                   1.0 / std::max(t_len - 1.0, 1.0));
  Var low = matmul(transpose(comp), v.features);
  return {high, low};
}

}  // namespace detail

/// Ranking hinge over every pair of videos sharing a class, averaged over
/// (pair, class) combinations; 0 when no pair shares a class.
inline ad::Var cas_loss(ad::Tape& tape, std::span<const CasItem> items,
                        double margin = kCasMargin) {
  using namespace ad;
  std::vector<Var> terms;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      const auto& a = items[i];
      const auto& b = items[j];
      const std::size_t nc = std::min(a.label.size(), b.label.size());
      for (std::size_t c = 0; c < nc; ++c) {
        if (!a.label[c] || !b.label[c]) continue;
        const auto [ah, al] = biscc::detail::cas_pool(a, static_cast<Eigen::Index>(c));
        const auto [bh, bl] = biscc::detail::cas_pool(b, static_cast<Eigen::Index>(c));
        Var d_hh = cosine_distance(ah, bh);
        Var h1 = relu(add_scalar(sub(d_hh, cosine_distance(ah, bl)), margin));
        Var h2 = relu(add_scalar(sub(d_hh, cosine_distance(al, bh)), margin));
        terms.push_back(scale(add(h1, h2), 0.5));
      }
    }
  }
  if (terms.empty()) return tape.constant(Matrix::Zero(1, 1));
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return scale(acc, 1.0 / static_cast<double>(terms.size()));
}

/// KL(softmax(teacher) ‖ softmax(student)), averaged over segments.
inline ad::Var scc_loss(const ad::Var& teacher_s_bar,
                        const ad::Var& student_s_bar) {
  if (teacher_s_bar.rows() != student_s_bar.rows() ||
      teacher_s_bar.cols() != student_s_bar.cols()) {
    throw ShapeError("scc_loss: shape mismatch " +
                     shape_str(teacher_s_bar.value()) + " vs " +
                     shape_str(student_s_bar.value()));
  }
  ad::Tape& t = *student_s_bar.tape();
  ad::Var target = t.constant(softmax_rows_value(teacher_s_bar.value()));
  return ad::kl_rows(target, ad::softmax_rows(student_s_bar));
}

/// KL(S̄^CT ‖ S̄') + KL(S̄^CT' ‖ S̄); comprehensive T-CAMs already restored to
/// the original timeline.
inline ad::Var bi_scc_loss(const ad::Var& ct_original,
                           const ad::Var& s_bar_augmented,
                           const ad::Var& ct_augmented,
                           const ad::Var& s_bar_original) {
  return ad::add(scc_loss(ct_original, s_bar_augmented),
                 scc_loss(ct_augmented, s_bar_original));
}

/// Per-branch loss terms.
struct BranchLoss {
  double cls = 0.0;
  double norm = 0.0;
  double guide = 0.0;
  double cas = 0.0;

  double total() const { return cls + norm + guide + cas; }
};

struct LossBreakdown {
  double cls = 0.0;
  double norm = 0.0;
  double guide = 0.0;
  double cas = 0.0;
  double bi_scc = 0.0;
  double alpha = 0.0;
  double total = 0.0;
};

/// Σ branches + α·bi_scc.
inline LossBreakdown total_loss(std::span<const BranchLoss> branches,
                                double bi_scc, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("total_loss: alpha < 0");
  LossBreakdown out;
  out.alpha = alpha;
  out.bi_scc = bi_scc;
  double branch_sum = 0.0;
  for (const auto& b : branches) {
    out.cls += b.cls;
    out.norm += b.norm;
    out.guide += b.guide;
    out.cas += b.cas;
    branch_sum += b.total();
  }
  out.total = branch_sum + alpha * bi_scc;
  return out;
}

}  // namespace biscc

#endif  // BISCC_LOSSES_HPP_
