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

// Minimal reverse-mode automatic differentiation over dense rank-2 arrays.
//
// A Tape records every operation in execution order, so node indices are a
// topological order by construction. Values are immutable once recorded.
// Gradients are accumulated lazily and backward() walks the tape in reverse
// exactly once. Operations whose inputs do not require gradients record no
// backward rule, which makes a tape of constants a cheap inference context.

#ifndef BISCC_AUTODIFF_HPP_
#define BISCC_AUTODIFF_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace biscc {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) {
    throw NonFiniteError(std::string("non-finite value in ") + where);
  }
}

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// Row-wise softmax with max subtraction.
inline Matrix softmax_rows_value(const Matrix& x) {
  require_finite(x, "softmax_rows");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

namespace ad {

/// Lower clamp applied to every log argument in kl_rows.
inline constexpr double kKlFloor = 1e-8;

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid for the
/// lifetime of its tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a leaf. Leaves are the only nodes whose gradient a caller
  /// normally reads back.
  Var leaf(Matrix value, bool requires_grad) {
    require_finite(value, "leaf");
    return push(std::move(value), requires_grad, nullptr);
  }

  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Records the result of an op. `fn` receives the gradient of the output
  /// and must call accumulate() for each parent that requires gradients.
  Var record(Matrix value, bool requires_grad, BackwardFn fn,
             const char* op_name) {
    require_finite(value, op_name);
    return push(std::move(value), requires_grad,
                requires_grad ? std::move(fn) : nullptr);
  }

  void accumulate(const Var& v, const Matrix& g) {
    Node& n = nodes_.at(v.id_);
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  void backward(const Var& loss) {
    if (loss.tape_ != this) {
      throw std::invalid_argument("backward: loss belongs to another tape");
    }
    if (backward_done_) {
      throw std::logic_error("backward: already called on this tape");
    }
    const Node& root = nodes_.at(loss.id_);
    if (root.value.rows() != 1 || root.value.cols() != 1) {
      throw ShapeError("backward: loss must be 1x1, got " +
                       shape_str(root.value));
    }
    if (!root.requires_grad) {
      throw std::invalid_argument(
          "backward: loss is detached from every gradient-requiring input");
    }
    backward_done_ = true;
    nodes_[loss.id_].grad = Matrix::Ones(1, 1);
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      require_finite(n.grad, "backward");
      n.backward(*this, n.grad);
    }
  }

  bool backward_done() const { return backward_done_; }
  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
  const Matrix& grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    if (n.grad.size() == 0) {
      // Unreached nodes have a zero gradient.
      n.zero_cache = Matrix::Zero(n.value.rows(), n.value.cols());
      return n.zero_cache;
    }
    return n.grad;
  }
  bool requires_grad(std::size_t id) const {
    return nodes_.at(id).requires_grad;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    mutable Matrix zero_cache;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Matrix value, bool requires_grad, BackwardFn fn) {
    if (backward_done_) {
      throw std::logic_error("tape: cannot record after backward()");
    }
    nodes_.push_back(Node{std::move(value), Matrix(), Matrix(), requires_grad,
                          std::move(fn)});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw std::invalid_argument("operands recorded on different tapes");
  }
  return *a.tape();
}

inline void require_same_shape(const Matrix& a, const Matrix& b,
                               const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural ops.

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "add");
  return t.record(a.value() + b.value(),
                  a.requires_grad() || b.requires_grad(),
                  [a, b](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g);
                    tp.accumulate(b, g);
                  },
                  "add");
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "sub");
  return t.record(a.value() - b.value(),
                  a.requires_grad() || b.requires_grad(),
                  [a, b](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g);
                    tp.accumulate(b, -g);
                  },
                  "sub");
}

inline Var mul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "mul");
  return t.record(a.value().cwiseProduct(b.value()),
                  a.requires_grad() || b.requires_grad(),
                  [a, b](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g.cwiseProduct(b.value()));
                    tp.accumulate(b, g.cwiseProduct(a.value()));
                  },
                  "mul");
}

inline Var scale(const Var& a, double s) {
  return a.tape()->record(
      a.value() * s, a.requires_grad(),
      [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, g * s); },
      "scale");
}

inline Var add_scalar(const Var& a, double s) {
  return a.tape()->record(
      (a.value().array() + s).matrix(), a.requires_grad(),
      [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g); }, "add_scalar");
}

/// a[T×C] + b[1×C] broadcast over rows.
inline Var add_row(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (b.rows() != 1 || b.cols() != a.cols()) {
    throw ShapeError("add_row: expected 1x" + std::to_string(a.cols()) +
                     " bias, got " + shape_str(b.value()));
  }
  Matrix out = a.value().rowwise() + b.value().row(0);
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [a, b](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g);
                    if (b.requires_grad()) {
                      tp.accumulate(b, g.colwise().sum());
                    }
                  },
                  "add_row");
}

/// col[T×1] scales each row of a[T×C].
inline Var mul_col(const Var& col, const Var& a) {
  Tape& t = detail::same_tape(col, a);
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ShapeError("mul_col: expected " + std::to_string(a.rows()) +
                     "x1 column, got " + shape_str(col.value()));
  }
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return t.record(
      std::move(out), col.requires_grad() || a.requires_grad(),
      [col, a](Tape& tp, const Matrix& g) {
        if (a.requires_grad()) {
          Matrix ga = g.array().colwise() * col.value().col(0).array();
          tp.accumulate(a, ga);
        }
        if (col.requires_grad()) {
          Matrix gc = g.cwiseProduct(a.value()).rowwise().sum();
          tp.accumulate(col, gc);
        }
      },
      "mul_col");
}

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.value()) + " * " +
                     shape_str(b.value()));
  }
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [a, b](Tape& tp, const Matrix& g) {
                    if (a.requires_grad()) {
                      tp.accumulate(a, g * b.value().transpose());
                    }
                    if (b.requires_grad()) {
                      tp.accumulate(b, a.value().transpose() * g);
                    }
                  },
                  "matmul");
}

/// a · bᵀ
inline Var matmul_nt(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a.value()) + " * T(" +
                     shape_str(b.value()) + ")");
  }
  Matrix out = a.value() * b.value().transpose();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [a, b](Tape& tp, const Matrix& g) {
                    if (a.requires_grad()) tp.accumulate(a, g * b.value());
                    if (b.requires_grad()) {
                      tp.accumulate(b, g.transpose() * a.value());
                    }
                  },
                  "matmul_nt");
}

inline Var transpose(const Var& a) {
  return a.tape()->record(
      a.value().transpose(), a.requires_grad(),
      [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g.transpose()); },
      "transpose");
}

inline Var col(const Var& a, Eigen::Index j) {
  if (j < 0 || j >= a.cols()) {
    throw ShapeError("col: index " + std::to_string(j) + " out of range for " +
                     shape_str(a.value()));
  }
  Matrix out = a.value().col(j);
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [a, j](Tape& tp, const Matrix& g) {
                            Matrix full = Matrix::Zero(a.rows(), a.cols());
                            full.col(j) = g.col(0);
                            tp.accumulate(a, full);
                          },
                          "col");
}

inline Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [a](Tape& tp, const Matrix& g) {
                            Matrix d = (a.value().array() > 0.0)
                                           .select(g, Matrix::Zero(g.rows(),
                                                                   g.cols()));
                            tp.accumulate(a, d);
                          },
                          "relu");
}

inline Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
  Tape::BackwardFn fn;
  if (a.requires_grad()) {
    fn = [a, s = out](Tape& tp, const Matrix& g) {
      Matrix d = g.array() * s.array() * (1.0 - s.array());
      tp.accumulate(a, d);
    };
  }
  return a.tape()->record(std::move(out), a.requires_grad(), std::move(fn),
                          "sigmoid");
}

inline Var abs(const Var& a) {
  Matrix out = a.value().cwiseAbs();
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [a](Tape& tp, const Matrix& g) {
                            Matrix sgn = a.value().unaryExpr([](double z) {
                              return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
                            });
                            tp.accumulate(a, g.cwiseProduct(sgn));
                          },
                          "abs");
}

inline Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const auto r = a.rows();
  const auto c = a.cols();
  return a.tape()->record(std::move(out), a.requires_grad(),
                          [a, r, c](Tape& tp, const Matrix& g) {
                            tp.accumulate(a, Matrix::Constant(r, c, g(0, 0)));
                          },
                          "sum");
}

inline Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

// ---------------------------------------------------------------------------
// Normalizations.

inline Var softmax_rows(const Var& x) {
  Matrix out = softmax_rows_value(x.value());
  Tape::BackwardFn fn;
  if (x.requires_grad()) {
    fn = [x, y = out](Tape& tp, const Matrix& g) {
      // dx = y ⊙ (g − rowsum(g ⊙ y))
      Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
      Matrix d = y.array() * (g.colwise() - dot).array();
      tp.accumulate(x, d);
    };
  }
  return x.tape()->record(std::move(out), x.requires_grad(), std::move(fn),
                          "softmax_rows");
}

inline Var log_softmax_rows(const Var& x) {
  const Matrix& v = x.value();
  Matrix out(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double m = v.row(r).maxCoeff();
    const double lse = m + std::log((v.row(r).array() - m).exp().sum());
    out.row(r) = (v.row(r).array() - lse).matrix();
  }
  Matrix probs = out.array().exp();
  return x.tape()->record(
      std::move(out), x.requires_grad(),
      [x, probs](Tape& tp, const Matrix& g) {
        Eigen::VectorXd gs = g.rowwise().sum();
        Matrix d = g - (probs.array().colwise() * gs.array()).matrix();
        tp.accumulate(x, d);
      },
      "log_softmax_rows");
}

// ---------------------------------------------------------------------------
// Pooling, convolution and divergence.

/// Indices of the k largest entries of `column`, ties broken by the lowest
/// temporal index.
inline std::vector<Eigen::Index> topk_indices(const Matrix& m, Eigen::Index j,
                                              Eigen::Index k) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      const double va = m(a, j);
                      const double vb = m(b, j);
                      if (va != vb) return va > vb;
                      return a < b;
                    });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

/// Per-column mean of the k largest entries; returns 1×C.
inline Var topk_mean_time(const Var& scores, Eigen::Index k) {
  const Matrix& s = scores.value();
  if (k < 1 || k > s.rows()) {
    throw std::out_of_range("topk_mean_time: k=" + std::to_string(k) +
                            " outside [1, " + std::to_string(s.rows()) + "]");
  }
  std::vector<std::vector<Eigen::Index>> sel;
  sel.reserve(static_cast<std::size_t>(s.cols()));
  Matrix out(1, s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    sel.push_back(topk_indices(s, j, k));
    double acc = 0.0;
    for (Eigen::Index i : sel.back()) acc += s(i, j);
    out(0, j) = acc / static_cast<double>(k);
  }
  return scores.tape()->record(
      std::move(out), scores.requires_grad(),
      [scores, sel = std::move(sel), k](Tape& tp, const Matrix& g) {
        Matrix d = Matrix::Zero(scores.rows(), scores.cols());
        const double inv_k = 1.0 / static_cast<double>(k);
        for (std::size_t j = 0; j < sel.size(); ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          for (Eigen::Index i : sel[j]) d(i, jj) += g(0, jj) * inv_k;
        }
        tp.accumulate(scores, d);
      },
      "topk_mean_time");
}

namespace detail {

inline Matrix im2col(const Matrix& x, Eigen::Index k) {
  const Eigen::Index t_len = x.rows();
  const Eigen::Index fin = x.cols();
  const Eigen::Index pad = (k - 1) / 2;
  Matrix cols = Matrix::Zero(t_len, k * fin);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (Eigen::Index d = 0; d < k; ++d) {
      const Eigen::Index src = t + d - pad;
      if (src < 0 || src >= t_len) continue;
      cols.block(t, d * fin, 1, fin) = x.row(src);
    }
  }
  return cols;
}

inline Matrix col2im(const Matrix& cols, Eigen::Index t_len, Eigen::Index fin,
                     Eigen::Index k) {
  const Eigen::Index pad = (k - 1) / 2;
  Matrix x = Matrix::Zero(t_len, fin);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (Eigen::Index d = 0; d < k; ++d) {
      const Eigen::Index src = t + d - pad;
      if (src < 0 || src >= t_len) continue;
      x.row(src) += cols.block(t, d * fin, 1, fin);
    }
  }
  return x;
}

}  // namespace detail

/// Temporal convolution with "same" zero padding.
///
/// `w` is (k·Fin)×Fout with row index δ·Fin + i holding the kernel tap δ for
/// input channel i; `b` is 1×Fout. Output length equals input length.
inline Var conv1d_temporal(const Var& x, const Var& w, const Var& b,
                           Eigen::Index k) {
  detail::same_tape(x, w);
  detail::same_tape(x, b);
  if (k < 1 || k % 2 == 0) {
    throw ShapeError("conv1d_temporal: kernel width must be odd, got " +
                     std::to_string(k));
  }
  const Eigen::Index fin = x.cols();
  if (w.rows() != k * fin) {
    throw ShapeError("conv1d_temporal: kernel " + shape_str(w.value()) +
                     " incompatible with input " + shape_str(x.value()) +
                     " and k=" + std::to_string(k));
  }
  if (b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError("conv1d_temporal: bias " + shape_str(b.value()) +
                     " incompatible with kernel " + shape_str(w.value()));
  }
  Matrix cols = k == 1 ? x.value() : detail::im2col(x.value(), k);
  Matrix out = cols * w.value();
  out.rowwise() += b.value().row(0);
  const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
  return x.tape()->record(
      std::move(out), rg,
      [x, w, b, k, cols = std::move(cols)](Tape& tp, const Matrix& g) {
        if (w.requires_grad()) tp.accumulate(w, cols.transpose() * g);
        if (b.requires_grad()) tp.accumulate(b, g.colwise().sum());
        if (x.requires_grad()) {
          Matrix gcols = g * w.value().transpose();
          if (k == 1) {
            tp.accumulate(x, gcols);
          } else {
            tp.accumulate(x, detail::col2im(gcols, x.rows(), x.cols(), k));
          }
        }
      },
      "conv1d_temporal");
}

inline void require_row_stochastic(const Matrix& p, const char* what) {
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    if (std::abs(p.row(r).sum() - 1.0) > 1e-6 || p.row(r).minCoeff() < 0.0) {
      throw std::invalid_argument(std::string(what) + ": row " +
                                  std::to_string(r) +
                                  " is not a probability distribution");
    }
  }
}

/// (1/T)·Σ_t Σ_j p·(log p − log q), both logs floored at kKlFloor.
///
/// `p` is a target: no gradient flows into it, even when it requires one.
inline Var kl_rows(const Var& p, const Var& q) {
  Tape& t = detail::same_tape(p, q);
  detail::require_same_shape(p.value(), q.value(), "kl_rows");
  require_row_stochastic(p.value(), "kl_rows target");
  require_row_stochastic(q.value(), "kl_rows prediction");
  const Matrix& pv = p.value();
  const Matrix& qv = q.value();
  const double inv_t = 1.0 / static_cast<double>(pv.rows());
  double acc = 0.0;
  for (Eigen::Index r = 0; r < pv.rows(); ++r) {
    for (Eigen::Index c = 0; c < pv.cols(); ++c) {
      const double pp = pv(r, c);
      if (pp == 0.0) continue;
      acc += pp * (std::log(std::max(pp, kKlFloor)) -
                   std::log(std::max(qv(r, c), kKlFloor)));
    }
  }
  Matrix out(1, 1);
  out(0, 0) = acc * inv_t;
  return t.record(
      std::move(out), q.requires_grad(),
      [p, q, inv_t](Tape& tp, const Matrix& g) {
        const Matrix& pv2 = p.value();
        const Matrix& qv2 = q.value();
        Matrix d = Matrix::Zero(qv2.rows(), qv2.cols());
        for (Eigen::Index r = 0; r < qv2.rows(); ++r) {
          for (Eigen::Index c = 0; c < qv2.cols(); ++c) {
            if (qv2(r, c) > kKlFloor) {
              d(r, c) = -g(0, 0) * inv_t * pv2(r, c) / qv2(r, c);
            }
          }
        }
        tp.accumulate(q, d);
      },
      "kl_rows");
}

/// 1 − cos(a, b) for two row vectors.
inline Var cosine_distance(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "cosine_distance");
  constexpr double kEps = 1e-12;
  const double na = std::max(a.value().norm(), kEps);
  const double nb = std::max(b.value().norm(), kEps);
  const double dot = a.value().cwiseProduct(b.value()).sum();
  const double cosv = dot / (na * nb);
  Matrix out(1, 1);
  out(0, 0) = 1.0 - cosv;
  return t.record(
      std::move(out), a.requires_grad() || b.requires_grad(),
      [a, b, na, nb, cosv](Tape& tp, const Matrix& g) {
        // d cos / d a = b/(|a||b|) − cos·a/|a|²
        const double s = -g(0, 0);
        if (a.requires_grad()) {
          Matrix da = b.value() / (na * nb) - cosv * a.value() / (na * na);
          tp.accumulate(a, s * da);
        }
        if (b.requires_grad()) {
          Matrix db = a.value() / (na * nb) - cosv * b.value() / (nb * nb);
          tp.accumulate(b, s * db);
        }
      },
      "cosine_distance");
}

}  // namespace ad
}  // namespace biscc

#endif  // BISCC_AUTODIFF_HPP_
