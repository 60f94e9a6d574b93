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

// T-CAM generation: a class-agnostic attention unit and a classifier with a
// temporal self-attention (non-local) layer.
//
//   A    = sigmoid(conv1(relu(conv3(relu(conv3(X))))))
//   S    = conv1(relu(conv3(relu(conv3(relu(conv3(X + NL(X))))))))
//   S̄    = A ⊙ S   (A broadcast over classes)
//
// The two sub-networks share no weights.

#ifndef BISCC_NETWORK_HPP_
#define BISCC_NETWORK_HPP_

#include "biscc/autodiff.hpp"
#include "biscc/binary_io.hpp"
#include "biscc/random.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace biscc {

struct ModelShape {
  int feature_dim = 32;
  int hidden = 32;
  /// Action classes C; the classifier emits C+1 columns (last = background).
  int num_classes = 5;

  int outputs() const { return num_classes + 1; }
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Parameter slots in a fixed order shared by every model.
enum Param : std::size_t {
  kAttConv1W,
  kAttConv1B,
  kAttConv2W,
  kAttConv2B,
  kAttConv3W,
  kAttConv3B,
  kNlQuery,
  kNlKey,
  kNlValue,
  kClsConv1W,
  kClsConv1B,
  kClsConv2W,
  kClsConv2B,
  kClsConv3W,
  kClsConv3B,
  kClsConv4W,
  kClsConv4B,
  kNumParams
};

inline constexpr std::array<std::string_view, kNumParams> kParamNames = {
    "att.conv1.weight", "att.conv1.bias",   "att.conv2.weight",
    "att.conv2.bias",   "att.conv3.weight", "att.conv3.bias",
    "cls.nonlocal.query", "cls.nonlocal.key", "cls.nonlocal.value",
    "cls.conv1.weight", "cls.conv1.bias",   "cls.conv2.weight",
    "cls.conv2.bias",   "cls.conv3.weight", "cls.conv3.bias",
    "cls.conv4.weight", "cls.conv4.bias"};

inline constexpr int kHiddenKernel = 3;

struct ParamSpec {
  Eigen::Index rows;
  Eigen::Index cols;
  int kernel;   // kernel width the slot feeds (1 for projections)
  int fan_in;
};

inline std::array<ParamSpec, kNumParams> param_specs(const ModelShape& s) {
  const int f = s.feature_dim;
  const int h = s.hidden;
  const int k = kHiddenKernel;
  const int o = s.outputs();
  return {{
      {k * f, h, k, f}, {1, h, k, f},   // att.conv1
      {k * h, h, k, h}, {1, h, k, h},   // att.conv2
      {h, 1, 1, h},     {1, 1, 1, h},   // att.conv3
      {f, f, 1, f},     {f, f, 1, f},     {f, f, 1, f},  // non-local
      {k * f, h, k, f}, {1, h, k, f},   // cls.conv1
      {k * h, h, k, h}, {1, h, k, h},   // cls.conv2
      {k * h, h, k, h}, {1, h, k, h},   // cls.conv3
      {h, o, 1, h},     {1, o, 1, h},   // cls.conv4
  }};
}

/// Every learnable weight of one T-CAM network.
class ModelParams {
 public:
  ModelParams() = default;

  /// Zero-filled parameters of the given shape.
  explicit ModelParams(const ModelShape& shape) : shape_(shape) {
    if (shape.feature_dim < 1 || shape.hidden < 1 || shape.num_classes < 1) {
      throw std::invalid_argument("ModelShape: all dimensions must be >= 1");
    }
    const auto specs = param_specs(shape);
    for (std::size_t i = 0; i < kNumParams; ++i) {
      values_[i] = Matrix::Zero(specs[i].rows, specs[i].cols);
    }
  }

  /// Uniform in [−a, a], a = sqrt(1/(k·fan_in)) per slot.
  static ModelParams initialize(const ModelShape& shape, Rng& rng) {
    ModelParams p(shape);
    const auto specs = param_specs(shape);
    for (std::size_t i = 0; i < kNumParams; ++i) {
      const double a =
          std::sqrt(1.0 / static_cast<double>(specs[i].kernel * specs[i].fan_in));
      std::uniform_real_distribution<double> u(-a, a);
      Matrix& m = p.values_[i];
      for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = u(rng);
    }
    return p;
  }

  const ModelShape& shape() const { return shape_; }
  const Matrix& operator[](std::size_t i) const { return values_.at(i); }
  Matrix& operator[](std::size_t i) { return values_.at(i); }
  static constexpr std::size_t size() { return kNumParams; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& m : values_) n += static_cast<std::size_t>(m.size());
    return n;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!(a.shape_ == b.shape_)) return false;
    for (std::size_t i = 0; i < kNumParams; ++i) {
      if (a.values_[i] != b.values_[i]) return false;
    }
    return true;
  }

 private:
  ModelShape shape_;
  std::array<Matrix, kNumParams> values_;
};

/// Parameters recorded on a tape, ready for a forward pass.
struct BoundParams {
  std::array<ad::Var, kNumParams> vars;
  ModelShape shape;

  const ad::Var& operator[](std::size_t i) const { return vars[i]; }
};

inline BoundParams bind(ad::Tape& tape, const ModelParams& p,
                        bool requires_grad) {
  BoundParams b;
  b.shape = p.shape();
  for (std::size_t i = 0; i < kNumParams; ++i) {
    b.vars[i] = tape.leaf(p[i], requires_grad);
  }
  return b;
}

/// Reads the gradient of every bound slot.
inline std::array<Matrix, kNumParams> gradients(const BoundParams& b) {
  std::array<Matrix, kNumParams> g;
  for (std::size_t i = 0; i < kNumParams; ++i) g[i] = b.vars[i].grad();
  return g;
}

struct TCamPair {
  ad::Var s;      // T×(C+1)
  ad::Var a;      // T×1
  ad::Var s_bar;  // T×(C+1)
};

namespace detail {

inline void check_input(const ad::Var& x, const ModelShape& s) {
  if (x.cols() != s.feature_dim || x.rows() < 1) {
    throw ShapeError("network input must be Tx" +
                     std::to_string(s.feature_dim) + ", got " +
                     shape_str(x.value()));
  }
}

}  // namespace detail

inline ad::Var attention_forward(const ad::Var& x, const BoundParams& p) {
  detail::check_input(x, p.shape);
  using namespace ad;
  Var h = relu(conv1d_temporal(x, p[kAttConv1W], p[kAttConv1B], kHiddenKernel));
  h = relu(conv1d_temporal(h, p[kAttConv2W], p[kAttConv2B], kHiddenKernel));
  return sigmoid(conv1d_temporal(h, p[kAttConv3W], p[kAttConv3B], 1));
}

/// x + softmax(QKᵀ/√F)·V with Q, K, V linear projections of x.
inline ad::Var nonlocal_forward(const ad::Var& x, const BoundParams& p) {
  using namespace ad;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  Var q = matmul(x, p[kNlQuery]);
  Var k = matmul(x, p[kNlKey]);
  Var v = matmul(x, p[kNlValue]);
  Var w = softmax_rows(scale(matmul_nt(q, k), inv_sqrt));
  return add(x, matmul(w, v));
}

inline ad::Var classifier_forward(const ad::Var& x, const BoundParams& p) {
  detail::check_input(x, p.shape);
  using namespace ad;
  Var h = nonlocal_forward(x, p);
  h = relu(conv1d_temporal(h, p[kClsConv1W], p[kClsConv1B], kHiddenKernel));
  h = relu(conv1d_temporal(h, p[kClsConv2W], p[kClsConv2B], kHiddenKernel));
  h = relu(conv1d_temporal(h, p[kClsConv3W], p[kClsConv3B], kHiddenKernel));
  return conv1d_temporal(h, p[kClsConv4W], p[kClsConv4B], 1);
}

inline TCamPair tcam_forward(const ad::Var& x, const BoundParams& p) {
  TCamPair out;
  out.a = attention_forward(x, p);
  out.s = classifier_forward(x, p);
  out.s_bar = ad::mul_col(out.a, out.s);
  return out;
}

/// Forward values without gradient bookkeeping.
struct TCamValues {
  Matrix s;
  Matrix a;
  Matrix s_bar;
};

inline TCamValues infer(const ModelParams& params, const Matrix& x) {
  ad::Tape tape;
  const BoundParams b = bind(tape, params, false);
  const TCamPair r = tcam_forward(tape.constant(x), b);
  return {r.s.value(), r.a.value(), r.s_bar.value()};
}

// ---------------------------------------------------------------------------
// Checkpoint file.
//
//   "BSCP" u16 version
//   payload: u32 block count, then per block:
//            u32 name length, name bytes, u32 rows, u32 cols,
//            rows·cols f64 row-major
//   u32 CRC32(payload)
//
// A checkpoint may hold several models; block names carry a "<prefix>/"
// (e.g. "student/att.conv1.weight").

inline constexpr char kCheckpointMagic[4] = {'B', 'S', 'C', 'P'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NamedModel {
  std::string prefix;
  ModelParams params;
};

inline std::vector<std::uint8_t> encode_checkpoint(
    const std::vector<NamedModel>& models) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(models.size() * kNumParams));
  for (const auto& m : models) {
    for (std::size_t i = 0; i < kNumParams; ++i) {
      w.str(m.prefix + "/" + std::string(kParamNames[i]));
      const Matrix& v = m.params[i];
      w.u32(static_cast<std::uint32_t>(v.rows()));
      w.u32(static_cast<std::uint32_t>(v.cols()));
      for (Eigen::Index j = 0; j < v.size(); ++j) w.f64(v.data()[j]);
    }
  }
  return frame(kCheckpointMagic, kCheckpointVersion, w.buffer());
}

inline std::vector<NamedModel> decode_checkpoint(
    const std::vector<std::uint8_t>& bytes) {
  ByteReader r =
      unframe(bytes, kCheckpointMagic, kCheckpointVersion, "checkpoint");
  const std::uint32_t n = r.u32();
  if (n % kNumParams != 0) {
    throw FormatError("checkpoint block count is not a whole model");
  }
  std::vector<NamedModel> out;
  for (std::uint32_t m = 0; m < n / kNumParams; ++m) {
    std::array<Matrix, kNumParams> blocks;
    std::string prefix;
    for (std::size_t i = 0; i < kNumParams; ++i) {
      const std::string name = r.str();
      const auto slash = name.find('/');
      if (slash == std::string::npos ||
          name.substr(slash + 1) != kParamNames[i]) {
        throw FormatError("unexpected checkpoint block " + name);
      }
      if (i == 0) {
        prefix = name.substr(0, slash);
      } else if (name.substr(0, slash) != prefix) {
        throw FormatError("checkpoint block " + name + " breaks model " +
                          prefix);
      }
      const std::uint32_t rows = r.u32();
      const std::uint32_t cols = r.u32();
      if (static_cast<std::size_t>(rows) * cols * 8 > r.remaining()) {
        throw FormatError("checkpoint truncated");
      }
      blocks[i].resize(rows, cols);
      for (Eigen::Index j = 0; j < blocks[i].size(); ++j) {
        blocks[i].data()[j] = r.f64();
      }
    }
    ModelShape shape;
    shape.feature_dim = static_cast<int>(blocks[kAttConv1W].rows()) / kHiddenKernel;
    shape.hidden = static_cast<int>(blocks[kAttConv1W].cols());
    shape.num_classes = static_cast<int>(blocks[kClsConv4W].cols()) - 1;
    ModelParams p(shape);
    const auto specs = param_specs(shape);
    for (std::size_t i = 0; i < kNumParams; ++i) {
      if (blocks[i].rows() != specs[i].rows ||
          blocks[i].cols() != specs[i].cols) {
        throw FormatError("checkpoint block " + std::string(kParamNames[i]) +
                          " has inconsistent shape");
      }
      require_finite(blocks[i], "checkpoint");
      p[i] = std::move(blocks[i]);
    }
    out.push_back({prefix, std::move(p)});
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in checkpoint");
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const std::vector<NamedModel>& models) {
  write_file(path, encode_checkpoint(models));
}

inline std::vector<NamedModel> load_checkpoint(
    const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

/// Loads the model stored under `prefix`.
inline ModelParams load_model(const std::filesystem::path& path,
                              const std::string& prefix) {
  for (auto& m : load_checkpoint(path)) {
    if (m.prefix == prefix) return std::move(m.params);
  }
  throw FormatError("checkpoint " + path.string() + " has no model '" +
                    prefix + "'");
}

}  // namespace biscc

#endif  // BISCC_NETWORK_HPP_
