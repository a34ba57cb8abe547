#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pixelmpc/errors.hpp"
#include "pixelmpc/random.hpp"

namespace pixelmpc {

enum class Activation { ReLU, Linear };

struct NetworkSpec {
  std::vector<int> widths{10, 128, 128, 128, 2};
  std::vector<Activation> activations{};  // one per affine layer; empty means ReLU hidden, linear output
  float dropout = 0.10f;

  int layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  Activation activation(int layer) const;
  void validate() const;
};

template <typename Scalar> using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Per-layer weight matrices (out x in) and bias vectors.
template <typename Scalar>
struct NetworkWeights {
  std::vector<MatrixX<Scalar>> weight;
  std::vector<VectorX<Scalar>> bias;

  static NetworkWeights zeros(const NetworkSpec& spec) {
    NetworkWeights w;
    for (int l = 0; l < spec.layers(); ++l) {
      w.weight.push_back(MatrixX<Scalar>::Zero(spec.widths[l + 1], spec.widths[l]));
      w.bias.push_back(VectorX<Scalar>::Zero(spec.widths[l + 1]));
    }
    return w;
  }

  template <typename Other>
  NetworkWeights<Other> cast() const {
    NetworkWeights<Other> out;
    for (const auto& m : weight) out.weight.push_back(m.template cast<Other>());
    for (const auto& b : bias) out.bias.push_back(b.template cast<Other>());
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weight.size(); ++l) n += weight[l].size() + bias[l].size();
    return n;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weight.size(); ++l) {
      if (!weight[l].allFinite() || !bias[l].allFinite()) return false;
    }
    return true;
  }

  bool bitwise_equal(const NetworkWeights& other) const {
    if (weight.size() != other.weight.size()) return false;
    for (std::size_t l = 0; l < weight.size(); ++l) {
      if (weight[l].rows() != other.weight[l].rows() || weight[l].cols() != other.weight[l].cols()) return false;
      if (std::memcmp(weight[l].data(), other.weight[l].data(), sizeof(Scalar) * weight[l].size()) != 0) return false;
      if (std::memcmp(bias[l].data(), other.bias[l].data(), sizeof(Scalar) * bias[l].size()) != 0) return false;
    }
    return true;
  }

  /// Visit every parameter in storage order (layer, weight then bias).
  template <typename Fn>
  void for_each_parameter(Fn&& fn) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
      for (Eigen::Index i = 0; i < weight[l].size(); ++i) fn(weight[l].data()[i]);
      for (Eigen::Index i = 0; i < bias[l].size(); ++i) fn(bias[l].data()[i]);
    }
  }
};

/// Uniform He-style initialization scaled by fan-in; biases start at zero.
template <typename Scalar>
NetworkWeights<Scalar> init_weights(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  NetworkWeights<Scalar> w = NetworkWeights<Scalar>::zeros(spec);
  for (int l = 0; l < spec.layers(); ++l) {
    const double bound = std::sqrt(6.0 / spec.widths[l]);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < w.weight[l].size(); ++i) w.weight[l].data()[i] = Scalar(dist(rng));
  }
  return w;
}

/// Inference is deterministic with no dropout; training draws dropout masks from `seed`.
struct ForwardMode {
  bool train = false;
  std::uint64_t seed = 0;
  static ForwardMode inference() { return {}; }
  static ForwardMode training(std::uint64_t seed) { return {true, seed}; }
};

/// Per-layer activations of a batch forward pass (columns are samples).
template <typename Scalar>
struct ForwardTrace {
  std::vector<MatrixX<Scalar>> pre;    // affine outputs z_l
  std::vector<MatrixX<Scalar>> post;   // activations a_l after dropout; post[0] is the input
  std::vector<MatrixX<Scalar>> mask;   // inverted-dropout scale per hidden unit (empty in inference)
};

namespace detail {

template <typename Scalar>
void check_shapes(const NetworkWeights<Scalar>& w, const NetworkSpec& spec) {
  if (static_cast<int>(w.weight.size()) != spec.layers() || w.bias.size() != w.weight.size()) {
    throw InvalidArgument("network weights do not match the layer count");
  }
  for (int l = 0; l < spec.layers(); ++l) {
    if (w.weight[l].rows() != spec.widths[l + 1] || w.weight[l].cols() != spec.widths[l] ||
        w.bias[l].size() != spec.widths[l + 1]) {
      throw InvalidArgument("network weights do not match the layer widths");
    }
  }
}
}  // namespace detail

template <typename Scalar>
ForwardTrace<Scalar> forward_trace(const NetworkWeights<Scalar>& w, const NetworkSpec& spec,
                                   const MatrixX<Scalar>& x, ForwardMode mode) {
  detail::check_shapes(w, spec);
  if (x.rows() != spec.input_width()) throw InvalidArgument("input width does not match the network");
  ForwardTrace<Scalar> t;
  t.post.push_back(x);
  Rng rng(mode.seed);
  const double keep = 1.0 - double(spec.dropout);
  const Scalar scale = Scalar(1.0 / keep);
  for (int l = 0; l < spec.layers(); ++l) {
    MatrixX<Scalar> z = w.weight[l] * t.post.back();
    z.colwise() += w.bias[l];
    MatrixX<Scalar> a = z;
    if (spec.activation(l) == Activation::ReLU) a = a.cwiseMax(Scalar(0));
    const bool hidden = l + 1 < spec.layers();
    if (mode.train && hidden && spec.dropout > 0.0f) {
      MatrixX<Scalar> m(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          m(r, c) = unit_uniform(rng) < keep ? scale : Scalar(0);
        }
      }
      a = a.cwiseProduct(m);
      t.mask.push_back(std::move(m));
    } else {
      t.mask.emplace_back();
    }
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(a));
  }
  if (!t.post.back().allFinite()) throw NumericalFailure("non-finite network activations");
  return t;
}

/// Batch forward pass; columns of `x` are samples.
template <typename Scalar>
MatrixX<Scalar> forward_batch(const NetworkWeights<Scalar>& w, const NetworkSpec& spec,
                              const MatrixX<Scalar>& x, ForwardMode mode = ForwardMode::inference()) {
  return forward_trace(w, spec, x, mode).post.back();
}

template <typename Scalar>
VectorX<Scalar> forward(const NetworkWeights<Scalar>& w, const NetworkSpec& spec,
                        const VectorX<Scalar>& x, ForwardMode mode = ForwardMode::inference()) {
  return forward_batch(w, spec, MatrixX<Scalar>(x), mode).col(0);
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss = Scalar(0);
  NetworkWeights<Scalar> grad;
};

/// Mean over the batch of the summed squared output error, and its gradient.
/// With a dropout seed the masks are drawn exactly as in ForwardMode::training(seed).
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const NetworkWeights<Scalar>& w, const NetworkSpec& spec,
                                  const MatrixX<Scalar>& x, const MatrixX<Scalar>& target,
                                  std::optional<std::uint64_t> dropout_seed = std::nullopt) {
  if (x.cols() == 0) throw InvalidArgument("loss_and_grad: empty batch");
  if (target.rows() != spec.output_width() || target.cols() != x.cols()) {
    throw InvalidArgument("loss_and_grad: target shape mismatch");
  }
  const ForwardMode mode = dropout_seed ? ForwardMode::training(*dropout_seed) : ForwardMode::inference();
  const ForwardTrace<Scalar> t = forward_trace(w, spec, x, mode);
  const Scalar inv_n = Scalar(1) / Scalar(x.cols());
  const MatrixX<Scalar> err = t.post.back() - target;

  LossAndGrad<Scalar> out;
  out.loss = err.squaredNorm() * inv_n;
  if (!std::isfinite(double(out.loss))) throw NumericalFailure("non-finite loss");
  out.grad = NetworkWeights<Scalar>::zeros(spec);

  MatrixX<Scalar> delta = Scalar(2) * inv_n * err;
  for (int l = spec.layers() - 1; l >= 0; --l) {
    if (spec.activation(l) == Activation::ReLU) {
      delta = delta.cwiseProduct((t.pre[l].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
    if (t.mask[l].size() > 0) delta = delta.cwiseProduct(t.mask[l]);
    out.grad.weight[l].noalias() = delta * t.post[l].transpose();
    out.grad.bias[l] = delta.rowwise().sum();
    if (l > 0) delta = w.weight[l].transpose() * delta;
  }
  return out;
}

template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  NetworkWeights<Scalar> m;
  NetworkWeights<Scalar> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(const NetworkSpec& spec, double lr = 1e-3) {
    AdamState s;
    s.m = NetworkWeights<Scalar>::zeros(spec);
    s.v = NetworkWeights<Scalar>::zeros(spec);
    s.lr = lr;
    return s;
  }
};

/// In-place Adam update with bias correction.
template <typename Scalar>
void adam_update(AdamState<Scalar>& s, NetworkWeights<Scalar>& w, const NetworkWeights<Scalar>& g) {
  if (s.m.weight.size() != w.weight.size() || g.weight.size() != w.weight.size()) {
    throw InvalidArgument("adam: shape mismatch");
  }
  ++s.step;
  const Scalar b1 = Scalar(s.beta1), b2 = Scalar(s.beta2);
  const Scalar c1 = Scalar(1.0 - std::pow(s.beta1, double(s.step)));
  const Scalar c2 = Scalar(1.0 - std::pow(s.beta2, double(s.step)));
  const Scalar lr = Scalar(s.lr), eps = Scalar(s.eps);
  auto apply = [&](auto& param, auto& m, auto& v, const auto& grad) {
    if (param.size() != grad.size() || m.size() != grad.size()) throw InvalidArgument("adam: shape mismatch");
    m.array() = b1 * m.array() + (Scalar(1) - b1) * grad.array();
    v.array() = b2 * v.array() + (Scalar(1) - b2) * grad.array().square();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < w.weight.size(); ++l) {
    apply(w.weight[l], s.m.weight[l], s.v.weight[l], g.weight[l]);
    apply(w.bias[l], s.m.bias[l], s.v.bias[l], g.bias[l]);
  }
}

template <typename Scalar>
std::pair<AdamState<Scalar>, NetworkWeights<Scalar>> adam_step(AdamState<Scalar> s, NetworkWeights<Scalar> w,
                                                               const NetworkWeights<Scalar>& g) {
  adam_update(s, w, g);
  return {std::move(s), std::move(w)};
}

struct LoadedNetwork {
  NetworkSpec spec;
  NetworkWeights<float> weights;
  std::vector<unsigned char> trailer;  // bytes after the last bias vector, if any
};

/// "DOF1" weights file: magic, u32 version, u32 layer count, u32 widths, f32 dropout, then per
/// layer the row-major weight matrix and the bias vector, all little-endian. An optional
/// trailer is appended verbatim.
void save_weights(const NetworkWeights<float>& w, const NetworkSpec& spec, const std::filesystem::path& path,
                  const std::vector<unsigned char>& trailer = {});
LoadedNetwork load_weights(const std::filesystem::path& path);

/// Batched float inference for the fixed topology (ReLU hidden, linear output).
///
/// Inputs and outputs are feature-major: row k holds feature k for every sample, so the
/// samples of one feature are contiguous. Each output column depends only on its own input
/// column and is computed with a fixed summation order, so results do not depend on the
/// batch size or the column position.
class BatchedMlp {
 public:
  using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BatchedMlp() = default;
  BatchedMlp(const NetworkWeights<float>& w, const NetworkSpec& spec);

  /// Scratch buffers; one per concurrent caller.
  struct Workspace {
    std::vector<RowMatrix> layers;
  };

  /// in: input_width x n, out: resized to output_width x n.
  void forward(const RowMatrix& in, RowMatrix& out, Workspace& ws) const;
  void forward(const RowMatrix& in, RowMatrix& out) const {
    Workspace ws;
    forward(in, out, ws);
  }

  int input_width() const { return widths_.empty() ? 0 : widths_.front(); }
  int output_width() const { return widths_.empty() ? 0 : widths_.back(); }
  bool empty() const { return widths_.empty(); }

 private:
  std::vector<int> widths_;
  std::vector<RowMatrix> weight_;
  std::vector<std::vector<float>> panel_;  // full 8-row panels, column-interleaved
  std::vector<Eigen::VectorXf> bias_;
};

}  // namespace pixelmpc
