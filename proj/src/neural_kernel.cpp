#include "pixelmpc/neural.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace pixelmpc {

namespace {

constexpr int kLane = 16;
constexpr int kPanel = 8;  // weight rows per packed panel

int padded(int n) { return (n + kLane - 1) / kLane * kLane; }

#if defined(__AVX512F__)

// C[r][n] = act(b[r] + sum_k W[r][k] * H[k][n]) for an MR x (16*NV) tile. The k loop runs in
// order with one FMA per term, identical for every tile shape.
// With Packed, w is a panel laid out as w[k * MR + r]; otherwise rows of length k_dim.
template <int MR, int NV, bool Relu, bool Packed = false>
inline void tile(const float* w, int k_dim, const float* h, int ldh, const float* b, float* c, int ldc) {
  __m512 acc[MR][NV];
#pragma GCC unroll 8
  for (int r = 0; r < MR; ++r) {
    const __m512 bias = _mm512_set1_ps(b[r]);
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) acc[r][v] = bias;
  }
#pragma GCC unroll 2
  for (int k = 0; k < k_dim; ++k) {
    __m512 hv[NV];
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) hv[v] = _mm512_loadu_ps(h + static_cast<std::ptrdiff_t>(k) * ldh + kLane * v);
#pragma GCC unroll 8
    for (int r = 0; r < MR; ++r) {
      const std::ptrdiff_t at = Packed ? static_cast<std::ptrdiff_t>(k) * MR + r : static_cast<std::ptrdiff_t>(r) * k_dim + k;
      const __m512 wk = _mm512_set1_ps(w[at]);
#pragma GCC unroll 4
      for (int v = 0; v < NV; ++v) acc[r][v] = _mm512_fmadd_ps(wk, hv[v], acc[r][v]);
    }
  }
  const __m512 zero = _mm512_setzero_ps();
#pragma GCC unroll 8
  for (int r = 0; r < MR; ++r) {
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) {
      const __m512 out = Relu ? _mm512_max_ps(acc[r][v], zero) : acc[r][v];
      _mm512_storeu_ps(c + static_cast<std::ptrdiff_t>(r) * ldc + kLane * v, out);
    }
  }
}

template <int NV, bool Relu>
inline void column_block(const float* panels, const float* w, int m, int k_dim, const float* h, int ldh, const float* b,
                         float* c, int ldc) {
  int r = 0;
  for (; r + kPanel <= m; r += kPanel) {
    tile<kPanel, NV, Relu, true>(panels + static_cast<std::ptrdiff_t>(r) * k_dim, k_dim, h, ldh, b + r,
                                 c + static_cast<std::ptrdiff_t>(r) * ldc, ldc);
  }
  for (; r + 2 <= m; r += 2) {
    tile<2, NV, Relu>(w + static_cast<std::ptrdiff_t>(r) * k_dim, k_dim, h, ldh, b + r,
                      c + static_cast<std::ptrdiff_t>(r) * ldc, ldc);
  }
  for (; r < m; ++r) {
    tile<1, NV, Relu>(w + static_cast<std::ptrdiff_t>(r) * k_dim, k_dim, h, ldh, b + r,
                      c + static_cast<std::ptrdiff_t>(r) * ldc, ldc);
  }
}

// Column blocks outermost so each block of activations stays in L1 while every weight row uses it.
template <bool Relu>
void layer(const float* panels, const float* w, int m, int k_dim, const float* h, int ldh, const float* b, float* c,
           int ldc, int n) {
  int n0 = 0;
  for (; n0 + 3 * kLane <= n; n0 += 3 * kLane) column_block<3, Relu>(panels, w, m, k_dim, h + n0, ldh, b, c + n0, ldc);
  for (; n0 < n; n0 += kLane) column_block<1, Relu>(panels, w, m, k_dim, h + n0, ldh, b, c + n0, ldc);
}

#else

template <bool Relu>
void layer(const float*, const float* w, int m, int k_dim, const float* h, int ldh, const float* b, float* c, int ldc,
           int n) {
  for (int r = 0; r < m; ++r) {
    float* out = c + static_cast<std::ptrdiff_t>(r) * ldc;
    for (int j = 0; j < n; ++j) out[j] = b[r];
    for (int k = 0; k < k_dim; ++k) {
      const float wk = w[static_cast<std::ptrdiff_t>(r) * k_dim + k];
      const float* hk = h + static_cast<std::ptrdiff_t>(k) * ldh;
      for (int j = 0; j < n; ++j) out[j] = std::fma(wk, hk[j], out[j]);
    }
    if (Relu) {
      for (int j = 0; j < n; ++j) out[j] = std::max(out[j], 0.0f);
    }
  }
}

#endif

}  // namespace

BatchedMlp::BatchedMlp(const NetworkWeights<float>& w, const NetworkSpec& spec) : widths_(spec.widths) {
  spec.validate();
  detail::check_shapes(w, spec);
  for (int l = 0; l < spec.layers(); ++l) {
    const bool relu = spec.activation(l) == Activation::ReLU;
    const bool expected = l + 1 < spec.layers();
    if (relu != expected) throw InvalidArgument("BatchedMlp supports ReLU hidden layers with a linear output");
    weight_.emplace_back(w.weight[l]);
    const int m = spec.widths[l + 1], k_dim = spec.widths[l];
    std::vector<float> panels(static_cast<std::size_t>(m / kPanel * kPanel * k_dim));
    for (int p = 0; p + kPanel <= m; p += kPanel) {
      for (int k = 0; k < k_dim; ++k) {
        for (int r = 0; r < kPanel; ++r) {
          panels[static_cast<std::size_t>(p * k_dim + k * kPanel + r)] = w.weight[l](p + r, k);
        }
      }
    }
    panel_.push_back(std::move(panels));
    bias_.push_back(w.bias[l]);
  }
}

void BatchedMlp::forward(const RowMatrix& in, RowMatrix& out, Workspace& ws) const {
  if (widths_.empty()) throw InvalidArgument("BatchedMlp is empty");
  if (in.rows() != widths_.front()) throw InvalidArgument("BatchedMlp: input width mismatch");
  const int n = static_cast<int>(in.cols());
  const int np = padded(std::max(n, 1));
  const int layers = static_cast<int>(weight_.size());
  ws.layers.resize(static_cast<std::size_t>(layers) + 1);

  RowMatrix& x0 = ws.layers[0];
  if (x0.rows() != in.rows() || x0.cols() != np) x0.resize(in.rows(), np);
  x0.leftCols(n) = in;
  if (np > n) x0.rightCols(np - n).setZero();

  for (int l = 0; l < layers; ++l) {
    RowMatrix& src = ws.layers[static_cast<std::size_t>(l)];
    RowMatrix& dst = ws.layers[static_cast<std::size_t>(l) + 1];
    const int m = widths_[static_cast<std::size_t>(l) + 1];
    if (dst.rows() != m || dst.cols() != np) dst.resize(m, np);
    const int k_dim = widths_[static_cast<std::size_t>(l)];
    if (l + 1 < layers) {
      layer<true>(panel_[l].data(), weight_[l].data(), m, k_dim, src.data(), np, bias_[l].data(), dst.data(), np, np);
    } else {
      layer<false>(panel_[l].data(), weight_[l].data(), m, k_dim, src.data(), np, bias_[l].data(), dst.data(), np, np);
    }
  }
  out = ws.layers.back().leftCols(n);
}

}  // namespace pixelmpc
