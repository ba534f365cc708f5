#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lila/numerics/tape.hpp"
#include "lila/numerics/tensor.hpp"

// Primitive differentiable ops. Every op validates shapes, computes its output
// eagerly and records a closure that accumulates input gradients.

namespace lila::num {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using CMatMap = Eigen::Map<const RowMat<T>>;

[[noreturn]] inline void shape_error(const std::string& op, const Shape& a, const Shape& b = {}) {
  std::string msg = op + ": incompatible shape " + shape_str(a);
  if (!b.empty()) msg += " and " + shape_str(b);
  throw std::invalid_argument(msg);
}

inline void require_rank(const std::string& op, const Shape& s, int rank) {
  if (static_cast<int>(s.size()) != rank)
    throw std::invalid_argument(op + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
}

template <class T>
void same_tape(Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw std::invalid_argument("op mixes vars from different tapes");
}

// out(m,n) += a(m,k) * b(k,n), with optional transposes.
template <class T>
void gemm_acc(const T* a, int ar, int ac, bool ta, const T* b, int br, int bc, bool tb, T* out, int m,
              int n) {
  CMatMap<T> A(a, ar, ac);
  CMatMap<T> B(b, br, bc);
  MatMap<T> C(out, m, n);
  if (!ta && !tb) C.noalias() += A * B;
  else if (ta && !tb) C.noalias() += A.transpose() * B;
  else if (!ta && tb) C.noalias() += A * B.transpose();
  else C.noalias() += A.transpose() * B.transpose();
}

}  // namespace detail

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  detail::same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) detail::shape_error("matmul", A.shape(), B.shape());
  const int m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor<T> out({m, n});
  detail::gemm_acc(A.data(), m, k, false, B.data(), k, n, false, out.data(), m, n);
  return a.tape->push(std::move(out), {a.id, b.id}, [m, k, n](Tape<T>& t, int self) {
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto& gout = t.grad_slot(self);
    if (t.requires_grad(ia))
      detail::gemm_acc(gout.data(), m, n, false, t.value(ib).data(), k, n, true, t.grad_slot(ia).data(), m, k);
    if (t.requires_grad(ib))
      detail::gemm_acc(t.value(ia).data(), m, k, true, gout.data(), m, n, false, t.grad_slot(ib).data(), k, n);
  });
}

/// x[..., n] + b[n]
template <class T>
Var<T> add_bias(Var<T> x, Var<T> b) {
  detail::same_tape(x, b);
  const auto& X = x.value();
  const auto& Bv = b.value();
  if (Bv.rank() != 1 || X.rank() < 1 || X.dim(-1) != Bv.dim(0)) detail::shape_error("add_bias", X.shape(), Bv.shape());
  const int n = Bv.dim(0);
  Tensor<T> out = X;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += Bv[i % n];
  return x.tape->push(std::move(out), {x.id, b.id}, [n](Tape<T>& t, int self) {
    const auto& g = t.grad_slot(self);
    const int ix = t.inputs(self)[0], ib = t.inputs(self)[1];
    if (t.requires_grad(ix)) {
      auto& gx = t.grad_slot(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
    }
  });
}

namespace detail {

template <class T, class Fwd, class Bwd>
Var<T> binary(const char* name, Var<T> a, Var<T> b, Fwd fwd, Bwd bwd) {
  same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.shape() != B.shape()) shape_error(name, A.shape(), B.shape());
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(A[i], B[i]);
  return a.tape->push(std::move(out), {a.id, b.id}, [bwd](Tape<T>& t, int self) {
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto& g = t.grad_slot(self);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    T* ga = t.requires_grad(ia) ? t.grad_slot(ia).data() : nullptr;
    T* gb = t.requires_grad(ib) ? t.grad_slot(ib).data() : nullptr;
    for (std::size_t i = 0; i < g.size(); ++i) bwd(g[i], av[i], bv[i], ga ? ga + i : nullptr, gb ? gb + i : nullptr);
  });
}

// Elementwise op whose derivative is expressed through its output y.
template <class T, class Fwd, class DyFromY>
Var<T> unary_y(Var<T> x, Fwd fwd, DyFromY dy) {
  const auto& X = x.value();
  Tensor<T> out(X.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(X[i]);
  return x.tape->push(std::move(out), {x.id}, [dy](Tape<T>& t, int self) {
    const int ix = t.inputs(self)[0];
    const auto& g = t.grad_slot(self);
    const auto& y = t.value(self);
    auto& gx = t.grad_slot(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dy(y[i]);
  });
}

}  // namespace detail

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  return detail::binary<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T g, T, T, T* ga, T* gb) {
        if (ga) *ga += g;
        if (gb) *gb += g;
      });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  return detail::binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T g, T, T, T* ga, T* gb) {
        if (ga) *ga += g;
        if (gb) *gb -= g;
      });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  return detail::binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T g, T x, T y, T* ga, T* gb) {
        if (ga) *ga += g * y;
        if (gb) *gb += g * x;
      });
}

template <class T>
Var<T> scale(Var<T> x, T s) {
  const auto& X = x.value();
  Tensor<T> out(X.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * s;
  return x.tape->push(std::move(out), {x.id}, [s](Tape<T>& t, int self) {
    const auto& g = t.grad_slot(self);
    auto& gx = t.grad_slot(t.inputs(self)[0]);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
  });
}

template <class T>
Var<T> relu(Var<T> x) {
  return detail::unary_y(x, [](T v) { return v > T(0) ? v : T(0); }, [](T y) { return y > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> sigmoid(Var<T> x) {
  return detail::unary_y(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> tanh(Var<T> x) {
  return detail::unary_y(x, [](T v) { return std::tanh(v); }, [](T y) { return T(1) - y * y; });
}

/// Softmax over the last axis, max-shifted.
template <class T>
Var<T> softmax(Var<T> x) {
  const auto& X = x.value();
  if (X.rank() < 1) detail::shape_error("softmax", X.shape());
  const int n = X.dim(-1);
  const std::size_t rows = X.size() / n;
  Tensor<T> out(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = X.data() + r * n;
    T* o = out.data() + r * n;
    T mx = *std::max_element(in, in + n);
    T z = 0;
    for (int j = 0; j < n; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (int j = 0; j < n; ++j) o[j] /= z;
  }
  return x.tape->push(std::move(out), {x.id}, [n, rows](Tape<T>& t, int self) {
    const auto& g = t.grad_slot(self);
    const auto& y = t.value(self);
    auto& gx = t.grad_slot(t.inputs(self)[0]);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t o = r * n;
      T dot = 0;
      for (int j = 0; j < n; ++j) dot += g[o + j] * y[o + j];
      for (int j = 0; j < n; ++j) gx[o + j] += y[o + j] * (g[o + j] - dot);
    }
  });
}

/// Sum of all entries, as a scalar.
template <class T>
Var<T> sum(Var<T> x) {
  const auto& X = x.value();
  T s = 0;
  for (std::size_t i = 0; i < X.size(); ++i) s += X[i];
  return x.tape->push(Tensor<T>::scalar(s), {x.id}, [](Tape<T>& t, int self) {
    const T g = t.grad_slot(self)[0];
    auto& gx = t.grad_slot(t.inputs(self)[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

/// sum((a - b)^2) as a scalar.
template <class T>
Var<T> squared_error(Var<T> a, Var<T> b) {
  detail::same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.shape() != B.shape()) detail::shape_error("squared_error", A.shape(), B.shape());
  T s = 0;
  for (std::size_t i = 0; i < A.size(); ++i) s += (A[i] - B[i]) * (A[i] - B[i]);
  return a.tape->push(Tensor<T>::scalar(s), {a.id, b.id}, [](Tape<T>& t, int self) {
    const T g = t.grad_slot(self)[0];
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad_slot(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += T(2) * g * (av[i] - bv[i]);
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_slot(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= T(2) * g * (av[i] - bv[i]);
    }
  });
}

/// Identity in the forward pass; blocks gradient flow.
template <class T>
Var<T> stop_gradient(Var<T> x) {
  return x.tape->constant(x.value());
}

template <class T>
Var<T> reshape(Var<T> x, Shape s) {
  Tensor<T> out = x.value().reshaped(std::move(s));
  return x.tape->push(std::move(out), {x.id}, [](Tape<T>& t, int self) {
    const auto& g = t.grad_slot(self);
    auto& gx = t.grad_slot(t.inputs(self)[0]);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

/// Concatenates two matrices along columns: [m,p] ++ [m,q] -> [m,p+q].
template <class T>
Var<T> concat(Var<T> a, Var<T> b) {
  detail::same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(0) != B.dim(0)) detail::shape_error("concat", A.shape(), B.shape());
  const int m = A.dim(0), p = A.dim(1), q = B.dim(1);
  Tensor<T> out({m, p + q});
  for (int r = 0; r < m; ++r) {
    std::copy_n(A.data() + r * p, p, out.data() + r * (p + q));
    std::copy_n(B.data() + r * q, q, out.data() + r * (p + q) + p);
  }
  return a.tape->push(std::move(out), {a.id, b.id}, [m, p, q](Tape<T>& t, int self) {
    const auto& g = t.grad_slot(self);
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    if (t.requires_grad(ia)) {
      auto& ga = t.grad_slot(ia);
      for (int r = 0; r < m; ++r)
        for (int j = 0; j < p; ++j) ga[r * p + j] += g[r * (p + q) + j];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_slot(ib);
      for (int r = 0; r < m; ++r)
        for (int j = 0; j < q; ++j) gb[r * q + j] += g[r * (p + q) + p + j];
    }
  });
}

/// Columns [begin, begin+len) of a matrix.
template <class T>
Var<T> slice_cols(Var<T> x, int begin, int len) {
  const auto& X = x.value();
  if (X.rank() != 2 || begin < 0 || len <= 0 || begin + len > X.dim(1))
    throw std::invalid_argument("slice_cols: [" + std::to_string(begin) + "," + std::to_string(begin + len) +
                                ") out of range for " + shape_str(X.shape()));
  const int m = X.dim(0), n = X.dim(1);
  Tensor<T> out({m, len});
  for (int r = 0; r < m; ++r) std::copy_n(X.data() + r * n + begin, len, out.data() + r * len);
  return x.tape->push(std::move(out), {x.id}, [m, n, begin, len](Tape<T>& t, int self) {
    const auto& g = t.grad_slot(self);
    auto& gx = t.grad_slot(t.inputs(self)[0]);
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < len; ++j) gx[r * n + begin + j] += g[r * len + j];
  });
}

/// Picks x[i, idx[i]] for each row: [m,n] -> [m].
template <class T>
Var<T> gather_rows(Var<T> x, const std::vector<int>& idx) {
  const auto& X = x.value();
  if (X.rank() != 2 || static_cast<int>(idx.size()) != X.dim(0))
    throw std::invalid_argument("gather_rows: " + std::to_string(idx.size()) + " indices for " + shape_str(X.shape()));
  const int m = X.dim(0), n = X.dim(1);
  Tensor<T> out({m});
  for (int r = 0; r < m; ++r) {
    if (idx[r] < 0 || idx[r] >= n) throw std::out_of_range("gather_rows: index " + std::to_string(idx[r]));
    out[r] = X[r * n + idx[r]];
  }
  return x.tape->push(std::move(out), {x.id}, [idx, n](Tape<T>& t, int self) {
    const auto& g = t.grad_slot(self);
    auto& gx = t.grad_slot(t.inputs(self)[0]);
    for (std::size_t r = 0; r < idx.size(); ++r) gx[r * n + idx[r]] += g[r];
  });
}

/// Row-wise max of a matrix: [m,n] -> [m]. Gradient goes to the lowest
/// maximizing index.
template <class T>
Var<T> max_rows(Var<T> x) {
  const auto& X = x.value();
  if (X.rank() != 2) detail::shape_error("max_rows", X.shape());
  const int m = X.dim(0), n = X.dim(1);
  Tensor<T> out({m});
  std::vector<int> arg(m);
  for (int r = 0; r < m; ++r) {
    const T* row = X.data() + r * n;
    arg[r] = static_cast<int>(std::max_element(row, row + n) - row);
    out[r] = row[arg[r]];
  }
  return x.tape->push(std::move(out), {x.id}, [arg, n](Tape<T>& t, int self) {
    const auto& g = t.grad_slot(self);
    auto& gx = t.grad_slot(t.inputs(self)[0]);
    for (std::size_t r = 0; r < arg.size(); ++r) gx[r * n + arg[r]] += g[r];
  });
}

/// x[m,n] - mean over each row, broadcast back: [m,n] -> [m,n].
template <class T>
Var<T> center_rows(Var<T> x) {
  const auto& X = x.value();
  if (X.rank() != 2) detail::shape_error("center_rows", X.shape());
  const int m = X.dim(0), n = X.dim(1);
  Tensor<T> out = X;
  for (int r = 0; r < m; ++r) {
    T mean = 0;
    for (int j = 0; j < n; ++j) mean += X[r * n + j];
    mean /= T(n);
    for (int j = 0; j < n; ++j) out[r * n + j] -= mean;
  }
  return x.tape->push(std::move(out), {x.id}, [m, n](Tape<T>& t, int self) {
    const auto& g = t.grad_slot(self);
    auto& gx = t.grad_slot(t.inputs(self)[0]);
    for (int r = 0; r < m; ++r) {
      T mean = 0;
      for (int j = 0; j < n; ++j) mean += g[r * n + j];
      mean /= T(n);
      for (int j = 0; j < n; ++j) gx[r * n + j] += g[r * n + j] - mean;
    }
  });
}

enum class Padding { valid, same };

struct ConvGeometry {
  int batch, in_h, in_w, in_c, k_h, k_w, filters, stride;
  int out_h, out_w, pad_top, pad_left;
};

inline ConvGeometry conv_geometry(const Shape& x, const Shape& w, int stride, Padding pad) {
  ConvGeometry g{};
  g.batch = x[0];
  g.in_h = x[1];
  g.in_w = x[2];
  g.in_c = x[3];
  g.k_h = w[0];
  g.k_w = w[1];
  g.filters = w[3];
  g.stride = stride;
  if (pad == Padding::valid) {
    g.out_h = (g.in_h - g.k_h) / stride + 1;
    g.out_w = (g.in_w - g.k_w) / stride + 1;
  } else {
    g.out_h = (g.in_h + stride - 1) / stride;
    g.out_w = (g.in_w + stride - 1) / stride;
    g.pad_top = std::max((g.out_h - 1) * stride + g.k_h - g.in_h, 0) / 2;
    g.pad_left = std::max((g.out_w - 1) * stride + g.k_w - g.in_w, 0) / 2;
  }
  return g;
}

/// 2-D cross-correlation. x: [B,H,W,C], w: [KH,KW,C,F] -> [B,OH,OW,F].
/// `same` zero-pads so that OH = ceil(H / stride).
template <class T>
Var<T> conv2d(Var<T> x, Var<T> w, int stride, Padding padding) {
  detail::same_tape(x, w);
  const auto& X = x.value();
  const auto& W = w.value();
  if (X.rank() != 4 || W.rank() != 4 || X.dim(3) != W.dim(2) || stride < 1)
    detail::shape_error("conv2d", X.shape(), W.shape());
  const ConvGeometry g = conv_geometry(X.shape(), W.shape(), stride, padding);
  if (g.out_h < 1 || g.out_w < 1 || (padding == Padding::valid && (g.k_h > g.in_h || g.k_w > g.in_w)))
    detail::shape_error("conv2d (kernel larger than input)", X.shape(), W.shape());

  const int rows = g.batch * g.out_h * g.out_w;
  const int patch = g.k_h * g.k_w * g.in_c;
  // im2col: one row per output pixel, columns ordered (kh, kw, c) to match W.
  auto cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows) * patch, T(0));
  for (int b = 0; b < g.batch; ++b)
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox) {
        T* row = cols->data() + static_cast<std::size_t>((b * g.out_h + oy) * g.out_w + ox) * patch;
        for (int ky = 0; ky < g.k_h; ++ky) {
          const int iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.k_w; ++kx) {
            const int ix = ox * g.stride + kx - g.pad_left;
            if (ix < 0 || ix >= g.in_w) continue;
            std::copy_n(X.data() + ((static_cast<std::size_t>(b) * g.in_h + iy) * g.in_w + ix) * g.in_c, g.in_c,
                        row + (ky * g.k_w + kx) * g.in_c);
          }
        }
      }
  Tensor<T> out({g.batch, g.out_h, g.out_w, g.filters});
  detail::gemm_acc(cols->data(), rows, patch, false, W.data(), patch, g.filters, false, out.data(), rows, g.filters);

  return x.tape->push(std::move(out), {x.id, w.id}, [g, cols, rows, patch](Tape<T>& t, int self) {
    const int ix = t.inputs(self)[0], iw = t.inputs(self)[1];
    const auto& gout = t.grad_slot(self);
    if (t.requires_grad(iw))
      detail::gemm_acc(cols->data(), rows, patch, true, gout.data(), rows, g.filters, false, t.grad_slot(iw).data(),
                       patch, g.filters);
    if (t.requires_grad(ix)) {
      std::vector<T> dcols(static_cast<std::size_t>(rows) * patch, T(0));
      detail::gemm_acc(gout.data(), rows, g.filters, false, t.value(iw).data(), patch, g.filters, true, dcols.data(),
                       rows, patch);
      auto& gx = t.grad_slot(ix);
      for (int b = 0; b < g.batch; ++b)
        for (int oy = 0; oy < g.out_h; ++oy)
          for (int ox = 0; ox < g.out_w; ++ox) {
            const T* row = dcols.data() + static_cast<std::size_t>((b * g.out_h + oy) * g.out_w + ox) * patch;
            for (int ky = 0; ky < g.k_h; ++ky) {
              const int iy = oy * g.stride + ky - g.pad_top;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int kx = 0; kx < g.k_w; ++kx) {
                const int xx = ox * g.stride + kx - g.pad_left;
                if (xx < 0 || xx >= g.in_w) continue;
                T* dst = gx.data() + ((static_cast<std::size_t>(b) * g.in_h + iy) * g.in_w + xx) * g.in_c;
                const T* src = row + (ky * g.k_w + kx) * g.in_c;
                for (int c = 0; c < g.in_c; ++c) dst[c] += src[c];
              }
            }
          }
    }
  });
}

/// LSTM cell with gate order (input, forget, candidate, output).
/// x: [B,I], h,c: [B,H], w: [I+H, 4H], b: [4H]. Returns {h', c'}.
template <class T>
std::pair<Var<T>, Var<T>> lstm_cell(Var<T> x, Var<T> h, Var<T> c, Var<T> w, Var<T> b) {
  const int hidden = h.value().dim(1);
  if (w.value().rank() != 2 || w.value().dim(0) != x.value().dim(1) + hidden || w.value().dim(1) != 4 * hidden)
    detail::shape_error("lstm_cell weights", w.value().shape(), Shape{x.value().dim(1) + hidden, 4 * hidden});
  if (c.value().shape() != h.value().shape()) detail::shape_error("lstm_cell state", h.value().shape(), c.value().shape());
  Var<T> gates = add_bias(matmul(concat(x, h), w), b);
  Var<T> i = sigmoid(slice_cols(gates, 0, hidden));
  Var<T> f = sigmoid(slice_cols(gates, hidden, hidden));
  Var<T> g = tanh(slice_cols(gates, 2 * hidden, hidden));
  Var<T> o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  Var<T> c_next = add(mul(f, c), mul(i, g));
  Var<T> h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

template <class T>
bool all_finite(const Tensor<T>& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](T v) { return std::isfinite(v); });
}

}  // namespace lila::num
