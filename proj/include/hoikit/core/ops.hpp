#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hoikit/core/tensor.hpp"
#include "hoikit/errors.hpp"

namespace hoikit {

template <class T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape != b.shape) throw ShapeError(std::string(op) + ": operand shapes differ");
}

template <class T>
inline Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  Tensor<T> out = op_result<T>(a.shape, {a, b}, "add");
  const auto& av = *a.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (out.node) {
    auto g = out.grad;
    Tensor<T> pa = a, pb = b;
    out.node->run = [g, pa, pb]() {
      if (pa.grad)
        for (std::size_t i = 0; i < g->size(); ++i) (*pa.grad)[i] += (*g)[i];
      if (pb.grad)
        for (std::size_t i = 0; i < g->size(); ++i) (*pb.grad)[i] += (*g)[i];
    };
  }
  return out;
}

template <class T>
inline Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  Tensor<T> out = op_result<T>(a.shape, {a, b}, "sub");
  const auto& av = *a.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (out.node) {
    auto g = out.grad;
    Tensor<T> pa = a, pb = b;
    out.node->run = [g, pa, pb]() {
      if (pa.grad)
        for (std::size_t i = 0; i < g->size(); ++i) (*pa.grad)[i] += (*g)[i];
      if (pb.grad)
        for (std::size_t i = 0; i < g->size(); ++i) (*pb.grad)[i] -= (*g)[i];
    };
  }
  return out;
}

template <class T>
inline Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  Tensor<T> out = op_result<T>(a.shape, {a, b}, "mul");
  const auto& av = *a.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (out.node) {
    auto g = out.grad;
    Tensor<T> pa = a, pb = b;
    out.node->run = [g, pa, pb]() {
      if (pa.grad)
        for (std::size_t i = 0; i < g->size(); ++i) (*pa.grad)[i] += (*g)[i] * (*pb.data)[i];
      if (pb.grad)
        for (std::size_t i = 0; i < g->size(); ++i) (*pb.grad)[i] += (*g)[i] * (*pa.data)[i];
    };
  }
  return out;
}

template <class T>
inline Tensor<T> scale(const Tensor<T>& a, T c) {
  Tensor<T> out = op_result<T>(a.shape, {a}, "scale");
  const auto& av = *a.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * c;
  if (out.node) {
    auto g = out.grad;
    Tensor<T> pa = a;
    out.node->run = [g, pa, c]() {
      if (pa.grad)
        for (std::size_t i = 0; i < g->size(); ++i) (*pa.grad)[i] += (*g)[i] * c;
    };
  }
  return out;
}

// a [M x K] * b [K x N] -> [M x N]
template <class T>
inline Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2) throw ShapeError("matmul: operands must be 2-d");
  if (a.shape[1] != b.shape[0]) throw ShapeError("matmul: inner dimensions differ");
  const int M = a.shape[0], K = a.shape[1], N = b.shape[1];
  Tensor<T> out = op_result<T>({M, N}, {a, b}, "matmul");
  const auto& av = *a.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) {
      const T x = av[std::size_t(m) * K + k];
      for (int n = 0; n < N; ++n) ov[std::size_t(m) * N + n] += x * bv[std::size_t(k) * N + n];
    }
  if (out.node) {
    auto g = out.grad;
    Tensor<T> pa = a, pb = b;
    out.node->run = [g, pa, pb, M, K, N]() {
      const auto& gv = *g;
      if (pa.grad) {  // dA = G * B^T
        auto& ga = *pa.grad;
        const auto& bv2 = *pb.data;
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n) {
            const T gx = gv[std::size_t(m) * N + n];
            for (int k = 0; k < K; ++k) ga[std::size_t(m) * K + k] += gx * bv2[std::size_t(k) * N + n];
          }
      }
      if (pb.grad) {  // dB = A^T * G
        auto& gb = *pb.grad;
        const auto& av2 = *pa.data;
        for (int m = 0; m < M; ++m)
          for (int k = 0; k < K; ++k) {
            const T x = av2[std::size_t(m) * K + k];
            for (int n = 0; n < N; ++n) gb[std::size_t(k) * N + n] += x * gv[std::size_t(m) * N + n];
          }
      }
    };
  }
  return out;
}

// a [M x K] * b^T where b is [N x K] -> [M x N]; avoids an explicit transpose
template <class T>
inline Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2) throw ShapeError("matmul_nt: operands must be 2-d");
  if (a.shape[1] != b.shape[1]) throw ShapeError("matmul_nt: inner dimensions differ");
  const int M = a.shape[0], K = a.shape[1], N = b.shape[0];
  Tensor<T> out = op_result<T>({M, N}, {a, b}, "matmul_nt");
  const auto& av = *a.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) {
      T acc = T(0);
      for (int k = 0; k < K; ++k) acc += av[std::size_t(m) * K + k] * bv[std::size_t(n) * K + k];
      ov[std::size_t(m) * N + n] = acc;
    }
  if (out.node) {
    auto g = out.grad;
    Tensor<T> pa = a, pb = b;
    out.node->run = [g, pa, pb, M, K, N]() {
      const auto& gv = *g;
      if (pa.grad) {  // dA = G * B
        auto& ga = *pa.grad;
        const auto& bv2 = *pb.data;
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n) {
            const T gx = gv[std::size_t(m) * N + n];
            for (int k = 0; k < K; ++k) ga[std::size_t(m) * K + k] += gx * bv2[std::size_t(n) * K + k];
          }
      }
      if (pb.grad) {  // dB = G^T * A
        auto& gb = *pb.grad;
        const auto& av2 = *pa.data;
        for (int m = 0; m < M; ++m)
          for (int n = 0; n < N; ++n) {
            const T gx = gv[std::size_t(m) * N + n];
            for (int k = 0; k < K; ++k) gb[std::size_t(n) * K + k] += gx * av2[std::size_t(m) * K + k];
          }
      }
    };
  }
  return out;
}

// x * W + b with b broadcast over rows. x may be [in] or [R x in].
template <class T>
inline Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b) {
  if (W.ndim() != 2 || b.ndim() != 1) throw ShapeError("affine: W must be 2-d, b 1-d");
  if (x.ndim() != 1 && x.ndim() != 2) throw ShapeError("affine: x must be 1-d or 2-d");
  const int in = W.shape[0], outd = W.shape[1];
  if (b.shape[0] != outd) throw ShapeError("affine: bias length differs from W columns");
  const int xin = (x.ndim() == 1) ? x.shape[0] : x.shape[1];
  if (xin != in) throw ShapeError("affine: input width differs from W rows");
  const int R = (x.ndim() == 1) ? 1 : x.shape[0];
  std::vector<int> oshape = (x.ndim() == 1) ? std::vector<int>{outd} : std::vector<int>{R, outd};

  Tensor<T> out = op_result<T>(std::move(oshape), {x, W, b}, "affine");
  const auto& xv = *x.data;
  const auto& wv = *W.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (int r = 0; r < R; ++r) {
    for (int o = 0; o < outd; ++o) ov[std::size_t(r) * outd + o] = bv[o];
    for (int i = 0; i < in; ++i) {
      const T xi = xv[std::size_t(r) * in + i];
      for (int o = 0; o < outd; ++o) ov[std::size_t(r) * outd + o] += xi * wv[std::size_t(i) * outd + o];
    }
  }
  if (out.node) {
    auto g = out.grad;
    Tensor<T> px = x, pw = W, pb = b;
    out.node->run = [g, px, pw, pb, R, in, outd]() {
      const auto& gv = *g;
      if (px.grad) {
        auto& gx = *px.grad;
        const auto& wv2 = *pw.data;
        for (int r = 0; r < R; ++r)
          for (int i = 0; i < in; ++i) {
            T acc = T(0);
            for (int o = 0; o < outd; ++o)
              acc += gv[std::size_t(r) * outd + o] * wv2[std::size_t(i) * outd + o];
            gx[std::size_t(r) * in + i] += acc;
          }
      }
      if (pw.grad) {
        auto& gw = *pw.grad;
        const auto& xv2 = *px.data;
        for (int r = 0; r < R; ++r)
          for (int i = 0; i < in; ++i) {
            const T xi = xv2[std::size_t(r) * in + i];
            for (int o = 0; o < outd; ++o)
              gw[std::size_t(i) * outd + o] += xi * gv[std::size_t(r) * outd + o];
          }
      }
      if (pb.grad) {
        auto& gb = *pb.grad;
        for (int r = 0; r < R; ++r)
          for (int o = 0; o < outd; ++o) gb[o] += gv[std::size_t(r) * outd + o];
      }
    };
  }
  return out;
}

template <class T>
inline Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = op_result<T>(x.shape, {x}, "relu");
  const auto& xv = *x.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
  if (out.node) {
    auto g = out.grad;
    Tensor<T> px = x;
    out.node->run = [g, px]() {
      if (!px.grad) return;
      const auto& xv2 = *px.data;
      for (std::size_t i = 0; i < g->size(); ++i)
        if (xv2[i] > T(0)) (*px.grad)[i] += (*g)[i];
    };
  }
  return out;
}

template <class T>
inline T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
inline Tensor<T> sigmoid_op(const Tensor<T>& x) {
  Tensor<T> out = op_result<T>(x.shape, {x}, "sigmoid");
  const auto& xv = *x.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = stable_sigmoid(xv[i]);
  if (out.node) {
    auto g = out.grad;
    auto od = out.data;
    Tensor<T> px = x;
    out.node->run = [g, od, px]() {
      if (!px.grad) return;
      for (std::size_t i = 0; i < g->size(); ++i) {
        const T s = (*od)[i];
        (*px.grad)[i] += (*g)[i] * s * (T(1) - s);
      }
    };
  }
  return out;
}

// Row-wise softmax with max subtraction for stability.
template <class T>
inline Tensor<T> softmax_rows(const Tensor<T>& x) {
  if (x.ndim() != 2) throw ShapeError("softmax_rows: input must be 2-d");
  if (x.shape[1] < 1) throw ShapeError("softmax_rows: rows must be non-empty");
  const int M = x.shape[0], N = x.shape[1];
  Tensor<T> out = op_result<T>(x.shape, {x}, "softmax_rows");
  const auto& xv = *x.data;
  auto& ov = *out.data;
  for (int m = 0; m < M; ++m) {
    const std::size_t off = std::size_t(m) * N;
    T mx = xv[off];
    for (int n = 1; n < N; ++n) mx = std::max(mx, xv[off + n]);
    T sum = T(0);
    for (int n = 0; n < N; ++n) {
      ov[off + n] = std::exp(xv[off + n] - mx);
      sum += ov[off + n];
    }
    for (int n = 0; n < N; ++n) ov[off + n] /= sum;
  }
  if (out.node) {
    auto g = out.grad;
    auto od = out.data;
    Tensor<T> px = x;
    out.node->run = [g, od, px, M, N]() {
      if (!px.grad) return;
      auto& gx = *px.grad;
      for (int m = 0; m < M; ++m) {
        const std::size_t off = std::size_t(m) * N;
        T dot = T(0);
        for (int n = 0; n < N; ++n) dot += (*g)[off + n] * (*od)[off + n];
        for (int n = 0; n < N; ++n) gx[off + n] += (*od)[off + n] * ((*g)[off + n] - dot);
      }
    };
  }
  return out;
}

template <class T>
inline Tensor<T> abs_op(const Tensor<T>& x) {
  Tensor<T> out = op_result<T>(x.shape, {x}, "abs");
  const auto& xv = *x.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::abs(xv[i]);
  if (out.node) {
    auto g = out.grad;
    Tensor<T> px = x;
    out.node->run = [g, px]() {  // subgradient 0 at x == 0
      if (!px.grad) return;
      const auto& xv2 = *px.data;
      for (std::size_t i = 0; i < g->size(); ++i) {
        if (xv2[i] > T(0)) (*px.grad)[i] += (*g)[i];
        else if (xv2[i] < T(0)) (*px.grad)[i] -= (*g)[i];
      }
    };
  }
  return out;
}

template <class T>
inline Tensor<T> sum_all(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("sum_all: empty tensor");
  Tensor<T> out = op_result<T>({}, {x}, "sum_all");
  T acc = T(0);
  for (T v : *x.data) acc += v;
  (*out.data)[0] = acc;
  if (out.node) {
    auto g = out.grad;
    Tensor<T> px = x;
    out.node->run = [g, px]() {
      if (!px.grad) return;
      const T gs = (*g)[0];
      for (auto& gv : *px.grad) gv += gs;
    };
  }
  return out;
}

template <class T>
inline Tensor<T> mean_all(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("mean_all: empty tensor");
  Tensor<T> out = op_result<T>({}, {x}, "mean_all");
  T acc = T(0);
  for (T v : *x.data) acc += v;
  const T inv = T(1) / T(x.numel());
  (*out.data)[0] = acc * inv;
  if (out.node) {
    auto g = out.grad;
    Tensor<T> px = x;
    out.node->run = [g, px, inv]() {
      if (!px.grad) return;
      const T gs = (*g)[0] * inv;
      for (auto& gv : *px.grad) gv += gs;
    };
  }
  return out;
}

// Stacks 1-d tensors of equal length into a [K x D] matrix.
template <class T>
inline Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const int D = rows[0].numel();
  for (const auto& r : rows)
    if (r.ndim() != 1 || r.shape[0] != D) throw ShapeError("stack_rows: rows must be 1-d, equal length");
  const int K = int(rows.size());
  Tensor<T> out = op_result<T>({K, D}, rows, "stack_rows");
  auto& ov = *out.data;
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < D; ++d) ov[std::size_t(k) * D + d] = (*rows[k].data)[d];
  if (out.node) {
    auto g = out.grad;
    std::vector<Tensor<T>> ps = rows;
    out.node->run = [g, ps, D]() {
      for (std::size_t k = 0; k < ps.size(); ++k) {
        if (!ps[k].grad) continue;
        for (int d = 0; d < D; ++d) (*ps[k].grad)[d] += (*g)[k * std::size_t(D) + d];
      }
    };
  }
  return out;
}

// Gathers rows of a [N x D] matrix; backward scatter-adds.
template <class T>
inline Tensor<T> select_rows(const Tensor<T>& x, const std::vector<int>& idx) {
  if (x.ndim() != 2) throw ShapeError("select_rows: input must be 2-d");
  const int N = x.shape[0], D = x.shape[1];
  for (int i : idx)
    if (i < 0 || i >= N) throw ShapeError("select_rows: index out of range");
  const int K = int(idx.size());
  Tensor<T> out = op_result<T>({K, D}, {x}, "select_rows");
  const auto& xv = *x.data;
  auto& ov = *out.data;
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < D; ++d) ov[std::size_t(k) * D + d] = xv[std::size_t(idx[k]) * D + d];
  if (out.node) {
    auto g = out.grad;
    Tensor<T> px = x;
    std::vector<int> ix = idx;
    out.node->run = [g, px, ix, D]() {
      if (!px.grad) return;
      for (std::size_t k = 0; k < ix.size(); ++k)
        for (int d = 0; d < D; ++d)
          (*px.grad)[std::size_t(ix[k]) * D + d] += (*g)[k * std::size_t(D) + d];
    };
  }
  return out;
}

// Concatenates 1-d tensors into one vector.
template <class T>
inline Tensor<T> concat_vec(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_vec: no parts");
  int total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 1) throw ShapeError("concat_vec: parts must be 1-d");
    total += p.shape[0];
  }
  Tensor<T> out = op_result<T>({total}, parts, "concat_vec");
  auto& ov = *out.data;
  std::size_t off = 0;
  for (const auto& p : parts)
    for (int d = 0; d < p.shape[0]; ++d) ov[off++] = (*p.data)[d];
  if (out.node) {
    auto g = out.grad;
    std::vector<Tensor<T>> ps = parts;
    out.node->run = [g, ps]() {
      std::size_t o = 0;
      for (const auto& p : ps) {
        const std::size_t n = p.data->size();
        if (p.grad)
          for (std::size_t d = 0; d < n; ++d) (*p.grad)[d] += (*g)[o + d];
        o += n;
      }
    };
  }
  return out;
}

template <class T>
inline Tensor<T> reshape(const Tensor<T>& x, std::vector<int> shape) {
  int n = 1;
  for (int d : shape) n *= d;
  if (n != x.numel()) throw ShapeError("reshape: element count differs");
  Tensor<T> out = op_result<T>(std::move(shape), {x}, "reshape");
  *out.data = *x.data;
  if (out.node) {
    auto g = out.grad;
    Tensor<T> px = x;
    out.node->run = [g, px]() {
      if (!px.grad) return;
      for (std::size_t i = 0; i < g->size(); ++i) (*px.grad)[i] += (*g)[i];
    };
  }
  return out;
}

// Per-channel mean over the cells of a [h x w x c] grid selected by a 0/1
// mask of length h*w. The denominator is the count of selected cells, and
// the backward pass touches only selected cells, so unselected cells keep an
// exactly-zero gradient.
template <class T>
inline Tensor<T> masked_mean_cells(const Tensor<T>& x, const std::vector<std::uint8_t>& mask) {
  if (x.ndim() != 3) throw ShapeError("masked_mean_cells: input must be [h, w, c]");
  const int H = x.shape[0], W = x.shape[1], C = x.shape[2];
  if (int(mask.size()) != H * W) throw ShapeError("masked_mean_cells: mask size differs from grid");
  int count = 0;
  for (auto m : mask)
    if (m) ++count;
  if (count == 0) throw DegenerateRegionError("masked mean over zero cells");
  Tensor<T> out = op_result<T>({C}, {x}, "masked_mean_cells");
  const auto& xv = *x.data;
  auto& ov = *out.data;
  for (int cell = 0; cell < H * W; ++cell) {
    if (!mask[std::size_t(cell)]) continue;
    for (int ch = 0; ch < C; ++ch) ov[ch] += xv[std::size_t(cell) * C + ch];
  }
  const T inv = T(1) / T(count);
  for (int ch = 0; ch < C; ++ch) ov[ch] *= inv;
  if (out.node) {
    auto g = out.grad;
    Tensor<T> px = x;
    std::vector<std::uint8_t> mk = mask;
    out.node->run = [g, px, mk, C, inv]() {
      if (!px.grad) return;
      auto& gx = *px.grad;
      for (std::size_t cell = 0; cell < mk.size(); ++cell) {
        if (!mk[cell]) continue;
        for (int ch = 0; ch < C; ++ch) gx[cell * C + ch] += (*g)[ch] * inv;
      }
    };
  }
  return out;
}

// Global average pool: mean over every cell of the grid.
template <class T>
inline Tensor<T> gap(const Tensor<T>& x) {
  if (x.ndim() != 3) throw ShapeError("gap: input must be [h, w, c]");
  return masked_mean_cells(x, std::vector<std::uint8_t>(std::size_t(x.shape[0]) * x.shape[1], 1));
}

// Elementwise -(1 - p)^gamma * log(p); gradient has a finite limit at p = 1.
template <class T>
inline Tensor<T> focal_elem(const Tensor<T>& p, T gamma) {
  if (gamma < T(0)) throw DomainError("focal: gamma must be non-negative");
  for (T v : *p.data)
    if (!(v > T(0)) || v > T(1)) throw DomainError("focal: probabilities must lie in (0, 1]");
  Tensor<T> out = op_result<T>(p.shape, {p}, "focal");
  const auto& pv = *p.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i)
    ov[i] = -std::pow(T(1) - pv[i], gamma) * std::log(pv[i]);
  if (out.node) {
    auto g = out.grad;
    Tensor<T> pp = p;
    out.node->run = [g, pp, gamma]() {
      if (!pp.grad) return;
      const auto& pv2 = *pp.data;
      for (std::size_t i = 0; i < g->size(); ++i) {
        const T q = T(1) - pv2[i];
        T d;
        if (q == T(0)) {
          d = (gamma == T(0)) ? -T(1) / pv2[i] : T(0);
        } else {
          d = gamma * std::pow(q, gamma - T(1)) * std::log(pv2[i]) - std::pow(q, gamma) / pv2[i];
        }
        (*pp.grad)[i] += (*g)[i] * d;
      }
    };
  }
  return out;
}

// Mean absolute difference over all elements.
template <class T>
inline Tensor<T> l1_mean(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "l1_mean");
  return mean_all(abs_op(sub(a, b)));
}

// Scaled dot-product attention weights: softmax(q k^T / sqrt(d)) rows.
template <class T>
inline Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k) {
  if (q.ndim() != 2 || k.ndim() != 2) throw ShapeError("attention: q and k must be 2-d");
  if (q.shape[1] != k.shape[1]) throw ShapeError("attention: q and k widths differ");
  if (q.shape[1] < 1) throw ShapeError("attention: key width must be positive");
  if (k.shape[0] < 1) throw ShapeError("attention: need at least one key");
  const T inv_sqrt = T(1) / std::sqrt(T(q.shape[1]));
  return softmax_rows(scale(matmul_nt(q, k), inv_sqrt));
}

template <class T>
inline Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
  if (v.ndim() != 2) throw ShapeError("attention: v must be 2-d");
  if (k.ndim() != 2 || k.shape[0] != v.shape[0]) throw ShapeError("attention: k and v row counts differ");
  return matmul(attention_weights(q, k), v);
}

}  // namespace hoikit
