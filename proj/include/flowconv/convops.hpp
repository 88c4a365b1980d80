#pragma once

#include <string>

#include <Eigen/Core>

#include "flowconv/errors.hpp"
#include "flowconv/flowgraph.hpp"
#include "flowconv/tensor.hpp"

namespace flowconv {

/// Theta of shape P x Q x K x 2 (input channel, output channel, diffusion
/// step, direction), stored row-major. Direction 0 walks out_transition,
/// direction 1 walks in_transition.
template <typename Scalar>
struct DiffusionFilterT {
  int P = 0;
  int Q = 0;
  int K = 0;
  VectorT<Scalar> theta;

  DiffusionFilterT() = default;
  DiffusionFilterT(int p, int q, int k) : P(p), Q(q), K(k), theta(VectorT<Scalar>::Zero(p * q * k * 2)) {}

  static int offset(int p, int q, int k, int dir, int Q, int K) { return ((p * Q + q) * K + k) * 2 + dir; }
  Scalar& operator()(int p, int q, int k, int dir) { return theta[offset(p, q, k, dir, Q, K)]; }
  Scalar operator()(int p, int q, int k, int dir) const { return theta[offset(p, q, k, dir, Q, K)]; }
};
using DiffusionFilter = DiffusionFilterT<double>;

/// Same-padding 2D filter: kernel kh x kw x c_in x c_out row-major, plus bias.
template <typename Scalar>
struct ConvFilterT {
  int kh = 3;
  int kw = 3;
  int c_in = 0;
  int c_out = 0;
  VectorT<Scalar> kernel;
  VectorT<Scalar> bias;

  ConvFilterT() = default;
  ConvFilterT(int h, int w, int ci, int co)
      : kh(h), kw(w), c_in(ci), c_out(co),
        kernel(VectorT<Scalar>::Zero(h * w * ci * co)), bias(VectorT<Scalar>::Zero(co)) {}

  Scalar& operator()(int dy, int dx, int ci, int co) { return kernel[((dy * kw + dx) * c_in + ci) * c_out + co]; }
  Scalar operator()(int dy, int dx, int ci, int co) const { return kernel[((dy * kw + dx) * c_in + ci) * c_out + co]; }
};
using ConvFilter = ConvFilterT<double>;

// ---- Diffusion convolution -------------------------------------------------

/// sum_{k<K} (theta(k,0) * Out^k + theta(k,1) * In^k) s, by repeated spmv.
template <typename Scalar, typename SDerived, typename TDerived>
VectorT<Scalar> diffusion_conv(const Eigen::MatrixBase<SDerived>& s, const TransitionPair<Scalar>& trans,
                               const Eigen::MatrixBase<TDerived>& theta_slice) {
  const int K = static_cast<int>(theta_slice.rows());
  if (K < 1 || theta_slice.cols() != 2) throw ShapeError("diffusion_conv: theta slice must be K x 2 with K >= 1");
  if (s.cols() != 1 || s.rows() != trans.regions()) throw ShapeError("diffusion_conv: signal/graph size mismatch");

  VectorT<Scalar> out_walk = s;
  VectorT<Scalar> in_walk = s;
  VectorT<Scalar> result = (theta_slice(0, 0) + theta_slice(0, 1)) * out_walk;
  for (int k = 1; k < K; ++k) {
    out_walk = trans.out_transition * out_walk;
    in_walk = trans.in_transition * in_walk;
    result += theta_slice(k, 0) * out_walk + theta_slice(k, 1) * in_walk;
  }
  return result;
}

/// Diffusion basis of a multi-channel signal: column (p*K + k)*2 + dir holds
/// Out^k x_p (dir 0) or In^k x_p (dir 1).
template <typename Scalar, typename Derived>
SignalT<Scalar> diffusion_basis(const Eigen::MatrixBase<Derived>& x, const TransitionPair<Scalar>& trans, int K) {
  if (x.rows() != trans.regions()) throw ShapeError("diffusion_basis: signal/graph size mismatch");
  const int P = static_cast<int>(x.cols());
  SignalT<Scalar> basis(x.rows(), P * K * 2);
  VectorT<Scalar> out_walk, in_walk;
  for (int p = 0; p < P; ++p) {
    out_walk = x.col(p);
    in_walk = out_walk;
    basis.col((p * K) * 2) = out_walk;
    basis.col((p * K) * 2 + 1) = in_walk;
    for (int k = 1; k < K; ++k) {
      out_walk = trans.out_transition * out_walk;
      in_walk = trans.in_transition * in_walk;
      basis.col((p * K + k) * 2) = out_walk;
      basis.col((p * K + k) * 2 + 1) = in_walk;
    }
  }
  return basis;
}

/// Adjoint of diffusion_basis: maps dL/dbasis to dL/dx. Horner over the
/// transposed walks.
template <typename Scalar, typename Derived>
SignalT<Scalar> diffusion_basis_adjoint(const Eigen::MatrixBase<Derived>& grad_basis,
                                        const TransitionPair<Scalar>& trans, int K) {
  const int P = static_cast<int>(grad_basis.cols()) / (K * 2);
  SignalT<Scalar> grad_x(grad_basis.rows(), P);
  VectorT<Scalar> out_acc, in_acc;
  for (int p = 0; p < P; ++p) {
    out_acc = grad_basis.col((p * K + K - 1) * 2);
    in_acc = grad_basis.col((p * K + K - 1) * 2 + 1);
    for (int k = K - 2; k >= 0; --k) {
      out_acc = trans.out_transition.transpose() * out_acc;
      in_acc = trans.in_transition.transpose() * in_acc;
      out_acc += grad_basis.col((p * K + k) * 2);
      in_acc += grad_basis.col((p * K + k) * 2 + 1);
    }
    grad_x.col(p) = out_acc + in_acc;
  }
  return grad_x;
}

/// Theta rearranged as a (P*K*2) x Q matrix in diffusion_basis column order,
/// so that flow_aware_gconv(x) = diffusion_basis(x) * theta_matrix.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> theta_matrix(const VectorT<Scalar>& theta, int P, int Q, int K) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mat(P * K * 2, Q);
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < Q; ++q)
      for (int k = 0; k < K; ++k)
        for (int dir = 0; dir < 2; ++dir)
          mat((p * K + k) * 2 + dir, q) = theta[DiffusionFilterT<Scalar>::offset(p, q, k, dir, Q, K)];
  return mat;
}

/// Inverse rearrangement of theta_matrix, accumulating into `theta`.
template <typename Scalar, typename Derived>
void accumulate_theta(VectorT<Scalar>& theta, const Eigen::MatrixBase<Derived>& expr, int P, int Q, int K) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mat = expr;  // evaluate products once
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < Q; ++q)
      for (int k = 0; k < K; ++k)
        for (int dir = 0; dir < 2; ++dir)
          theta[DiffusionFilterT<Scalar>::offset(p, q, k, dir, Q, K)] += mat((p * K + k) * 2 + dir, q);
}

/// Flow-aware graph convolution: output column q sums the diffusion
/// convolutions of every input column p with theta[p, q, :, :].
template <typename Scalar, typename Derived>
SignalT<Scalar> flow_aware_gconv(const Eigen::MatrixBase<Derived>& x, const TransitionPair<Scalar>& trans,
                                 const DiffusionFilterT<Scalar>& filt) {
  if (x.cols() != filt.P)
    throw ShapeError("flow_aware_gconv: signal has " + std::to_string(x.cols()) + " channels, filter expects " +
                     std::to_string(filt.P));
  if (filt.K < 1) throw ShapeError("flow_aware_gconv: K must be >= 1");
  return diffusion_basis(x, trans, filt.K) * theta_matrix(filt.theta, filt.P, filt.Q, filt.K);
}

template <typename Scalar, typename Derived>
SignalT<Scalar> flow_aware_gconv(const Eigen::MatrixBase<Derived>& x, const SparseFlowMatrix& f,
                                 const DiffusionFilterT<Scalar>& filt) {
  if (x.rows() != f.n) throw ShapeError("flow_aware_gconv: signal/graph size mismatch");
  return flow_aware_gconv(x, make_transitions<Scalar>(f), filt);
}

// ---- 2D convolution ----------------------------------------------------------

/// Patch matrix for a same-padded kh x kw window: row r holds the zero-padded
/// neighbourhood of region r, column (dy*kw + dx)*c + ch.
template <typename Scalar, typename Derived>
SignalT<Scalar> im2col(const Eigen::MatrixBase<Derived>& x, int m, int k, int kh, int kw) {
  if (x.rows() != static_cast<Eigen::Index>(m) * k) throw ShapeError("im2col: signal does not match grid");
  if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("im2col: kernel sides must be odd");
  const int c = static_cast<int>(x.cols());
  const int ph = (kh - 1) / 2;
  const int pw = (kw - 1) / 2;
  SignalT<Scalar> cols = SignalT<Scalar>::Zero(x.rows(), kh * kw * c);
  for (int row = 0; row < m; ++row)
    for (int col = 0; col < k; ++col)
      for (int dy = 0; dy < kh; ++dy) {
        const int sr = row + dy - ph;
        if (sr < 0 || sr >= m) continue;
        for (int dx = 0; dx < kw; ++dx) {
          const int sc = col + dx - pw;
          if (sc < 0 || sc >= k) continue;
          cols.row(row * k + col).segment((dy * kw + dx) * c, c) = x.row(sr * k + sc);
        }
      }
  return cols;
}

/// Adjoint of im2col.
template <typename Scalar, typename Derived>
SignalT<Scalar> im2col_adjoint(const Eigen::MatrixBase<Derived>& grad_cols, int m, int k, int kh, int kw) {
  const int c = static_cast<int>(grad_cols.cols()) / (kh * kw);
  const int ph = (kh - 1) / 2;
  const int pw = (kw - 1) / 2;
  SignalT<Scalar> grad_x = SignalT<Scalar>::Zero(static_cast<Eigen::Index>(m) * k, c);
  for (int row = 0; row < m; ++row)
    for (int col = 0; col < k; ++col)
      for (int dy = 0; dy < kh; ++dy) {
        const int sr = row + dy - ph;
        if (sr < 0 || sr >= m) continue;
        for (int dx = 0; dx < kw; ++dx) {
          const int sc = col + dx - pw;
          if (sc < 0 || sc >= k) continue;
          grad_x.row(sr * k + sc) += grad_cols.row(row * k + col).segment((dy * kw + dx) * c, c);
        }
      }
  return grad_x;
}

/// Same-shape cross-correlation with zero padding and stride 1.
template <typename Scalar, typename Derived>
SignalT<Scalar> conv2d_same(const Eigen::MatrixBase<Derived>& x, int m, int k, const ConvFilterT<Scalar>& filt) {
  if (x.cols() != filt.c_in)
    throw ShapeError("conv2d_same: input has " + std::to_string(x.cols()) + " channels, filter expects " +
                     std::to_string(filt.c_in));
  if (filt.kernel.size() != filt.kh * filt.kw * filt.c_in * filt.c_out || filt.bias.size() != filt.c_out)
    throw ShapeError("conv2d_same: filter arrays do not match declared shape");
  const auto weights = Eigen::Map<const SignalT<Scalar>>(filt.kernel.data(), filt.kh * filt.kw * filt.c_in, filt.c_out);
  SignalT<Scalar> out = im2col<Scalar>(x, m, k, filt.kh, filt.kw) * weights;
  out.rowwise() += filt.bias.transpose();
  return out;
}

template <typename Scalar>
GridTensorT<Scalar> conv2d_same(const GridTensorT<Scalar>& x, const ConvFilterT<Scalar>& filt) {
  return GridTensorT<Scalar>{x.m, x.k, conv2d_same(x.values, x.m, x.k, filt)};
}

}  // namespace flowconv
