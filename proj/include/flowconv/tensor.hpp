#pragma once

#include <string>
#include <utility>

#include <Eigen/Core>

#include "flowconv/errors.hpp"

namespace flowconv {

/// Graph signal: one row per region, one column per channel. Row-major, so the
/// storage order is exactly that of an m x k x c grid tensor with region index
/// row * k + col.
template <typename Scalar>
using SignalT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Signal = SignalT<double>;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// An m x k x c tensor laid out row-major.
template <typename Scalar>
struct GridTensorT {
  int m = 0;
  int k = 0;
  SignalT<Scalar> values;  // (m*k) x c

  int channels() const { return static_cast<int>(values.cols()); }
  Scalar& operator()(int row, int col, int ch) { return values(row * k + col, ch); }
  Scalar operator()(int row, int col, int ch) const { return values(row * k + col, ch); }
};
using GridTensor = GridTensorT<double>;

/// phi: graph signal -> grid tensor.
template <typename Scalar>
GridTensorT<Scalar> reshape_to_grid(SignalT<Scalar> x, int m, int k) {
  if (m < 1 || k < 1 || x.rows() != static_cast<Eigen::Index>(m) * k)
    throw ShapeError("reshape_to_grid: signal has " + std::to_string(x.rows()) +
                     " rows, grid needs " + std::to_string(m * k));
  return GridTensorT<Scalar>{m, k, std::move(x)};
}

/// varphi: grid tensor -> graph signal.
template <typename Scalar>
SignalT<Scalar> reshape_to_graph(GridTensorT<Scalar> g) {
  if (g.values.rows() != static_cast<Eigen::Index>(g.m) * g.k)
    throw ShapeError("reshape_to_graph: inconsistent grid tensor");
  return std::move(g.values);
}

inline int region_index(int row, int col, int k) { return row * k + col; }
inline int region_row(int region, int k) { return region / k; }
inline int region_col(int region, int k) { return region % k; }

}  // namespace flowconv
