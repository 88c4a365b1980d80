#pragma once

#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "flowconv/errors.hpp"
#include "flowconv/ingest.hpp"
#include "flowconv/tensor.hpp"

namespace flowconv {

template <typename Scalar>
using SparseRowMajor = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

/// Random-walk transition matrices of one flow graph.
///   out_transition = D_O^{-1} f     (row i: out-flows of i over its out-degree)
///   in_transition  = D_I^{-1} f^T   (row i: in-flows of i over its in-degree)
/// Rows of zero degree stay all-zero.
template <typename Scalar>
struct TransitionPair {
  SparseRowMajor<Scalar> out_transition;
  SparseRowMajor<Scalar> in_transition;

  int regions() const { return static_cast<int>(out_transition.rows()); }
};

/// Linear in N + |E|: one pass for degrees, one pass to emit entries.
template <typename Scalar = double>
TransitionPair<Scalar> make_transitions(const SparseFlowMatrix& f) {
  const int n = f.n;
  std::vector<Scalar> out_degree(n, Scalar(0));
  std::vector<Scalar> in_degree(n, Scalar(0));
  for (const auto& e : f.entries) {
    out_degree[e.src] += Scalar(e.weight);
    in_degree[e.dst] += Scalar(e.weight);
  }

  using Triplet = Eigen::Triplet<Scalar, int>;
  std::vector<Triplet> out_entries;
  std::vector<Triplet> in_entries;
  out_entries.reserve(f.entries.size());
  in_entries.reserve(f.entries.size());
  for (const auto& e : f.entries) {
    out_entries.emplace_back(e.src, e.dst, Scalar(e.weight) / out_degree[e.src]);
    in_entries.emplace_back(e.dst, e.src, Scalar(e.weight) / in_degree[e.dst]);
  }

  TransitionPair<Scalar> pair;
  pair.out_transition.resize(n, n);
  pair.in_transition.resize(n, n);
  pair.out_transition.setFromTriplets(out_entries.begin(), out_entries.end());
  pair.in_transition.setFromTriplets(in_entries.begin(), in_entries.end());
  return pair;
}

/// Sparse matrix times graph-signal column.
template <typename Scalar, typename Derived>
VectorT<Scalar> spmv(const SparseRowMajor<Scalar>& mat, const Eigen::MatrixBase<Derived>& s) {
  if (s.cols() != 1 || s.rows() != mat.cols())
    throw ShapeError("spmv: matrix is " + std::to_string(mat.rows()) + "x" +
                     std::to_string(mat.cols()) + ", signal has " + std::to_string(s.rows()) +
                     " rows");
  return mat * s;
}

/// Regions j != i joined to i by a flow in either direction, ascending.
std::vector<int> receptive_field(const SparseFlowMatrix& f, int region);

}  // namespace flowconv
