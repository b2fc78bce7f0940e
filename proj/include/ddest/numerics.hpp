// numerics.hpp - dense least-squares kernels
//
// Ridge proxy, support-restricted least squares and deterministic top-k.
// Everything here is generic over the Eigen scalar (real or complex, float or
// double) and accepts arbitrary dense Eigen expressions.

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <type_traits>

#include <Eigen/Dense>

#include "ddest/common.hpp"

namespace ddest {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Grouping of columns such that columns in different groups never share a
/// nonzero row. Least-squares problems over any column subset then split into
/// independent problems, one per group.
struct ColumnPartition {
  std::vector<Index> group_of_column;
  std::vector<IndexSet> group_rows;  ///< rows touched by each group, ascending

  Index num_groups() const { return static_cast<Index>(group_rows.size()); }
  Index num_columns() const { return static_cast<Index>(group_of_column.size()); }
};

namespace detail {

struct DisjointSets {
  std::vector<Index> parent;
  explicit DisjointSets(Index n) : parent(static_cast<size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

inline void check_columns(const IndexSet& cols, Index num_cols) {
  IndexSet sorted(cols);
  std::sort(sorted.begin(), sorted.end());
  if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= num_cols))
    throw RangeError("restricted_ls: column index out of range");
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw RangeError("restricted_ls: duplicate column index");
}

}  // namespace detail

/// Connected components of the column/row incidence graph of A's nonzeros.
/// Groups are numbered in order of their smallest column.
template <typename Derived>
ColumnPartition partition_columns(const Eigen::MatrixBase<Derived>& A) {
  const Index rows = A.rows();
  const Index cols = A.cols();
  detail::DisjointSets sets(cols);
  for (Index i = 0; i < rows; ++i) {
    Index first = -1;
    for (Index j = 0; j < cols; ++j) {
      if (A(i, j) == typename Derived::Scalar(0)) continue;
      if (first < 0)
        first = j;
      else
        sets.unite(first, j);
    }
  }

  ColumnPartition part;
  part.group_of_column.assign(static_cast<size_t>(cols), -1);
  std::vector<Index> group_of_root(static_cast<size_t>(cols), -1);
  for (Index j = 0; j < cols; ++j) {
    const Index root = sets.find(j);
    if (group_of_root[root] < 0) {
      group_of_root[root] = part.num_groups();
      part.group_rows.emplace_back();
    }
    part.group_of_column[j] = group_of_root[root];
  }
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (A(i, j) != typename Derived::Scalar(0)) {
        part.group_rows[part.group_of_column[j]].push_back(i);
        break;
      }
    }
  }
  return part;
}

/// Indices of the k largest scores; ties go to the smaller index. The result
/// is sorted ascending by index.
template <typename Derived>
IndexSet top_k(const Eigen::DenseBase<Derived>& scores, Index k) {
  const Index n = scores.size();
  if (k < 0 || k > n) throw RangeError("top_k: k out of range");
  IndexSet order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
    const auto sa = scores(a);
    const auto sb = scores(b);
    return sa > sb || (sa == sb && a < b);
  });
  order.resize(static_cast<size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

/// Ridge (Tikhonov) solver with the Gram factorization cached, so repeated
/// right-hand sides against the same dictionary cost two triangular solves.
template <typename Scalar>
class RidgeSolver {
 public:
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using Matrix = DenseMatrix<Scalar>;
  using Vector = DenseVector<Scalar>;

  RidgeSolver() = default;

  template <typename Derived>
  RidgeSolver(const Eigen::MatrixBase<Derived>& A, Real lambda_reg) : lambda_(lambda_reg) {
    if (!(lambda_reg > Real(0))) throw RangeError("ridge_solve: lambda_reg must be positive");
    adjoint_ = A.adjoint();
    Matrix gram = adjoint_ * A;
    gram.diagonal().array() += lambda_reg;
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success || !llt_.matrixLLT().allFinite()) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
      const auto& ev = eig.eigenvalues();
      std::ostringstream msg;
      msg << "ridge_solve: Gram matrix not positive definite (lambda=" << lambda_reg
          << ", eigenvalue range [" << ev.minCoeff() << ", " << ev.maxCoeff() << "])";
      throw NumericError(msg.str());
    }
  }

  Real lambda() const { return lambda_; }
  Index cols() const { return adjoint_.rows(); }
  Index rows() const { return adjoint_.cols(); }

  template <typename DerivedY>
  Vector solve(const Eigen::MatrixBase<DerivedY>& y) const {
    if (y.size() != rows()) throw DimensionError("ridge_solve: observation length mismatch");
    return llt_.solve(adjoint_ * y);
  }

 private:
  Real lambda_ = 0;
  Matrix adjoint_;
  Eigen::LLT<Matrix> llt_;
};

/// argmin_u ||y - A u||^2 + lambda ||u||^2 via the Hermitian PD Gram system.
template <typename DerivedA, typename DerivedY>
auto ridge_solve(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedY>& y,
                 typename Eigen::NumTraits<typename DerivedA::Scalar>::Real lambda_reg) {
  return RidgeSolver<typename DerivedA::Scalar>(A, lambda_reg).solve(y);
}

template <typename Scalar>
struct RestrictedLsResult {
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  DenseVector<Scalar> coeffs;  ///< one entry per requested column, same order
  Real rss = 0;
  bool rank_deficient = false;
  Index rank = 0;
};

/// Least squares restricted to the given columns of A.
///
/// Solved with a complete orthogonal decomposition, so rank deficient column
/// sets return the minimum-norm solution with rank_deficient set. Numerical
/// rank uses max(rows, |cols|) * eps * (largest selected column norm). When a
/// partition is supplied, each row-disjoint group is solved on its own rows;
/// this is exact, not an approximation.
template <typename DerivedA, typename DerivedY>
RestrictedLsResult<typename DerivedA::Scalar> restricted_ls(
    const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedY>& y,
    const IndexSet& cols, const ColumnPartition* partition = nullptr) {
  using Scalar = typename DerivedA::Scalar;
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using Matrix = DenseMatrix<Scalar>;
  using Vector = DenseVector<Scalar>;

  const Index m = A.rows();
  const Index n = static_cast<Index>(cols.size());
  if (y.size() != m) throw DimensionError("restricted_ls: observation length mismatch");
  if (n > m) throw DimensionError("restricted_ls: more columns than observations");
  detail::check_columns(cols, A.cols());
  if (partition && partition->num_columns() != A.cols())
    throw DimensionError("restricted_ls: partition does not match matrix");

  RestrictedLsResult<Scalar> out;
  if (n == 0) {
    out.coeffs.resize(0);
    out.rss = y.squaredNorm();
    return out;
  }

  Real max_norm = 0;
  for (Index c : cols) max_norm = std::max(max_norm, A.col(c).norm());
  const Real tol = static_cast<Real>(std::max(m, n)) * Eigen::NumTraits<Real>::epsilon() * max_norm;

  // Bucket the requested positions by group; without a partition, one group
  // spanning every row.
  std::vector<std::vector<Index>> buckets;
  std::vector<Index> bucket_group;
  if (partition) {
    std::vector<Index> bucket_of_group(static_cast<size_t>(partition->num_groups()), -1);
    for (Index p = 0; p < n; ++p) {
      const Index g = partition->group_of_column[cols[p]];
      if (bucket_of_group[g] < 0) {
        bucket_of_group[g] = static_cast<Index>(buckets.size());
        buckets.emplace_back();
        bucket_group.push_back(g);
      }
      buckets[bucket_of_group[g]].push_back(p);
    }
  } else {
    buckets.emplace_back(static_cast<size_t>(n));
    std::iota(buckets.back().begin(), buckets.back().end(), Index{0});
    bucket_group.push_back(-1);
  }

  IndexSet all_rows;
  if (!partition) {
    all_rows.resize(static_cast<size_t>(m));
    std::iota(all_rows.begin(), all_rows.end(), Index{0});
  }

  out.coeffs = Vector::Zero(n);
  std::vector<char> touched(static_cast<size_t>(m), 0);
  Real rss = 0;
  for (size_t b = 0; b < buckets.size(); ++b) {
    const auto& pos = buckets[b];
    const IndexSet& rows = partition ? partition->group_rows[bucket_group[b]] : all_rows;
    IndexSet sub_cols(pos.size());
    for (size_t t = 0; t < pos.size(); ++t) sub_cols[t] = cols[pos[t]];

    const Matrix sub = A(rows, sub_cols);
    const Vector rhs = y(rows);
    Vector x = Vector::Zero(static_cast<Index>(pos.size()));
    Index rank = 0;
    const Real group_norm = sub.colwise().norm().maxCoeff();
    if (group_norm > tol) {
      Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
      cod.setThreshold(tol / group_norm);
      cod.compute(sub);
      rank = cod.rank();
      x = cod.solve(rhs);
    }
    out.rank += rank;
    for (size_t t = 0; t < pos.size(); ++t) out.coeffs(pos[t]) = x(static_cast<Index>(t));
    rss += (rhs - sub * x).squaredNorm();
    for (Index r : rows) touched[r] = 1;
  }
  for (Index i = 0; i < m; ++i)
    if (!touched[i]) rss += Eigen::numext::abs2(y(i));

  out.rss = rss;
  out.rank_deficient = out.rank < n;
  return out;
}

}  // namespace ddest
