#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace trgtime {

using cdouble = std::complex<double>;

using MatrixXcd = Eigen::MatrixXcd;
using VectorXcd = Eigen::VectorXcd;

// Row-major dense complex tensor. Shape is fixed at construction, extents are
// strictly positive, rank 0 holds a single scalar. All free functions below
// return fresh tensors; nothing aliases.
class DenseTensor {
 public:
  DenseTensor() : shape_{}, data_(1, cdouble(0.0, 0.0)) {}

  explicit DenseTensor(std::vector<std::int64_t> shape);
  DenseTensor(std::vector<std::int64_t> shape, std::vector<cdouble> data);

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t extent(int axis) const;
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  // Row-major strides, last axis fastest.
  std::vector<std::int64_t> strides() const;

  std::span<const cdouble> data() const { return data_; }
  std::span<cdouble> data() { return data_; }
  const cdouble* raw() const { return data_.data(); }
  cdouble* raw() { return data_.data(); }

  cdouble& at(std::span<const std::int64_t> index);
  const cdouble& at(std::span<const std::int64_t> index) const;

  template <typename... Ix>
  cdouble& operator()(Ix... ix) {
    const std::int64_t idx[] = {static_cast<std::int64_t>(ix)...};
    return at(std::span<const std::int64_t>(idx, sizeof...(ix)));
  }
  template <typename... Ix>
  const cdouble& operator()(Ix... ix) const {
    const std::int64_t idx[] = {static_cast<std::int64_t>(ix)...};
    return at(std::span<const std::int64_t>(idx, sizeof...(ix)));
  }

 private:
  std::vector<std::int64_t> shape_;
  std::vector<cdouble> data_;
};

// out[i0,...] = in[i_perm[0],...]; perm must be a permutation of the axes.
DenseTensor transpose(const DenseTensor& t, std::span<const int> perm);

// Pairwise contraction over (axis of a, axis of b). Result carries the free
// axes of a (ascending) followed by the free axes of b (ascending). Paired
// extents must match; contracting every axis yields a rank-0 scalar.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     std::span<const std::pair<int, int>> pairs);

// Permute-and-merge: each group of axes becomes one merged axis (row-major
// within the group). groups must partition the axes.
DenseTensor group_axes(const DenseTensor& t,
                       const std::vector<std::vector<int>>& groups);

// Same data, new shape; total size must be unchanged.
DenseTensor reshape(const DenseTensor& t, std::vector<std::int64_t> shape);

DenseTensor conjugate(const DenseTensor& t);

// Eigendecomposition of a real symmetric matrix. values are sorted
// non-increasing (signed); within exact ties the solver's original column
// order is kept. Each eigenvector is gauge-fixed so its largest-magnitude
// component (first such, on ties) is real positive. rank_kept == n here;
// truncation happens downstream.
struct EigenResult {
  std::vector<double> values;
  Eigen::MatrixXd vectors;  // orthonormal columns aligned with values
  std::int64_t rank_kept = 0;
};

// q must be rank-2 square and symmetric within 1e-10 (relative, with floor);
// it is symmetrized before decomposing. Imaginary parts above the same
// tolerance are rejected.
EigenResult eigh_symmetric(const DenseTensor& q);

// exp(scale * h) for Hermitian h via spectral decomposition.
MatrixXcd herm_expm(const MatrixXcd& h, cdouble scale);
DenseTensor herm_expm(const DenseTensor& h, cdouble scale);

// Rank-2 interop with Eigen.
MatrixXcd to_matrix(const DenseTensor& t);
DenseTensor from_matrix(const MatrixXcd& m);

}  // namespace trgtime
