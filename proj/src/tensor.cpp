#include "trgtime/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace trgtime {

namespace {

using RowMat =
    Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::int64_t checked_size(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= e;
  }
  return n;
}

void check_permutation(std::span<const int> perm, int rank,
                       const char* what) {
  if (static_cast<int>(perm.size()) != rank)
    throw std::invalid_argument(std::string(what) + ": wrong axis count");
  std::vector<char> seen(rank, 0);
  for (int p : perm) {
    if (p < 0 || p >= rank || seen[p])
      throw std::invalid_argument(std::string(what) +
                                  ": not a permutation of the axes");
    seen[p] = 1;
  }
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)),
      data_(static_cast<std::size_t>(checked_size(shape_)), cdouble(0.0)) {}

DenseTensor::DenseTensor(std::vector<std::int64_t> shape,
                         std::vector<cdouble> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_size(shape_) != static_cast<std::int64_t>(data_.size()))
    throw std::invalid_argument("tensor data does not match shape");
}

std::int64_t DenseTensor::extent(int axis) const {
  if (axis < 0 || axis >= rank())
    throw std::invalid_argument("tensor axis out of range");
  return shape_[static_cast<std::size_t>(axis)];
}

std::vector<std::int64_t> DenseTensor::strides() const {
  std::vector<std::int64_t> s(shape_.size(), 1);
  for (int i = rank() - 2; i >= 0; --i) s[i] = s[i + 1] * shape_[i + 1];
  return s;
}

cdouble& DenseTensor::at(std::span<const std::int64_t> index) {
  return const_cast<cdouble&>(std::as_const(*this).at(index));
}

const cdouble& DenseTensor::at(std::span<const std::int64_t> index) const {
  if (static_cast<int>(index.size()) != rank())
    throw std::invalid_argument("index rank mismatch");
  std::int64_t off = 0;
  for (int i = 0; i < rank(); ++i) {
    if (index[i] < 0 || index[i] >= shape_[i])
      throw std::out_of_range("tensor index out of range");
    off = off * shape_[i] + index[i];
  }
  return data_[static_cast<std::size_t>(off)];
}

DenseTensor transpose(const DenseTensor& t, std::span<const int> perm) {
  check_permutation(perm, t.rank(), "transpose");
  const int r = t.rank();
  if (r == 0) return t;

  std::vector<std::int64_t> out_shape(r);
  const auto in_strides = t.strides();
  std::vector<std::int64_t> gather(r);
  for (int i = 0; i < r; ++i) {
    out_shape[i] = t.shape()[perm[i]];
    gather[i] = in_strides[perm[i]];
  }

  DenseTensor out(out_shape);
  std::vector<std::int64_t> idx(r, 0);
  const cdouble* src = t.raw();
  cdouble* dst = out.raw();
  const std::int64_t n = t.size();
  std::int64_t in_off = 0;
  for (std::int64_t lin = 0; lin < n; ++lin) {
    dst[lin] = src[in_off];
    for (int ax = r - 1; ax >= 0; --ax) {
      if (++idx[ax] < out_shape[ax]) {
        in_off += gather[ax];
        break;
      }
      in_off -= gather[ax] * (out_shape[ax] - 1);
      idx[ax] = 0;
    }
  }
  return out;
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     std::span<const std::pair<int, int>> pairs) {
  std::vector<char> a_used(a.rank(), 0), b_used(b.rank(), 0);
  for (const auto& [pa, pb] : pairs) {
    if (pa < 0 || pa >= a.rank() || pb < 0 || pb >= b.rank())
      throw std::invalid_argument("contract: axis out of range");
    if (a_used[pa] || b_used[pb])
      throw std::invalid_argument("contract: axis contracted twice");
    if (a.shape()[pa] != b.shape()[pb])
      throw std::invalid_argument("contract: paired extents differ");
    a_used[pa] = 1;
    b_used[pb] = 1;
  }

  std::vector<int> perm_a, perm_b;
  std::vector<std::int64_t> out_shape;
  std::int64_t m = 1, k = 1, n = 1;
  for (int i = 0; i < a.rank(); ++i)
    if (!a_used[i]) {
      perm_a.push_back(i);
      out_shape.push_back(a.shape()[i]);
      m *= a.shape()[i];
    }
  for (const auto& [pa, pb] : pairs) {
    perm_a.push_back(pa);
    k *= a.shape()[pa];
  }
  for (const auto& [pa, pb] : pairs) perm_b.push_back(pb);
  for (int i = 0; i < b.rank(); ++i)
    if (!b_used[i]) {
      perm_b.push_back(i);
      out_shape.push_back(b.shape()[i]);
      n *= b.shape()[i];
    }

  const DenseTensor ta = transpose(a, perm_a);
  const DenseTensor tb = transpose(b, perm_b);

  DenseTensor out(out_shape);
  Eigen::Map<const RowMat> ma(ta.raw(), m, k);
  Eigen::Map<const RowMat> mb(tb.raw(), k, n);
  Eigen::Map<RowMat> mc(out.raw(), m, n);
  mc.noalias() = ma * mb;
  return out;
}

DenseTensor group_axes(const DenseTensor& t,
                       const std::vector<std::vector<int>>& groups) {
  std::vector<int> perm;
  for (const auto& g : groups) perm.insert(perm.end(), g.begin(), g.end());
  check_permutation(perm, t.rank(), "group_axes");

  DenseTensor moved = transpose(t, perm);
  std::vector<std::int64_t> merged;
  merged.reserve(groups.size());
  int ax = 0;
  for (const auto& g : groups) {
    std::int64_t e = 1;
    for (std::size_t i = 0; i < g.size(); ++i) e *= moved.shape()[ax++];
    merged.push_back(e);
  }
  return reshape(moved, std::move(merged));
}

DenseTensor reshape(const DenseTensor& t, std::vector<std::int64_t> shape) {
  if (checked_size(shape) != t.size())
    throw std::invalid_argument("reshape: size mismatch");
  return DenseTensor(std::move(shape),
                     std::vector<cdouble>(t.data().begin(), t.data().end()));
}

DenseTensor conjugate(const DenseTensor& t) {
  DenseTensor out = t;
  for (auto& v : out.data()) v = std::conj(v);
  return out;
}

EigenResult eigh_symmetric(const DenseTensor& q) {
  if (q.rank() != 2 || q.shape()[0] != q.shape()[1])
    throw std::invalid_argument("eigh_symmetric: matrix must be square");
  const std::int64_t n = q.shape()[0];

  double amax = 0.0;
  for (const auto& v : q.data()) amax = std::max(amax, std::abs(v));
  const double tol = 1e-10 * std::max(1.0, amax);

  Eigen::MatrixXd s(n, n);
  const cdouble* p = q.raw();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      const cdouble v = p[i * n + j];
      if (std::abs(v.imag()) > tol)
        throw std::invalid_argument("eigh_symmetric: matrix is not real");
      s(i, j) = v.real();
    }
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("eigh_symmetric: matrix is not symmetric");
  s = 0.5 * (s + s.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigh_symmetric: eigensolver failed");

  // Solver returns ascending order; re-rank non-increasing, stable in the
  // solver's output order on ties.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return solver.eigenvalues()(x) > solver.eigenvalues()(y);
  });

  EigenResult res;
  res.values.resize(static_cast<std::size_t>(n));
  res.vectors.resize(n, n);
  for (std::int64_t c = 0; c < n; ++c) {
    res.values[static_cast<std::size_t>(c)] = solver.eigenvalues()(order[c]);
    Eigen::VectorXd col = solver.eigenvectors().col(order[c]);
    std::int64_t imax = 0;
    for (std::int64_t r = 1; r < n; ++r)
      if (std::abs(col(r)) > std::abs(col(imax))) imax = r;
    if (col(imax) < 0.0) col = -col;
    res.vectors.col(c) = col;
  }
  res.rank_kept = n;
  return res;
}

MatrixXcd herm_expm(const MatrixXcd& h, cdouble scale) {
  if (h.rows() != h.cols())
    throw std::invalid_argument("herm_expm: matrix must be square");
  const double amax = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * amax)
    throw std::invalid_argument("herm_expm: matrix is not Hermitian");
  const MatrixXcd hh = 0.5 * (h + h.adjoint());

  Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(hh);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("herm_expm: eigensolver failed");

  VectorXcd phases(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    phases(i) = std::exp(scale * solver.eigenvalues()(i));
  return solver.eigenvectors() * phases.asDiagonal() *
         solver.eigenvectors().adjoint();
}

DenseTensor herm_expm(const DenseTensor& h, cdouble scale) {
  return from_matrix(herm_expm(to_matrix(h), scale));
}

MatrixXcd to_matrix(const DenseTensor& t) {
  if (t.rank() != 2) throw std::invalid_argument("to_matrix: rank must be 2");
  return Eigen::Map<const RowMat>(t.raw(), t.shape()[0], t.shape()[1]);
}

DenseTensor from_matrix(const MatrixXcd& m) {
  DenseTensor out({m.rows(), m.cols()});
  Eigen::Map<RowMat>(out.raw(), m.rows(), m.cols()) = m;
  return out;
}

}  // namespace trgtime
