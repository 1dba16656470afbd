#include "trgtime/states.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "trgtime/linalg.hpp"

namespace trgtime {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Matrix2cd sigma_z_block() {
  Eigen::Matrix2cd m;
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

Eigen::Matrix2cd lowering_block() {
  Eigen::Matrix2cd m;
  m << 0.0, 0.0, 1.0, 0.0;
  return m;
}

void check_site(int j, int n_sites) {
  if (n_sites < 1) throw std::invalid_argument("n_sites must be positive");
  if (j < 0 || j >= n_sites) throw std::invalid_argument("site out of range");
}

ProductOperator jw_string(int j, int n_sites,
                          const Eigen::Matrix2cd& ladder) {
  check_site(j, n_sites);
  ProductOperator op = identity_product(n_sites);
  for (int m = 0; m < j; ++m) op.locals[m] = -sigma_z_block();
  op.locals[j] = ladder;
  return op;
}

void check_fingerprints(const std::string& a, const std::string& b) {
  if (a != b)
    throw std::invalid_argument(
        "projected objects come from different blocking trees");
}

// gamma^T (a kron b) gamma without forming the kron: column c of the flat
// (child^2, kept) gamma reshapes to a child x child block g_c, and the
// corresponding column of (a kron b) gamma is vec(a g_c b^T).
MatrixXcd sandwich_pair(const MatrixXcd& a, const MatrixXcd& b,
                        const DenseTensor& gamma) {
  const std::int64_t child = gamma.shape()[0];
  const std::int64_t kept = gamma.shape()[2];
  using RowMat =
      Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> flat(gamma.raw(), child * child, kept);

  MatrixXcd lifted(child * child, kept);
  RowMat tmp(child, child);
  for (std::int64_t c = 0; c < kept; ++c) {
    Eigen::Map<const RowMat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>
        g_c(gamma.raw() + c, child, child,
            Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(child * kept, kept));
    tmp.noalias() = a * g_c * b.transpose();
    lifted.col(c) = Eigen::Map<const VectorXcd>(tmp.data(), child * child);
  }
  MatrixXcd out(kept, kept);
  out.noalias() = flat.transpose() * lifted;
  return out;
}

}  // namespace

std::string to_string(Sector s) {
  switch (s) {
    case Sector::odd:
      return "odd";
    case Sector::even:
      return "even";
  }
  throw std::invalid_argument("unknown sector");
}

std::vector<double> allowed_momenta(Sector sector, int n_sites) {
  if (n_sites < 2 || n_sites % 2 != 0)
    throw std::invalid_argument("n_sites must be even and at least 2");
  std::vector<double> ks;
  ks.reserve(n_sites);
  if (sector == Sector::odd) {
    for (int m = -n_sites / 2 + 1; m <= n_sites / 2; ++m)
      ks.push_back(2.0 * kPi * m / n_sites);
  } else {
    for (int m = -n_sites / 2; m <= n_sites / 2 - 1; ++m)
      ks.push_back((2.0 * m + 1.0) * kPi / n_sites);
  }
  return ks;
}

ProductOperator identity_product(int n_sites) {
  if (n_sites < 1) throw std::invalid_argument("n_sites must be positive");
  ProductOperator op;
  op.locals.assign(static_cast<std::size_t>(n_sites),
                   Eigen::Matrix2cd::Identity());
  return op;
}

ProductOperator jw_creation(int j, int n_sites) {
  return jw_string(j, n_sites, lowering_block());
}

ProductOperator jw_annihilation(int j, int n_sites) {
  return jw_string(j, n_sites, lowering_block().adjoint());
}

ProductOperator number_operator(int j, int n_sites) {
  check_site(j, n_sites);
  ProductOperator op = identity_product(n_sites);
  op.locals[j] = 0.5 * (Eigen::Matrix2cd::Identity() - sigma_z_block());
  return op;
}

std::vector<ProductOperator> sigma_x_total(int n_sites) {
  Eigen::Matrix2cd sx;
  sx << 0.0, 1.0, 1.0, 0.0;
  std::vector<ProductOperator> ops;
  ops.reserve(static_cast<std::size_t>(n_sites));
  for (int j = 0; j < n_sites; ++j) {
    ProductOperator op = identity_product(n_sites);
    op.locals[static_cast<std::size_t>(j)] = sx;
    ops.push_back(std::move(op));
  }
  return ops;
}

MatrixXcd product_to_dense(const ProductOperator& op) {
  if (op.n_sites() < 1)
    throw std::invalid_argument("empty product operator");
  if (op.n_sites() > 12)
    throw std::invalid_argument("dense product operators capped at 12 sites");
  MatrixXcd out = op.locals[0];
  for (int m = 1; m < op.n_sites(); ++m)
    out = kron(out, MatrixXcd(op.locals[static_cast<std::size_t>(m)]));
  return out;
}

ProjectedOperator project_product(const ProductOperator& op,
                                  const IsometryTree& tree) {
  if (op.n_sites() != tree.n_sites())
    throw std::invalid_argument("operator length does not match the tree");
  std::vector<MatrixXcd> blocks;
  blocks.reserve(op.locals.size());
  for (const auto& l : op.locals) blocks.emplace_back(l);

  for (const HotrgLevel& level : tree.levels) {
    std::vector<MatrixXcd> merged;
    merged.reserve(blocks.size() / 2);
    for (std::size_t i = 0; i + 1 < blocks.size(); i += 2) {
      if (blocks[i].rows() != level.child_dim())
        throw std::invalid_argument("tree level dims do not chain");
      merged.push_back(sandwich_pair(blocks[i], blocks[i + 1], level.gamma));
    }
    blocks = std::move(merged);
  }
  if (blocks.size() != 1)
    throw std::logic_error("blocking tree did not reduce to one block");
  return ProjectedOperator{std::move(blocks[0]), tree.fingerprint};
}

std::vector<ProjectedOperator> projected_number_operators(
    const IsometryTree& tree) {
  std::vector<ProjectedOperator> ops;
  ops.reserve(static_cast<std::size_t>(tree.n_sites()));
  for (int j = 0; j < tree.n_sites(); ++j)
    ops.push_back(project_product(number_operator(j, tree.n_sites()), tree));
  return ops;
}

ProjectedState apply(const ProjectedOperator& op, const ProjectedState& psi) {
  check_fingerprints(op.tree_fingerprint, psi.tree_fingerprint);
  if (op.matrix.cols() != psi.vector.size())
    throw std::invalid_argument("operator and state dimensions differ");
  ProjectedState out;
  out.vector.noalias() = op.matrix * psi.vector;
  out.tree_fingerprint = psi.tree_fingerprint;
  out.normalized = false;
  return out;
}

cdouble expectation(const ProjectedOperator& op, const ProjectedState& psi) {
  check_fingerprints(op.tree_fingerprint, psi.tree_fingerprint);
  if (op.matrix.cols() != psi.vector.size())
    throw std::invalid_argument("operator and state dimensions differ");
  const double nrm2 = psi.vector.squaredNorm();
  if (!(nrm2 > 0.0)) throw std::runtime_error("expectation on a null state");
  return psi.vector.dot(op.matrix * psi.vector) / nrm2;
}

double normalize(ProjectedState& psi) {
  const double nrm = psi.vector.norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm))
    throw std::runtime_error("cannot normalize a null state");
  psi.vector /= nrm;
  psi.normalized = true;
  return nrm;
}

void WavePacketSpec::validate(int n_sites) const {
  if (x_center < 0 || x_center >= n_sites)
    throw std::invalid_argument("packet center site out of range");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("packet width must be positive");
  if (!std::isfinite(k_center))
    throw std::invalid_argument("packet momentum must be finite");
  for (double k : allowed_momenta(sector, n_sites))
    if (std::abs(k - k_center) < 1e-9) return;
  throw std::invalid_argument("packet momentum is not on the sector's grid");
}

int min_image_distance(int a, int b, int n_sites) {
  const int d = std::abs(a - b) % n_sites;
  return std::min(d, n_sites - d);
}

std::vector<cdouble> packet_coefficients(const WavePacketSpec& spec,
                                         int n_sites) {
  spec.validate(n_sites);
  std::vector<cdouble> coeff(static_cast<std::size_t>(n_sites));
  for (int j = 0; j < n_sites; ++j) {
    const double r = min_image_distance(j, spec.x_center, n_sites);
    coeff[static_cast<std::size_t>(j)] =
        std::exp(cdouble(0.0, -spec.k_center * j)) *
        std::exp(-r * r / (spec.sigma * spec.sigma));
  }
  return coeff;
}

ProjectedOperator packet_operator(const WavePacketSpec& spec,
                                  const IsometryTree& tree) {
  const int n = tree.n_sites();
  const std::vector<cdouble> coeff = packet_coefficients(spec, n);
  MatrixXcd acc =
      MatrixXcd::Zero(tree.final_dim(), tree.final_dim());
  for (int j = 0; j < n; ++j)
    acc += coeff[static_cast<std::size_t>(j)] *
           project_product(jw_creation(j, n), tree).matrix;
  return ProjectedOperator{std::move(acc), tree.fingerprint};
}

ProjectedState gaussian_packet(const WavePacketSpec& spec,
                               const IsometryTree& tree,
                               const ProjectedState& base) {
  check_fingerprints(tree.fingerprint, base.tree_fingerprint);
  ProjectedState out = apply(packet_operator(spec, tree), base);
  if (out.vector.norm() < 1e-12)
    throw std::runtime_error("wave packet has no support in the kept basis");
  normalize(out);
  return out;
}

ProjectedState vacuum_state(const CoarseTEO& teo) {
  Eigen::ComplexEigenSolver<MatrixXcd> es(teo.matrix);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigensolver failed on the step operator");

  const auto& mu = es.eigenvalues();
  const double floor = 1e-14 * mu.cwiseAbs().maxCoeff();
  // Energy per eigenvalue mu: E = i Ln(mu)/dt, so real time ranks states by
  // -arg(mu) and imaginary time by -ln|mu| (both up to 1/dt > 0).
  const bool real_time = teo.params.mode == TimeMode::real_time;
  int best = -1;
  double best_score = 0.0;
  for (int i = 0; i < mu.size(); ++i) {
    if (std::abs(mu(i)) <= floor) continue;
    const double score =
        real_time ? -std::arg(mu(i)) : -std::log(std::abs(mu(i)));
    if (best < 0 || score < best_score) {
      best = i;
      best_score = score;
    }
  }
  if (best < 0) throw std::runtime_error("step operator has no usable modes");

  ProjectedState out;
  out.vector = es.eigenvectors().col(best);
  out.tree_fingerprint = teo.tree.fingerprint;

  int imax = 0;
  for (int i = 1; i < out.vector.size(); ++i)
    if (std::abs(out.vector(i)) > std::abs(out.vector(imax))) imax = i;
  const cdouble pin = out.vector(imax);
  out.vector *= std::conj(pin) / std::abs(pin);
  normalize(out);
  return out;
}

std::vector<cdouble> momentum_profile(const std::vector<cdouble>& amplitudes,
                                      Sector sector) {
  const int n = static_cast<int>(amplitudes.size());
  const std::vector<double> ks = allowed_momenta(sector, n);
  std::vector<cdouble> out(ks.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t a = 0; a < ks.size(); ++a) {
    cdouble acc = 0.0;
    for (int j = 0; j < n; ++j)
      acc += std::exp(cdouble(0.0, ks[a] * j)) *
             amplitudes[static_cast<std::size_t>(j)];
    out[a] = scale * acc;
  }
  return out;
}

}  // namespace trgtime
