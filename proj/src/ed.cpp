#include "trgtime/ed.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace trgtime::ed {

namespace {

void check_size(int n_sites) {
  if (n_sites < 2) throw std::invalid_argument("need at least 2 sites");
  if (n_sites > kMaxDenseSites)
    throw std::invalid_argument("dense reference capped at 12 sites");
}

std::int64_t dim_of(int n_sites) { return std::int64_t{1} << n_sites; }

// Site j lives in bit (n-1-j): site 0 is the major index.
std::int64_t site_mask(int j, int n_sites) {
  return std::int64_t{1} << (n_sites - 1 - j);
}

// sum_j sz_j on a basis state: +1 per clear bit, -1 per set bit.
double sz_total(std::int64_t basis, int n_sites) {
  return n_sites - 2.0 * __builtin_popcountll(
                             static_cast<unsigned long long>(basis));
}

int bond_count(const ModelParams& p) {
  return p.boundary == Boundary::periodic ? p.n_sites : p.n_sites - 1;
}

}  // namespace

MatrixXcd build_hamiltonian(const ModelParams& p) {
  p.validate();
  check_size(p.n_sites);
  const std::int64_t dim = dim_of(p.n_sites);
  MatrixXcd h = MatrixXcd::Zero(dim, dim);
  for (std::int64_t b = 0; b < dim; ++b) h(b, b) = -sz_total(b, p.n_sites);
  for (int j = 0; j < bond_count(p); ++j) {
    const std::int64_t mask = site_mask(j, p.n_sites) |
                              site_mask((j + 1) % p.n_sites, p.n_sites);
    for (std::int64_t b = 0; b < dim; ++b) h(b ^ mask, b) -= p.lambda;
  }
  // +epsilon so that exp(-i dt H_pert) is the same phase convention as the
  // post-step factor exp(-i dt epsilon sum_j sx_j) used on the coarse side.
  if (p.epsilon > 0.0) {
    for (int j = 0; j < p.n_sites; ++j) {
      const std::int64_t mask = site_mask(j, p.n_sites);
      for (std::int64_t b = 0; b < dim; ++b) h(b ^ mask, b) += p.epsilon;
    }
  }
  return h;
}

MatrixXcd exact_teo(const MatrixXcd& h, double dt) {
  return herm_expm(h, cdouble(0.0, -dt));
}

MatrixXcd trotter_teo(const ModelParams& p) {
  p.validate();
  check_size(p.n_sites);
  const std::int64_t dim = dim_of(p.n_sites);

  VectorXcd half(dim);  // exp(-i dt H_T / 2), diagonal
  for (std::int64_t b = 0; b < dim; ++b)
    half(b) = std::exp(cdouble(0.0, 0.5 * p.dt * sz_total(b, p.n_sites)));

  // exp(+i dt lambda sx sx) per bond: cos * I + i sin * (bit-pair flip).
  MatrixXcd u = half.asDiagonal();
  const cdouble c = std::cos(p.dt * p.lambda);
  const cdouble is = cdouble(0.0, std::sin(p.dt * p.lambda));
  for (int j = 0; j < bond_count(p); ++j) {
    const std::int64_t mask = site_mask(j, p.n_sites) |
                              site_mask((j + 1) % p.n_sites, p.n_sites);
    MatrixXcd next(dim, dim);
    for (std::int64_t b = 0; b < dim; ++b)
      next.row(b) = c * u.row(b) + is * u.row(b ^ mask);
    u = std::move(next);
  }
  for (std::int64_t b = 0; b < dim; ++b) u.row(b) *= half(b);
  return u;
}

std::vector<double> dense_spectrum(const MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("dense eigensolver failed");
  return {es.eigenvalues().data(),
          es.eigenvalues().data() + es.eigenvalues().size()};
}

VectorXcd dense_ground_state(const MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("dense eigensolver failed");
  VectorXcd gs = es.eigenvectors().col(0);
  int imax = 0;
  for (int i = 1; i < gs.size(); ++i)
    if (std::abs(gs(i)) > std::abs(gs(imax))) imax = i;
  gs *= std::conj(gs(imax)) / std::abs(gs(imax));
  return gs;
}

VectorXcd apply_jw_creation(int j, int n_sites, const VectorXcd& psi) {
  check_size(n_sites);
  if (j < 0 || j >= n_sites) throw std::invalid_argument("site out of range");
  const std::int64_t dim = dim_of(n_sites);
  if (psi.size() != dim)
    throw std::invalid_argument("state dimension mismatch");
  const std::int64_t mask = site_mask(j, n_sites);
  // Bits above `mask` hold the sites left of j; the -sz string gives -1 per
  // empty (clear) site there.
  VectorXcd out = VectorXcd::Zero(dim);
  for (std::int64_t b = 0; b < dim; ++b) {
    if (b & mask) continue;  // already occupied
    const auto left = static_cast<unsigned long long>(b >> (n_sites - j));
    const int occupied_left = __builtin_popcountll(left);
    const double sign = ((j - occupied_left) % 2 == 0) ? 1.0 : -1.0;
    out(b | mask) += sign * psi(b);
  }
  return out;
}

VectorXcd dense_packet(const WavePacketSpec& spec, int n_sites,
                       const VectorXcd& base) {
  const std::vector<cdouble> coeff = packet_coefficients(spec, n_sites);
  VectorXcd out = VectorXcd::Zero(base.size());
  for (int j = 0; j < n_sites; ++j)
    out += coeff[static_cast<std::size_t>(j)] *
           apply_jw_creation(j, n_sites, base);
  const double nrm = out.norm();
  if (nrm < 1e-12)
    throw std::runtime_error("wave packet annihilated the base state");
  return out / nrm;
}

std::vector<double> measure_n(int n_sites, const VectorXcd& psi) {
  check_size(n_sites);
  const double nrm2 = psi.squaredNorm();
  if (!(nrm2 > 0.0)) throw std::runtime_error("state norm vanished");
  std::vector<double> out(static_cast<std::size_t>(n_sites), 0.0);
  for (std::int64_t b = 0; b < psi.size(); ++b) {
    const double w = std::norm(psi(b));
    if (w == 0.0) continue;
    for (int j = 0; j < n_sites; ++j)
      if (b & site_mask(j, n_sites)) out[static_cast<std::size_t>(j)] += w;
  }
  for (double& v : out) v /= nrm2;
  return out;
}

EvolutionRun dense_evolve(const VectorXcd& state, const MatrixXcd& teo,
                          int n_sites, int steps, double dt,
                          const MatrixXcd* perturbation, bool renormalize) {
  check_size(n_sites);
  if (teo.rows() != state.size() || teo.cols() != state.size())
    throw std::invalid_argument("TEO and state dimensions differ");
  VectorXcd psi = state;
  auto step = [&] {
    if (renormalize) {
      const double nrm = psi.norm();
      if (!(nrm > 0.0)) throw std::runtime_error("state norm vanished");
      psi /= nrm;
    }
    psi = teo * psi;
    if (perturbation) psi = *perturbation * psi;
  };
  auto measure = [&] { return measure_n(n_sites, psi); };
  auto norm = [&] { return psi.norm(); };
  return run_time_series(steps, dt, step, measure, norm);
}

}  // namespace trgtime::ed
