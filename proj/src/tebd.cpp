#include "trgtime/tebd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace trgtime {

namespace {

using i64 = std::int64_t;

double square(double x) { return x * x; }

void check_site(const MPS& psi, int j) {
  if (j < 0 || j >= psi.n_sites())
    throw std::invalid_argument("site index out of range");
}

// Left-canonicalize site j by thin QR, pushing the factor into site j+1.
void push_right(MPS& psi, int j) {
  MpsSite& s = psi.sites[static_cast<std::size_t>(j)];
  const i64 l = s.left(), r = s.right();
  MatrixXcd stacked(2 * l, r);
  stacked.topRows(l) = s.phys[0];
  stacked.bottomRows(l) = s.phys[1];
  const i64 k = std::min(2 * l, r);
  Eigen::HouseholderQR<MatrixXcd> qr(stacked);
  const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(2 * l, k);
  const MatrixXcd rr =
      qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  s.phys[0] = q.topRows(l);
  s.phys[1] = q.bottomRows(l);
  MpsSite& nx = psi.sites[static_cast<std::size_t>(j + 1)];
  nx.phys[0] = rr * nx.phys[0];
  nx.phys[1] = rr * nx.phys[1];
}

// Right-canonicalize site j, pushing the factor into site j-1.
void push_left(MPS& psi, int j) {
  MpsSite& s = psi.sites[static_cast<std::size_t>(j)];
  const i64 l = s.left(), r = s.right();
  MatrixXcd wide(l, 2 * r);
  wide.leftCols(r) = s.phys[0];
  wide.rightCols(r) = s.phys[1];
  const i64 k = std::min(l, 2 * r);
  Eigen::HouseholderQR<MatrixXcd> qr(wide.adjoint());
  const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(2 * r, k);
  const MatrixXcd rr =
      qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const MatrixXcd qd = q.adjoint();  // k x 2r, orthonormal rows
  s.phys[0] = qd.leftCols(r);
  s.phys[1] = qd.rightCols(r);
  MpsSite& pv = psi.sites[static_cast<std::size_t>(j - 1)];
  pv.phys[0] = pv.phys[0] * rr.adjoint();
  pv.phys[1] = pv.phys[1] * rr.adjoint();
}

// Number of singular values to keep under the relative squared-weight
// budget and the bond cap; at least one. *rel gets the discarded fraction.
i64 choose_keep(const Eigen::VectorXd& s, int max_bond, double cutoff,
                double* rel) {
  const double total = s.squaredNorm();
  if (!(total > 0.0)) throw std::runtime_error("two-site block vanished");
  i64 keep = s.size();
  double disc = 0.0;
  const double budget = cutoff * total;
  while (keep > 1 && disc + square(s(keep - 1)) <= budget) {
    disc += square(s(keep - 1));
    --keep;
  }
  while (max_bond > 0 && keep > max_bond) {
    disc += square(s(keep - 1));
    --keep;
  }
  *rel = disc / total;
  return keep;
}

Eigen::Matrix4cd swap_gate() {
  Eigen::Matrix4cd s = Eigen::Matrix4cd::Zero();
  s(0, 0) = 1.0;
  s(1, 2) = 1.0;
  s(2, 1) = 1.0;
  s(3, 3) = 1.0;
  return s;
}

}  // namespace

std::int64_t MPS::largest_bond() const {
  i64 best = 1;
  for (const MpsSite& s : sites) best = std::max(best, s.right());
  return best;
}

MPS product_mps(const std::vector<Eigen::Vector2cd>& locals) {
  if (locals.size() < 2)
    throw std::invalid_argument("need at least 2 sites");
  MPS out;
  out.sites.resize(locals.size());
  for (std::size_t j = 0; j < locals.size(); ++j)
    for (int p = 0; p < 2; ++p)
      out.sites[j].phys[static_cast<std::size_t>(p)] =
          MatrixXcd::Constant(1, 1, locals[j](p));
  out.center = 0;
  return out;
}

MPS all_up_mps(int n_sites) {
  return product_mps(std::vector<Eigen::Vector2cd>(
      static_cast<std::size_t>(n_sites), Eigen::Vector2cd(1.0, 0.0)));
}

MPS mps_from_vector(const VectorXcd& psi, int n_sites) {
  if (n_sites < 2 || n_sites > ed::kMaxDenseSites)
    throw std::invalid_argument("dense conversion capped at 12 sites");
  const i64 dim = i64{1} << n_sites;
  if (psi.size() != dim)
    throw std::invalid_argument("state dimension mismatch");
  MPS out;
  out.sites.resize(static_cast<std::size_t>(n_sites));
  MatrixXcd cur(1, dim);
  cur.row(0) = psi.transpose();
  for (int j = 0; j + 1 < n_sites; ++j) {
    const i64 chi = cur.rows(), rest = cur.cols() / 2;
    MatrixXcd mat(2 * chi, rest);
    mat.topRows(chi) = cur.leftCols(rest);
    mat.bottomRows(chi) = cur.rightCols(rest);
    Eigen::JacobiSVD<MatrixXcd> svd(mat,
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    MpsSite& s = out.sites[static_cast<std::size_t>(j)];
    s.phys[0] = svd.matrixU().topRows(chi);
    s.phys[1] = svd.matrixU().bottomRows(chi);
    cur = svd.singularValues().cast<cdouble>().asDiagonal() *
          svd.matrixV().adjoint();
  }
  out.sites[static_cast<std::size_t>(n_sites - 1)].phys[0] = cur.col(0);
  out.sites[static_cast<std::size_t>(n_sites - 1)].phys[1] = cur.col(1);
  out.center = n_sites - 1;
  return out;
}

VectorXcd mps_to_vector(const MPS& psi) {
  const int n = psi.n_sites();
  if (n < 2 || n > ed::kMaxDenseSites)
    throw std::invalid_argument("dense conversion capped at 12 sites");
  MatrixXcd t = MatrixXcd::Ones(1, 1);
  for (int j = 0; j < n; ++j) {
    const MpsSite& s = psi.sites[static_cast<std::size_t>(j)];
    const i64 d = t.rows();
    const MatrixXcd t0 = t * s.phys[0];
    const MatrixXcd t1 = t * s.phys[1];
    MatrixXcd nx(2 * d, s.right());
    for (i64 b = 0; b < d; ++b) {
      nx.row(2 * b) = t0.row(b);
      nx.row(2 * b + 1) = t1.row(b);
    }
    t = std::move(nx);
  }
  return t.col(0);
}

void canonicalize(MPS& psi, int center) {
  check_site(psi, center);
  for (int j = 0; j < center; ++j) push_right(psi, j);
  for (int j = psi.n_sites() - 1; j > center; --j) push_left(psi, j);
  psi.center = center;
}

void move_center(MPS& psi, int target) {
  check_site(psi, target);
  while (psi.center < target) push_right(psi, psi.center++);
  while (psi.center > target) push_left(psi, psi.center--);
}

cdouble mps_overlap(const MPS& a, const MPS& b) {
  if (a.n_sites() != b.n_sites())
    throw std::invalid_argument("overlapping chains of different length");
  MatrixXcd e = MatrixXcd::Ones(1, 1);
  for (int j = 0; j < a.n_sites(); ++j) {
    const MpsSite& sa = a.sites[static_cast<std::size_t>(j)];
    const MpsSite& sb = b.sites[static_cast<std::size_t>(j)];
    e = sa.phys[0].adjoint() * e * sb.phys[0] +
        sa.phys[1].adjoint() * e * sb.phys[1];
  }
  return e(0, 0);
}

double mps_norm(const MPS& psi) {
  return std::sqrt(std::abs(mps_overlap(psi, psi)));
}

double normalize(MPS& psi) {
  const double nrm = mps_norm(psi);
  if (!(nrm > 1e-300)) throw std::runtime_error("state norm vanished");
  MpsSite& c = psi.sites[static_cast<std::size_t>(psi.center)];
  c.phys[0] /= nrm;
  c.phys[1] /= nrm;
  return nrm;
}

MPS mps_add(const MPS& a, const MPS& b) {
  const int n = a.n_sites();
  if (n != b.n_sites())
    throw std::invalid_argument("adding chains of different length");
  MPS out;
  out.max_bond = a.max_bond;
  out.num_cutoff = a.num_cutoff;
  out.total_discarded = a.total_discarded + b.total_discarded;
  out.sites.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const MpsSite& sa = a.sites[static_cast<std::size_t>(j)];
    const MpsSite& sb = b.sites[static_cast<std::size_t>(j)];
    MpsSite& so = out.sites[static_cast<std::size_t>(j)];
    for (int p = 0; p < 2; ++p) {
      const MatrixXcd& ma = sa.phys[static_cast<std::size_t>(p)];
      const MatrixXcd& mb = sb.phys[static_cast<std::size_t>(p)];
      MatrixXcd& mo = so.phys[static_cast<std::size_t>(p)];
      if (j == 0) {
        mo.resize(1, ma.cols() + mb.cols());
        mo.leftCols(ma.cols()) = ma;
        mo.rightCols(mb.cols()) = mb;
      } else if (j == n - 1) {
        mo.resize(ma.rows() + mb.rows(), 1);
        mo.topRows(ma.rows()) = ma;
        mo.bottomRows(mb.rows()) = mb;
      } else {
        mo = MatrixXcd::Zero(ma.rows() + mb.rows(), ma.cols() + mb.cols());
        mo.topLeftCorner(ma.rows(), ma.cols()) = ma;
        mo.bottomRightCorner(mb.rows(), mb.cols()) = mb;
      }
    }
  }
  out.center = 0;
  compress(out);
  return out;
}

void compress(MPS& psi) {
  const int n = psi.n_sites();
  canonicalize(psi, n - 1);
  for (int j = n - 1; j > 0; --j) {
    MpsSite& s = psi.sites[static_cast<std::size_t>(j)];
    const i64 l = s.left(), r = s.right();
    MatrixXcd wide(l, 2 * r);
    wide.leftCols(r) = s.phys[0];
    wide.rightCols(r) = s.phys[1];
    Eigen::JacobiSVD<MatrixXcd> svd(wide,
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    double rel = 0.0;
    const i64 keep =
        choose_keep(svd.singularValues(), psi.max_bond, psi.num_cutoff, &rel);
    psi.total_discarded += rel;
    const MatrixXcd vd = svd.matrixV().leftCols(keep).adjoint();  // keep x 2r
    s.phys[0] = vd.leftCols(r);
    s.phys[1] = vd.rightCols(r);
    const MatrixXcd carry =
        svd.matrixU().leftCols(keep) *
        svd.singularValues().head(keep).cast<cdouble>().asDiagonal();
    MpsSite& pv = psi.sites[static_cast<std::size_t>(j - 1)];
    pv.phys[0] = pv.phys[0] * carry;
    pv.phys[1] = pv.phys[1] * carry;
  }
  psi.center = 0;
}

double canonical_error(const MPS& psi) {
  double worst = 0.0;
  for (int j = 0; j < psi.n_sites(); ++j) {
    const MpsSite& s = psi.sites[static_cast<std::size_t>(j)];
    if (j < psi.center) {
      const MatrixXcd g = s.phys[0].adjoint() * s.phys[0] +
                          s.phys[1].adjoint() * s.phys[1];
      worst = std::max(
          worst, (g - MatrixXcd::Identity(g.rows(), g.cols()))
                     .cwiseAbs()
                     .maxCoeff());
    } else if (j > psi.center) {
      const MatrixXcd g = s.phys[0] * s.phys[0].adjoint() +
                          s.phys[1] * s.phys[1].adjoint();
      worst = std::max(
          worst, (g - MatrixXcd::Identity(g.rows(), g.cols()))
                     .cwiseAbs()
                     .maxCoeff());
    }
  }
  return worst;
}

void apply_single(MPS& psi, int j, const Eigen::Matrix2cd& g) {
  check_site(psi, j);
  MpsSite& s = psi.sites[static_cast<std::size_t>(j)];
  MatrixXcd n0 = g(0, 0) * s.phys[0] + g(0, 1) * s.phys[1];
  MatrixXcd n1 = g(1, 0) * s.phys[0] + g(1, 1) * s.phys[1];
  s.phys[0] = std::move(n0);
  s.phys[1] = std::move(n1);
}

double apply_two_site(MPS& psi, int j, const Eigen::Matrix4cd& g,
                      bool center_right) {
  if (j < 0 || j + 1 >= psi.n_sites())
    throw std::invalid_argument("bond index out of range");
  if (psi.center < j)
    move_center(psi, j);
  else if (psi.center > j + 1)
    move_center(psi, j + 1);
  MpsSite& a = psi.sites[static_cast<std::size_t>(j)];
  MpsSite& b = psi.sites[static_cast<std::size_t>(j + 1)];
  const i64 l = a.left(), r = b.right();
  MatrixXcd th[2][2];
  for (int q0 = 0; q0 < 2; ++q0)
    for (int q1 = 0; q1 < 2; ++q1)
      th[q0][q1] = a.phys[static_cast<std::size_t>(q0)] *
                   b.phys[static_cast<std::size_t>(q1)];
  MatrixXcd big(2 * l, 2 * r);
  for (int p0 = 0; p0 < 2; ++p0)
    for (int p1 = 0; p1 < 2; ++p1) {
      MatrixXcd blk = MatrixXcd::Zero(l, r);
      for (int q0 = 0; q0 < 2; ++q0)
        for (int q1 = 0; q1 < 2; ++q1) {
          const cdouble w = g((p0 << 1) | p1, (q0 << 1) | q1);
          if (w != cdouble(0.0, 0.0)) blk += w * th[q0][q1];
        }
      big.block(p0 * l, p1 * r, l, r) = blk;
    }
  Eigen::JacobiSVD<MatrixXcd> svd(big,
                               Eigen::ComputeThinU | Eigen::ComputeThinV);
  double rel = 0.0;
  const i64 keep =
      choose_keep(svd.singularValues(), psi.max_bond, psi.num_cutoff, &rel);
  psi.total_discarded += rel;
  const MatrixXcd u = svd.matrixU().leftCols(keep);
  const VectorXcd sv = svd.singularValues().head(keep).cast<cdouble>();
  const MatrixXcd vd = svd.matrixV().leftCols(keep).adjoint();  // keep x 2r
  if (center_right) {
    a.phys[0] = u.topRows(l);
    a.phys[1] = u.bottomRows(l);
    const MatrixXcd svd_rows = sv.asDiagonal() * vd;
    b.phys[0] = svd_rows.leftCols(r);
    b.phys[1] = svd_rows.rightCols(r);
    psi.center = j + 1;
  } else {
    const MatrixXcd u_sv = u * sv.asDiagonal();
    a.phys[0] = u_sv.topRows(l);
    a.phys[1] = u_sv.bottomRows(l);
    b.phys[0] = vd.leftCols(r);
    b.phys[1] = vd.rightCols(r);
    psi.center = j;
  }
  return rel;
}

GateSet real_time_gates(const ModelParams& p) {
  p.validate();
  GateSet g;
  g.n_sites = p.n_sites;
  g.boundary = p.boundary;
  g.unitary = true;
  const double a = 0.5 * p.dt;  // half step per application
  g.single.setZero();
  g.single(0, 0) = std::exp(cdouble(0.0, a));
  g.single(1, 1) = std::exp(cdouble(0.0, -a));
  const double th = 0.5 * p.dt * p.lambda;
  g.bond = std::cos(th) * Eigen::Matrix4cd::Identity();
  const cdouble is(0.0, std::sin(th));
  g.bond(0, 3) += is;
  g.bond(1, 2) += is;
  g.bond(2, 1) += is;
  g.bond(3, 0) += is;
  if (p.epsilon > 0.0) {
    g.has_drive = true;
    const double b = p.dt * p.epsilon;
    g.drive << std::cos(b), cdouble(0.0, -std::sin(b)),
        cdouble(0.0, -std::sin(b)), std::cos(b);
  }
  return g;
}

GateSet imaginary_time_gates(const ModelParams& p, double tau) {
  p.validate();
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("tau must be positive");
  GateSet g;
  g.n_sites = p.n_sites;
  g.boundary = p.boundary;
  g.unitary = false;
  const double a = 0.5 * tau;
  g.single.setZero();
  g.single(0, 0) = std::exp(a);
  g.single(1, 1) = std::exp(-a);
  const double th = 0.5 * tau * p.lambda;
  g.bond = std::cosh(th) * Eigen::Matrix4cd::Identity();
  const double sh = std::sinh(th);
  g.bond(0, 3) += sh;
  g.bond(1, 2) += sh;
  g.bond(2, 1) += sh;
  g.bond(3, 0) += sh;
  return g;
}

double trotter_step(MPS& psi, const GateSet& g) {
  const int n = psi.n_sites();
  if (g.n_sites != n)
    throw std::invalid_argument("gate set built for a different chain");
  if (n < 2) throw std::invalid_argument("need at least 2 sites");
  const double before = psi.total_discarded;
  for (int j = 0; j < n; ++j) apply_single(psi, j, g.single);
  // Non-unitary singles break the isometry conditions the truncated splits
  // rely on; restore them before any SVD.
  if (!g.unitary) canonicalize(psi, psi.center);
  for (int b = 0; b + 1 < n; ++b) apply_two_site(psi, b, g.bond, true);
  if (g.boundary == Boundary::periodic) {
    if (n == 2) {
      apply_two_site(psi, 0, g.bond, true);
      apply_two_site(psi, 0, g.bond, false);
    } else {
      // Walk the last site down next to the first, couple them twice (the
      // two half-step applications of the wrap bond), walk it back.  A swap
      // is a relabeling, not physics, so the transport splits prune only
      // machine-zero weight; the run cutoff applies at the wrap bond itself
      // and max_bond still caps the transported index.
      constexpr double kSwapFloor = 1e-30;
      const Eigen::Matrix4cd sw = swap_gate();
      const double run_cutoff = psi.num_cutoff;
      psi.num_cutoff = std::min(run_cutoff, kSwapFloor);
      for (int b = n - 2; b >= 1; --b) apply_two_site(psi, b, sw, false);
      psi.num_cutoff = run_cutoff;
      apply_two_site(psi, 0, g.bond, true);
      apply_two_site(psi, 0, g.bond, false);
      psi.num_cutoff = std::min(run_cutoff, kSwapFloor);
      for (int b = 1; b + 1 < n; ++b) apply_two_site(psi, b, sw, true);
      psi.num_cutoff = run_cutoff;
    }
  }
  for (int b = n - 2; b >= 0; --b) apply_two_site(psi, b, g.bond, false);
  for (int j = 0; j < n; ++j) apply_single(psi, j, g.single);
  if (g.has_drive)
    for (int j = 0; j < n; ++j) apply_single(psi, j, g.drive);
  if (!g.unitary) canonicalize(psi, 0);
  return psi.total_discarded - before;
}

std::vector<double> measure_n(const MPS& psi) {
  MPS c = psi;
  canonicalize(c, 0);
  const int n = c.n_sites();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const MpsSite& s = c.sites[static_cast<std::size_t>(j)];
    const double w0 = s.phys[0].squaredNorm();
    const double w1 = s.phys[1].squaredNorm();
    if (!(w0 + w1 > 0.0)) throw std::runtime_error("state norm vanished");
    out[static_cast<std::size_t>(j)] = w1 / (w0 + w1);
    if (j + 1 < n) {
      push_right(c, j);
      c.center = j + 1;
    }
  }
  return out;
}

MPS vacuum_mps(const ModelParams& p) {
  p.validate();
  if (p.lambda == 0.0) return all_up_mps(p.n_sites);
  if (p.n_sites <= ed::kMaxDenseSites) {
    ModelParams q = p;
    q.epsilon = 0.0;  // the drive perturbs evolution, not the vacuum
    return mps_from_vector(ed::dense_ground_state(ed::build_hamiltonian(q)),
                           p.n_sites);
  }
  return cooled_vacuum_mps(p);
}

MPS cooled_vacuum_mps(const ModelParams& p) {
  p.validate();
  ModelParams q = p;
  q.epsilon = 0.0;
  MPS psi = all_up_mps(q.n_sites);
  psi.num_cutoff = 1e-12;
  psi.max_bond = 64;
  // Cool from the polarized state, tightening the step so the splitting
  // bias (O(tau^2)) ends well below the packet comparison scale.
  for (double tau : {0.2, 0.1, 0.05, 0.02, 0.01, 0.005}) {
    const GateSet g = imaginary_time_gates(q, tau);
    std::vector<double> prev = measure_n(psi);
    for (int it = 0; it < 3000; ++it) {
      trotter_step(psi, g);
      normalize(psi);
      const std::vector<double> cur = measure_n(psi);
      double delta = 0.0;
      for (std::size_t j = 0; j < cur.size(); ++j)
        delta = std::max(delta, std::abs(cur[j] - prev[j]));
      prev = cur;
      if (delta < 1e-12) break;
    }
  }
  // Cooling byproducts should not pollute the evolution bookkeeping.
  psi.total_discarded = 0.0;
  psi.num_cutoff = 1e-8;
  psi.max_bond = 0;
  return psi;
}

MPS apply_packet(const WavePacketSpec& spec, const MPS& base) {
  const int n = base.n_sites();
  spec.validate(n);
  const std::vector<cdouble> coeff = packet_coefficients(spec, n);
  Eigen::Matrix2cd minus_z;
  minus_z << -1.0, 0.0, 0.0, 1.0;
  MPS acc;
  bool first = true;
  for (int j = 0; j < n; ++j) {
    MPS term = base;
    for (int m = 0; m < j; ++m) apply_single(term, m, minus_z);
    Eigen::Matrix2cd lower;
    lower << 0.0, 0.0, coeff[static_cast<std::size_t>(j)], 0.0;
    apply_single(term, j, lower);
    if (first) {
      acc = std::move(term);
      first = false;
    } else {
      acc = mps_add(acc, term);
    }
  }
  if (mps_norm(acc) < 1e-12)
    throw std::runtime_error("wave packet annihilated the base state");
  return acc;
}

MPS packet_mps(const WavePacketSpec& spec, const ModelParams& p) {
  MPS pkt = apply_packet(spec, vacuum_mps(p));
  normalize(pkt);
  return pkt;
}

EvolutionRun tebd_evolve(MPS psi, const ModelParams& p, int steps,
                         bool renormalize) {
  p.validate();
  if (psi.n_sites() != p.n_sites)
    throw std::invalid_argument("state and parameters disagree on length");
  const GateSet g = real_time_gates(p);
  const double start_discarded = psi.total_discarded;
  auto step = [&] {
    if (renormalize) normalize(psi);
    trotter_step(psi, g);
  };
  auto measure = [&] { return measure_n(psi); };
  auto nrm = [&] { return mps_norm(psi); };
  EvolutionRun run = run_time_series(steps, p.dt, step, measure, nrm);
  run.total_discarded = psi.total_discarded - start_discarded;
  return run;
}

}  // namespace trgtime
