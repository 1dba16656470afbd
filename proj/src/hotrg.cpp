#include "trgtime/hotrg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "trgtime/linalg.hpp"

namespace trgtime {

namespace {

using RowMat =
    Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap =
    Eigen::Map<const RowMat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

// Temporal extent above which the memory-light code paths take over; the two
// paths agree to rounding and are cross-checked in the tests.
constexpr std::int64_t kFusedChildThreshold = 48;

constexpr double kDiscardedWarnLevel = 0.5;

void check_site_tensor(const DenseTensor& t) {
  if (t.rank() != 4)
    throw std::invalid_argument("site tensor must have rank 4");
  if (t.shape()[0] != t.shape()[1])
    throw std::invalid_argument("site tensor spatial extents differ");
  if (t.shape()[2] != t.shape()[3])
    throw std::invalid_argument("site tensor temporal extents differ");
}

DenseTensor q_from_tensor(const DenseTensor& t, QVariant variant) {
  return t.shape()[2] > kFusedChildThreshold
             ? detail::build_q_streamed(t, variant)
             : build_q(build_m(t), variant);
}

DenseTensor step_with(const DenseTensor& t, const HotrgLevel& level) {
  return t.shape()[2] > kFusedChildThreshold
             ? detail::coarse_step_fused(t, level)
             : coarse_step(t, level);
}

}  // namespace

DenseTensor build_m(const DenseTensor& t) {
  check_site_tensor(t);
  // Glue two copies over (right, left): axes come out as
  // (left, bottom1, top1, right, bottom2, top2).
  const std::pair<int, int> pairs[] = {{1, 0}};
  DenseTensor two = contract(t, t, pairs);
  // Rows: the pair of bottom legs. Columns: the leftover environment in the
  // order (left, top1, top2, right).
  return group_axes(two, {{1, 4}, {0, 2, 5, 3}});
}

DenseTensor build_q(const DenseTensor& m, QVariant variant) {
  if (m.rank() != 2) throw std::invalid_argument("build_q: rank-2 input required");
  const std::int64_t r = m.shape()[0];
  Eigen::Map<const RowMat> mm(m.raw(), r, m.shape()[1]);

  MatrixXcd p;
  if (variant == QVariant::ReMMT || variant == QVariant::ImMMT)
    p.noalias() = mm * mm.transpose();
  else
    p.noalias() = mm * mm.adjoint();

  Eigen::MatrixXd q;
  if (variant == QVariant::ReMMT || variant == QVariant::MMdag)
    q = p.real();
  else
    q = p.imag();
  q = 0.5 * (q + q.transpose()).eval();

  DenseTensor out({r, r});
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < r; ++j) out(i, j) = q(i, j);
  return out;
}

DenseTensor detail::build_q_streamed(const DenseTensor& t, QVariant variant) {
  check_site_tensor(t);
  const std::int64_t d = t.shape()[2];
  const std::int64_t r = d * d;

  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(r, r);
  RowMat x(r, d);
  Eigen::MatrixXd mr(r, d), mi(r, d);
  // The rank-update fast path only fills the lower triangle.
  const bool lower_only =
      variant == QVariant::ReMMT || variant == QVariant::MMdag;

  // One environment block per (left, right, top2) assignment; each yields the
  // M columns with those indices fixed, reshaped so rows run over (b1, b2).
  for (std::int64_t a = 0; a < 2; ++a)
    for (std::int64_t dd = 0; dd < 2; ++dd)
      for (std::int64_t c = 0; c < d; ++c) {
        Eigen::Map<const RowMat> block_a(t.raw() + a * 2 * r, 2, r);
        StridedMap block_b(t.raw() + dd * r + c, 2, d,
                           Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(
                               2 * r, d));
        // x[(i,b), j] = sum_e T[a,e,i,b] T[e,dd,j,c]
        x.noalias() = block_a.transpose() * block_b;
        for (std::int64_t i = 0; i < d; ++i)
          for (std::int64_t b = 0; b < d; ++b)
            for (std::int64_t j = 0; j < d; ++j) {
              const cdouble v = x(i * d + b, j);
              mr(i * d + j, b) = v.real();
              mi(i * d + j, b) = v.imag();
            }

        switch (variant) {
          case QVariant::ReMMT:
            q.selfadjointView<Eigen::Lower>().rankUpdate(mr, 1.0);
            q.selfadjointView<Eigen::Lower>().rankUpdate(mi, -1.0);
            break;
          case QVariant::MMdag:
            q.selfadjointView<Eigen::Lower>().rankUpdate(mr, 1.0);
            q.selfadjointView<Eigen::Lower>().rankUpdate(mi, 1.0);
            break;
          case QVariant::ImMMT:
            q.noalias() += mr * mi.transpose();
            q.noalias() += mi * mr.transpose();
            break;
          case QVariant::ImMMdag:
            q.noalias() += mi * mr.transpose();
            q.noalias() -= mr * mi.transpose();
            break;
        }
      }

  if (lower_only) {
    q.triangularView<Eigen::StrictlyUpper>() =
        q.transpose().triangularView<Eigen::StrictlyUpper>();
  } else {
    q = (0.5 * (q + q.transpose())).eval();
  }

  DenseTensor out({r, r});
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < r; ++j) out(i, j) = q(i, j);
  return out;
}

HotrgLevel isometry_from_q(const DenseTensor& q, int d_cut) {
  if (d_cut < 1) throw std::invalid_argument("d_cut must be >= 1");
  EigenResult er = eigh_symmetric(q);
  const std::int64_t n = static_cast<std::int64_t>(er.values.size());
  const std::int64_t child =
      static_cast<std::int64_t>(std::llround(std::sqrt(double(n))));
  if (child * child != n)
    throw std::invalid_argument("q side must be a perfect square");

  // Rank by magnitude; ties keep their position in the signed ordering.
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t x, std::int64_t y) {
                     return std::abs(er.values[x]) > std::abs(er.values[y]);
                   });

  const std::int64_t kept = std::min<std::int64_t>(n, d_cut);
  double total = 0.0, dropped = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double a = std::abs(er.values[order[i]]);
    total += a;
    if (i >= kept) dropped += a;
  }

  HotrgLevel lvl;
  lvl.gamma = DenseTensor({child, child, kept});
  lvl.kept_eigenvalues.resize(static_cast<std::size_t>(kept));
  lvl.discarded_weight = total > 0.0 ? dropped / total : 0.0;
  for (std::int64_t k = 0; k < kept; ++k) {
    lvl.kept_eigenvalues[static_cast<std::size_t>(k)] = er.values[order[k]];
    for (std::int64_t b1 = 0; b1 < child; ++b1)
      for (std::int64_t b2 = 0; b2 < child; ++b2)
        lvl.gamma(b1, b2, k) = er.vectors(b1 * child + b2, order[k]);
  }
  return lvl;
}

DenseTensor coarse_step(const DenseTensor& t, const HotrgLevel& level) {
  check_site_tensor(t);
  if (t.shape()[2] != level.child_dim())
    throw std::invalid_argument("coarse_step: gamma child dimension mismatch");

  const std::pair<int, int> glue[] = {{1, 0}};
  DenseTensor two = contract(t, t, glue);  // (a, b1, t1, d, b2, t2)
  const std::pair<int, int> bottoms[] = {{1, 0}, {4, 1}};
  DenseTensor tb = contract(two, level.gamma, bottoms);  // (a, t1, d, t2, k)
  const std::pair<int, int> tops[] = {{1, 0}, {3, 1}};
  return contract(tb, level.gamma, tops);  // (a, d, k, l)
}

DenseTensor detail::coarse_step_fused(const DenseTensor& t,
                                      const HotrgLevel& level) {
  check_site_tensor(t);
  if (t.shape()[2] != level.child_dim())
    throw std::invalid_argument("coarse_step: gamma child dimension mismatch");
  const std::int64_t d = level.child_dim();
  const std::int64_t k = level.kept_dim();

  // Dense per-slot copies of gamma: slot[b1, b2] for each kept index, plus
  // the flat (child^2 x kept) view.
  std::vector<RowMat> slot(static_cast<std::size_t>(k));
  for (std::int64_t kk = 0; kk < k; ++kk) {
    slot[static_cast<std::size_t>(kk)].resize(d, d);
    for (std::int64_t b1 = 0; b1 < d; ++b1)
      for (std::int64_t b2 = 0; b2 < d; ++b2)
        slot[static_cast<std::size_t>(kk)](b1, b2) =
            level.gamma.raw()[(b1 * d + b2) * k + kk];
  }
  Eigen::Map<const RowMat> flat(level.gamma.raw(), d * d, k);

  DenseTensor out({2, 2, k, k});
  RowMat h(d, d), acc(k, k);
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t j = 0; j < 2; ++j) {
      acc.setZero();
      for (std::int64_t e = 0; e < 2; ++e) {
        Eigen::Map<const RowMat> g1(t.raw() + (i * 2 + e) * d * d, d, d);
        Eigen::Map<const RowMat> g2(t.raw() + (e * 2 + j) * d * d, d, d);
        for (std::int64_t kk = 0; kk < k; ++kk) {
          // h[t1, t2] = sum_{b1 b2} g1[b1, t1] slot_k[b1, b2] g2[b2, t2]
          h.noalias() = g1.transpose() *
                        (slot[static_cast<std::size_t>(kk)] * g2);
          acc.row(kk).noalias() +=
              Eigen::Map<const Eigen::RowVectorXcd>(h.data(), d * d) * flat;
        }
      }
      for (std::int64_t kk = 0; kk < k; ++kk)
        for (std::int64_t ll = 0; ll < k; ++ll)
          out(i, j, kk, ll) = acc(kk, ll);
    }
  return out;
}

std::pair<DenseTensor, IsometryTree> coarse_grain(const ModelParams& p) {
  p.validate();
  DenseTensor t = fundamental_tensor(quantum_to_classical(p));
  IsometryTree tree;
  tree.fingerprint = p.fingerprint();
  for (int lv = 1; lv <= p.levels(); ++lv) {
    HotrgLevel level = isometry_from_q(q_from_tensor(t, p.q_variant), p.d_cut);
    level.level = lv;
    t = step_with(t, level);
    tree.levels.push_back(std::move(level));
  }
  return {std::move(t), std::move(tree)};
}

MatrixXcd extract_transfer(const DenseTensor& t, Boundary boundary) {
  check_site_tensor(t);
  const std::int64_t s = t.shape()[0];
  const std::int64_t d = t.shape()[2];
  MatrixXcd u = MatrixXcd::Zero(d, d);
  for (std::int64_t bottom = 0; bottom < d; ++bottom)
    for (std::int64_t top = 0; top < d; ++top) {
      if (boundary == Boundary::periodic) {
        cdouble sum = 0.0;
        for (std::int64_t a = 0; a < s; ++a) sum += t(a, a, bottom, top);
        u(top, bottom) = sum;
      } else {
        u(top, bottom) = t(std::int64_t{0}, std::int64_t{0}, bottom, top);
      }
    }
  return u;
}

CoarseTEO build_teo(const ModelParams& p) {
  auto [t, tree] = coarse_grain(p);
  CoarseTEO teo;
  teo.prefactor = teo_prefactor(p);
  teo.matrix = teo.prefactor * extract_transfer(t, p.boundary);
  teo.params = p;
  for (const auto& lvl : tree.levels)
    if (lvl.discarded_weight > kDiscardedWarnLevel) {
      char buf[128];
      std::snprintf(buf, sizeof(buf),
                    "level %d discarded weight %.3f exceeds %.1f", lvl.level,
                    lvl.discarded_weight, kDiscardedWarnLevel);
      teo.warnings.emplace_back(buf);
    }
  teo.tree = std::move(tree);
  return teo;
}

MatrixXcd embedding_matrix(const IsometryTree& tree) {
  const int n = tree.n_sites();
  if (n > 16)
    throw std::invalid_argument("embedding_matrix: full space too large");

  MatrixXcd w;
  for (std::size_t lv = 0; lv < tree.levels.size(); ++lv) {
    const HotrgLevel& level = tree.levels[lv];
    const std::int64_t child = level.child_dim();
    const std::int64_t kept = level.kept_dim();
    Eigen::Map<const RowMat> g(level.gamma.raw(), child * child, kept);
    MatrixXcd stage = MatrixXcd::Identity(1, 1);
    const int copies = n >> static_cast<int>(lv + 1);
    for (int c = 0; c < copies; ++c) stage = kron(stage, MatrixXcd(g));
    w = (lv == 0) ? stage : MatrixXcd(w * stage);
  }
  return w;
}

std::vector<QSweepRow> q_sweep(const ModelParams& p,
                               std::span<const double> thetas,
                               QVariant variant, int level) {
  p.validate();
  if (level < 1 || level > p.levels())
    throw std::invalid_argument("q_sweep: level out of range");

  std::vector<QSweepRow> rows;
  rows.reserve(thetas.size());
  for (double theta : thetas) {
    if (theta < -1e-12 || theta > M_PI / 2 + 1e-12)
      throw std::invalid_argument("q_sweep: theta outside [0, pi/2]");
    const cdouble dtau = p.dt * std::exp(cdouble(0.0, theta));
    DenseTensor t = fundamental_tensor(couplings_from_dtau(p.lambda, dtau));
    for (int lv = 1; lv < level; ++lv) {
      HotrgLevel iso = isometry_from_q(q_from_tensor(t, variant), p.d_cut);
      iso.level = lv;
      t = step_with(t, iso);
    }
    QSweepRow row;
    row.theta = theta;
    row.eigenvalues = eigh_symmetric(q_from_tensor(t, variant)).values;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

constexpr char kCacheMagic[8] = {'T', 'R', 'G', 'T', 'E', 'O', '1', '\n'};

void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_tensor(std::ostream& os, const DenseTensor& t) {
  put_u64(os, static_cast<std::uint64_t>(t.rank()));
  for (auto e : t.shape()) put_u64(os, static_cast<std::uint64_t>(e));
  for (const auto& v : t.data()) {
    put_f64(os, v.real());
    put_f64(os, v.imag());
  }
}

bool get_u64(std::istream& is, std::uint64_t& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return bool(is);
}

bool get_f64(std::istream& is, double& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return bool(is);
}

bool get_tensor(std::istream& is, DenseTensor& t) {
  std::uint64_t rank = 0;
  if (!get_u64(is, rank) || rank > 8) return false;
  std::vector<std::int64_t> shape;
  std::int64_t size = 1;
  for (std::uint64_t i = 0; i < rank; ++i) {
    std::uint64_t e = 0;
    if (!get_u64(is, e) || e == 0 || e > (1u << 24)) return false;
    shape.push_back(static_cast<std::int64_t>(e));
    size *= static_cast<std::int64_t>(e);
    if (size > (std::int64_t{1} << 32)) return false;
  }
  std::vector<cdouble> data(static_cast<std::size_t>(size));
  for (auto& v : data) {
    double re = 0, im = 0;
    if (!get_f64(is, re) || !get_f64(is, im)) return false;
    v = cdouble(re, im);
  }
  t = DenseTensor(std::move(shape), std::move(data));
  return true;
}

}  // namespace

void save_teo(const CoarseTEO& teo, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open cache file for writing");
    os.write(kCacheMagic, sizeof(kCacheMagic));
    const std::string fp = teo.params.fingerprint();
    put_u64(os, fp.size());
    os.write(fp.data(), static_cast<std::streamsize>(fp.size()));

    put_f64(os, teo.prefactor.real());
    put_f64(os, teo.prefactor.imag());
    put_u64(os, static_cast<std::uint64_t>(teo.matrix.rows()));
    put_u64(os, static_cast<std::uint64_t>(teo.matrix.cols()));
    for (Eigen::Index i = 0; i < teo.matrix.rows(); ++i)
      for (Eigen::Index j = 0; j < teo.matrix.cols(); ++j) {
        put_f64(os, teo.matrix(i, j).real());
        put_f64(os, teo.matrix(i, j).imag());
      }

    put_u64(os, teo.tree.levels.size());
    for (const auto& lvl : teo.tree.levels) {
      put_u64(os, static_cast<std::uint64_t>(lvl.level));
      put_tensor(os, lvl.gamma);
      put_u64(os, lvl.kept_eigenvalues.size());
      for (double v : lvl.kept_eigenvalues) put_f64(os, v);
      put_f64(os, lvl.discarded_weight);
    }

    put_u64(os, teo.warnings.size());
    for (const auto& w : teo.warnings) {
      put_u64(os, w.size());
      os.write(w.data(), static_cast<std::streamsize>(w.size()));
    }
    if (!os) throw std::runtime_error("cache write failed");
  }
  std::filesystem::rename(tmp, path);
}

std::optional<CoarseTEO> load_teo(const std::filesystem::path& path,
                                  const ModelParams& expect) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
    return std::nullopt;

  std::uint64_t fp_len = 0;
  if (!get_u64(is, fp_len) || fp_len > 4096) return std::nullopt;
  std::string fp(fp_len, '\0');
  is.read(fp.data(), static_cast<std::streamsize>(fp_len));
  if (!is || fp != expect.fingerprint()) return std::nullopt;

  CoarseTEO teo;
  teo.params = expect;
  double re = 0, im = 0;
  if (!get_f64(is, re) || !get_f64(is, im)) return std::nullopt;
  teo.prefactor = cdouble(re, im);

  std::uint64_t rows = 0, cols = 0;
  if (!get_u64(is, rows) || !get_u64(is, cols)) return std::nullopt;
  if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
    return std::nullopt;
  teo.matrix.resize(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j) {
      if (!get_f64(is, re) || !get_f64(is, im)) return std::nullopt;
      teo.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cdouble(re, im);
    }

  std::uint64_t n_levels = 0;
  if (!get_u64(is, n_levels) || n_levels > 32) return std::nullopt;
  teo.tree.fingerprint = fp;
  for (std::uint64_t l = 0; l < n_levels; ++l) {
    HotrgLevel lvl;
    std::uint64_t level_no = 0, n_eigs = 0;
    if (!get_u64(is, level_no)) return std::nullopt;
    lvl.level = static_cast<int>(level_no);
    if (!get_tensor(is, lvl.gamma) || lvl.gamma.rank() != 3)
      return std::nullopt;
    if (!get_u64(is, n_eigs) || n_eigs > (1u << 24)) return std::nullopt;
    lvl.kept_eigenvalues.resize(n_eigs);
    for (auto& v : lvl.kept_eigenvalues)
      if (!get_f64(is, v)) return std::nullopt;
    if (!get_f64(is, lvl.discarded_weight)) return std::nullopt;
    teo.tree.levels.push_back(std::move(lvl));
  }

  std::uint64_t n_warn = 0;
  if (!get_u64(is, n_warn) || n_warn > 1024) return std::nullopt;
  for (std::uint64_t w = 0; w < n_warn; ++w) {
    std::uint64_t len = 0;
    if (!get_u64(is, len) || len > 4096) return std::nullopt;
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) return std::nullopt;
    teo.warnings.push_back(std::move(s));
  }
  return teo;
}

}  // namespace trgtime
