#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trgtime/ising_map.hpp"
#include "trgtime/tensor.hpp"

namespace trgtime {

// One level of the binary coarse-graining tree. gamma has legs
// (child-bottom-left, child-bottom-right, kept) with real entries and
// orthonormal kept columns; it merges the two temporal legs of a fused pair.
struct HotrgLevel {
  int level = 0;  // 1-based; level 1 merges single sites into pairs
  DenseTensor gamma;
  std::vector<double> kept_eigenvalues;  // ranked by |value|, descending
  double discarded_weight = 0.0;         // sum |discarded| / sum |all|

  std::int64_t child_dim() const { return gamma.shape()[0]; }
  std::int64_t kept_dim() const { return gamma.shape()[2]; }
};

struct IsometryTree {
  std::vector<HotrgLevel> levels;
  std::string fingerprint;  // ModelParams fingerprint of the producing run

  int n_sites() const { return 1 << levels.size(); }
  std::int64_t final_dim() const { return levels.back().kept_dim(); }
};

// Coarse-grained time-evolution operator: prefactor times the transfer
// matrix of the fully blocked slice, acting bottom -> top in the kept basis.
struct CoarseTEO {
  MatrixXcd matrix;
  cdouble prefactor = 1.0;
  IsometryTree tree;
  ModelParams params;
  std::vector<std::string> warnings;  // e.g. discarded weight above 0.5
};

// Two-site environment matrix. Rows are the merged (bottom-left,
// bottom-right) legs, columns the merged (left, top-left, top-right, right)
// environment. Shape (D*D, 4*D*D) for temporal extent D. Intended for
// moderate D; the driver streams past it at large D.
DenseTensor build_m(const DenseTensor& t);

// Real symmetric matrix whose eigenvectors define the isometry.
//   ReMMT    Re[M M^T]       (production choice in real time)
//   MMdag    Re[M M^dag]     (Hermitian PSD; degenerate in real time)
//   ImMMdag  Im[M M^dag]     (antisymmetric part; symmetrizes to ~zero)
//   ImMMT    Im[M M^T]
// The result is symmetrized before returning.
DenseTensor build_q(const DenseTensor& m, QVariant variant);

// Spectral truncation of q: keep the min(d_cut, n) eigenvectors of largest
// |eigenvalue| (ties by position in the signed-descending order). level is
// left at 0 for the caller to fill.
HotrgLevel isometry_from_q(const DenseTensor& q, int d_cut);

// Fuse two horizontally adjacent copies of t and compress both temporal legs
// with the level's gamma. Result legs (left, right, bottom', top'), spatial
// extents unchanged.
DenseTensor coarse_step(const DenseTensor& t, const HotrgLevel& level);

// Full blocking of one time slice: log2(n_sites) coarse steps, each taking
// its isometry from the Q of the current tensor.
std::pair<DenseTensor, IsometryTree> coarse_grain(const ModelParams& p);

// Trace out the spatial legs (periodic) or pin them to index 0 (open).
// Row index is the top leg: the matrix acts bottom -> top.
MatrixXcd extract_transfer(const DenseTensor& t, Boundary boundary);

// prefactor * transfer of the blocked slice, plus provenance.
CoarseTEO build_teo(const ModelParams& p);

// Isometric embedding of the kept basis into the full 2^n_sites space,
// the kron chain of the per-level gammas. Small n_sites only.
MatrixXcd embedding_matrix(const IsometryTree& tree);

// Eigenvalues of Q at a given level as the Euclidean step is rotated,
// dtau = dt * exp(i*theta); theta in [0, pi/2] walks from imaginary to real
// time. Levels below the requested one are coarse-grained with p.d_cut.
struct QSweepRow {
  double theta;
  std::vector<double> eigenvalues;  // signed, descending
};
std::vector<QSweepRow> q_sweep(const ModelParams& p,
                               std::span<const double> thetas,
                               QVariant variant, int level = 1);

// Binary cache of a built TEO keyed by the exact parameter fingerprint.
// load_teo returns nullopt on any mismatch or malformed file.
void save_teo(const CoarseTEO& teo, const std::filesystem::path& path);
std::optional<CoarseTEO> load_teo(const std::filesystem::path& path,
                                  const ModelParams& expect);

namespace detail {

// Large-bond code paths; numerically identical to the plain ones.
DenseTensor coarse_step_fused(const DenseTensor& t, const HotrgLevel& level);
DenseTensor build_q_streamed(const DenseTensor& t, QVariant variant);

}  // namespace detail

}  // namespace trgtime
