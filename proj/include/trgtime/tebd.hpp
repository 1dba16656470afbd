#pragma once

#include <array>
#include <vector>

#include "trgtime/ed.hpp"
#include "trgtime/evolution.hpp"
#include "trgtime/ising_map.hpp"
#include "trgtime/states.hpp"
#include "trgtime/tensor.hpp"

namespace trgtime {

// One MPS site tensor (left, phys, right), stored as one left x right matrix
// per physical index. phys[0] is spin up (empty), phys[1] spin down
// (occupied), matching the dense bit layout.
struct MpsSite {
  std::array<MatrixXcd, 2> phys;

  std::int64_t left() const { return phys[0].rows(); }
  std::int64_t right() const { return phys[0].cols(); }
};

// Matrix product state with an orthogonality center: sites left of `center`
// are left isometries, sites right of it right isometries, whenever the
// state was produced by the routines below (arbitrary single-site gates may
// break the form; canonicalize restores it). Truncation limits ride along
// with the state: max_bond 0 means unlimited, num_cutoff is the relative
// discarded squared-weight allowed per split. total_discarded accumulates
// the relative weight dropped by every truncation since construction.
struct MPS {
  std::vector<MpsSite> sites;
  int center = 0;
  int max_bond = 0;
  double num_cutoff = 1e-8;
  double total_discarded = 0.0;

  int n_sites() const { return static_cast<int>(sites.size()); }
  // Extent of the bond between sites b and b+1.
  std::int64_t bond(int b) const {
    return sites[static_cast<std::size_t>(b)].right();
  }
  std::int64_t largest_bond() const;
};

MPS product_mps(const std::vector<Eigen::Vector2cd>& locals);
MPS all_up_mps(int n_sites);

// Exact conversions for cross-checks; capped like the dense reference.
MPS mps_from_vector(const VectorXcd& psi, int n_sites);
VectorXcd mps_to_vector(const MPS& psi);

// Restores the canonical form about `center` by QR sweeps from both ends.
// Exact (no truncation); use after operations that break the form.
void canonicalize(MPS& psi, int center);

// Moves the center by successive exact QR shifts; trusts the stored form.
void move_center(MPS& psi, int target);

double mps_norm(const MPS& psi);
// Scales the state to unit norm; returns the prior norm.
double normalize(MPS& psi);

cdouble mps_overlap(const MPS& a, const MPS& b);

// Direct-sum addition followed by a compression sweep. The result inherits
// a's truncation limits.
MPS mps_add(const MPS& a, const MPS& b);

// Canonicalizes and then sweeps right-to-left with truncated SVDs, leaving
// the center at site 0.
void compress(MPS& psi);

// Worst deviation from the isometry conditions on either side of the center.
double canonical_error(const MPS& psi);

void apply_single(MPS& psi, int j, const Eigen::Matrix2cd& g);

// Applies a two-site gate at bond j (sites j, j+1) with a truncated SVD
// split. Gate rows/columns are indexed (p_j << 1) | p_{j+1}. The center ends
// at j+1 when center_right, at j otherwise. Returns the relative squared
// weight discarded by this split.
double apply_two_site(MPS& psi, int j, const Eigen::Matrix4cd& g,
                      bool center_right);

// Gates of one symmetric step: each family at half the step so the full
// layout [singles, bonds ->, wrap x2, bonds <-, singles] composes to the
// same splitting as the dense reference. `drive` is the optional
// longitudinal factor exp(-i dt epsilon sx), applied once per step after
// the symmetric block, mirroring the coarse-path perturbation.
struct GateSet {
  Eigen::Matrix2cd single;
  Eigen::Matrix4cd bond;
  Eigen::Matrix2cd drive;
  bool has_drive = false;
  bool unitary = true;
  Boundary boundary = Boundary::periodic;
  int n_sites = 0;
};

GateSet real_time_gates(const ModelParams& p);
// exp(-tau H) splitting for ground-state cooling; non-unitary.
GateSet imaginary_time_gates(const ModelParams& p, double tau);

// One full step. The wrap bond is handled by swapping the last site next to
// the first, applying the gate twice, and swapping back. Returns the
// relative weight discarded during this step; leaves the center at site 0.
double trotter_step(MPS& psi, const GateSet& g);

// Per-site occupations (1 - sz)/2, normalized by the state norm.
std::vector<double> measure_n(const MPS& psi);

// Ground state as an MPS: dense diagonalization when the chain fits the
// dense reference, imaginary-time cooling from the polarized state above.
MPS vacuum_mps(const ModelParams& p);
// The cooling path regardless of size (exposed for cross-checks).
MPS cooled_vacuum_mps(const ModelParams& p);

// Gaussian packet as a sum of single-creation MPS terms: the string factors
// are applied site by site to `base`, the terms are summed with
// recompression. Unnormalized; throws when the packet has no support.
MPS apply_packet(const WavePacketSpec& spec, const MPS& base);
// vacuum_mps + apply_packet + normalize.
MPS packet_mps(const WavePacketSpec& spec, const ModelParams& p);

// Repeated trotter_step recording occupations and norm each step, same
// series layout as the coarse and dense paths.
EvolutionRun tebd_evolve(MPS psi, const ModelParams& p, int steps,
                         bool renormalize = false);

}  // namespace trgtime
