#pragma once

#include <string>
#include <vector>

#include "trgtime/hotrg.hpp"
#include "trgtime/tensor.hpp"

namespace trgtime {

// Fermion-number parity sectors of the periodic chain. The sector picks the
// momentum grid: odd carries the integer grid including 0 and pi, even the
// half-integer grid.
enum class Sector { odd, even };
std::string to_string(Sector s);

// Odd: {2*pi*m/n : m = -n/2+1 .. n/2}. Even: {(2m+1)*pi/n : m = -n/2 ..
// n/2-1}. Ascending, exactly n values each, all within (-pi, pi].
std::vector<double> allowed_momenta(Sector sector, int n_sites);

// Operator that factorizes over sites, one 2x2 block per site. Site 0 is the
// major index when densified.
struct ProductOperator {
  std::vector<Eigen::Matrix2cd> locals;

  int n_sites() const { return static_cast<int>(locals.size()); }
};

ProductOperator identity_product(int n_sites);

// Jordan-Wigner ladder operators: a -sz string left of j and the ladder
// block at j. Spin up (index 0) is empty, spin down occupied, so the
// creation block lowers.
ProductOperator jw_creation(int j, int n_sites);
ProductOperator jw_annihilation(int j, int n_sites);

// N_j = (1 - sz_j)/2.
ProductOperator number_operator(int j, int n_sites);

// The n single-site sx factors, kept separate for summation after
// projection.
std::vector<ProductOperator> sigma_x_total(int n_sites);

// Dense matrix on the full 2^n space, site 0 major. Guarded to small n.
MatrixXcd product_to_dense(const ProductOperator& op);

// Operator and state in the kept basis of a blocking tree. The fingerprint
// ties them to the run that produced the tree; mixing trees throws.
struct ProjectedOperator {
  MatrixXcd matrix;
  std::string tree_fingerprint;
};

struct ProjectedState {
  VectorXcd vector;
  std::string tree_fingerprint;
  bool normalized = false;
};

// Carry a site-factorized operator up the blocking tree: at each level the
// two child blocks a, b of a pair become gamma^T (a kron b) gamma. Exactly
// the conjugation by the tree's embedding, at any d_cut.
ProjectedOperator project_product(const ProductOperator& op,
                                  const IsometryTree& tree);

// All n projected number operators, in site order.
std::vector<ProjectedOperator> projected_number_operators(
    const IsometryTree& tree);

// op.matrix * psi.vector, unnormalized. Fingerprints must match.
ProjectedState apply(const ProjectedOperator& op, const ProjectedState& psi);

// <psi|A|psi> / <psi|psi>.
cdouble expectation(const ProjectedOperator& op, const ProjectedState& psi);

// Scales psi to unit 2-norm and returns the prior norm.
double normalize(ProjectedState& psi);

struct WavePacketSpec {
  double k_center = 0.0;
  int x_center = 0;
  double sigma = 2.0;
  Sector sector = Sector::odd;

  // k_center on the sector's grid, x_center a site, sigma > 0.
  void validate(int n_sites) const;
};

// Shortest ring distance between sites a and b.
int min_image_distance(int a, int b, int n_sites);

// coeff_j = exp(-i k x_j) * exp(-r(x_j, x_center)^2 / sigma^2).
std::vector<cdouble> packet_coefficients(const WavePacketSpec& spec,
                                         int n_sites);

// sum_j coeff_j * projected creation at j.
ProjectedOperator packet_operator(const WavePacketSpec& spec,
                                  const IsometryTree& tree);

// packet_operator applied to base, then normalized. Throws when the kept
// basis annihilates the packet. Two-packet states chain two calls.
ProjectedState gaussian_packet(const WavePacketSpec& spec,
                               const IsometryTree& tree,
                               const ProjectedState& base);

// Right-eigenvector of the step operator with the lowest energy, normalized,
// largest-magnitude component made real positive. Real time ranks
// eigenvalues by -arg(mu)/dt, imaginary time by -ln|mu|/dt.
ProjectedState vacuum_state(const CoarseTEO& teo);

// psi(k) = n^{-1/2} sum_j exp(+i k x_j) amp_j over the sector's grid. The
// grid is uniform with spacing 2*pi/n, so the map is unitary.
std::vector<cdouble> momentum_profile(const std::vector<cdouble>& amplitudes,
                                      Sector sector);

}  // namespace trgtime
