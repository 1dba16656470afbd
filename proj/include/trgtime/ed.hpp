#pragma once

#include <vector>

#include "trgtime/evolution.hpp"
#include "trgtime/ising_map.hpp"
#include "trgtime/states.hpp"

// Dense full-Hilbert-space reference for small chains. Works in the basis
// where the transverse field is diagonal: H = -lambda sum sx sx - sum sz
// (+ epsilon sum sx when p.epsilon > 0). Site 0 is the major bit.
namespace trgtime::ed {

inline constexpr int kMaxDenseSites = 12;

MatrixXcd build_hamiltonian(const ModelParams& p);

// exp(-i*dt*h) via Hermitian eigendecomposition.
MatrixXcd exact_teo(const MatrixXcd& h, double dt);

// Symmetric second-order splitting
//   exp(-i dt H_T/2) exp(-i dt H_NN) exp(-i dt H_T/2)
// with H_T = -sum sz diagonal and H_NN = -lambda sum sx sx applied bond by
// bond (the bond terms commute).
MatrixXcd trotter_teo(const ModelParams& p);

// Eigenvalues ascending.
std::vector<double> dense_spectrum(const MatrixXcd& h);

// Lowest eigenvector, largest-magnitude component made real positive.
VectorXcd dense_ground_state(const MatrixXcd& h);

// c^dag_j on a full-space vector, Jordan-Wigner signs included.
VectorXcd apply_jw_creation(int j, int n_sites, const VectorXcd& psi);

// Gaussian packet on a full-space base state, normalized.
VectorXcd dense_packet(const WavePacketSpec& spec, int n_sites,
                       const VectorXcd& base);

// Per-site occupations <N_j>, normalized by the state norm.
std::vector<double> measure_n(int n_sites, const VectorXcd& psi);

// Same record layout and metrics as the truncated-basis path.
EvolutionRun dense_evolve(const VectorXcd& state, const MatrixXcd& teo,
                          int n_sites, int steps, double dt,
                          const MatrixXcd* perturbation = nullptr,
                          bool renormalize = false);

}  // namespace trgtime::ed
