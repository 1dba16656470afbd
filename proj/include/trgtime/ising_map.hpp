#pragma once

#include <string>

#include "trgtime/tensor.hpp"

namespace trgtime {

enum class Boundary { periodic, open };

// Which real symmetric matrix the coarse-graining isometry is taken from.
// ReMMT is the production choice for real-time couplings; MMdag degenerates
// there (all eigenvalues equal) and is kept for diagnostics together with the
// two imaginary-part variants.
enum class QVariant { ReMMT, MMdag, ImMMdag, ImMMT };

// real_time: dt is the real time step of the unitary evolution.
// imaginary_time: dt is a Euclidean step dtau; all couplings come out real.
enum class TimeMode { real_time, imaginary_time };

std::string to_string(Boundary b);
std::string to_string(QVariant v);
std::string to_string(TimeMode m);

struct ModelParams {
  int n_sites = 8;       // power of two, >= 2
  double lambda = 0.2;   // nearest-neighbour coupling, >= 0
  double dt = 0.01;      // time step, > 0; guarded above 0.05
  double epsilon = 0.0;  // longitudinal perturbation strength, >= 0
  int d_cut = 37;        // bond dimension cap, >= 1
  Boundary boundary = Boundary::periodic;
  QVariant q_variant = QVariant::ReMMT;
  TimeMode mode = TimeMode::real_time;
  // Steps above 0.05 drive the coarse-graining into a regime dominated by
  // discarded weight; requires explicit opt-in.
  bool allow_large_dt = false;

  void validate() const;  // throws std::invalid_argument naming the field
  int levels() const;     // log2(n_sites)

  // Canonical string over every field; equality of fingerprints is the cache
  // contract. Doubles are printed with 17 significant digits.
  std::string fingerprint() const;
};

// Spatial and temporal couplings of the classical network equivalent to one
// time slice. Real time: beta_s = i*lambda*dt, beta_tau = -ln(dt)/2 - i*pi/4.
// Imaginary time: beta_s = lambda*dt, tanh(beta_tau) = exp(-2*dt).
struct ClassicalCouplings {
  cdouble beta_s;
  cdouble beta_tau;
};

ClassicalCouplings quantum_to_classical(const ModelParams& p);

// Couplings for a general complex Euclidean step; dtau = dt*exp(i*theta)
// interpolates between imaginary time (theta = 0) and real time
// (theta = pi/2, where tanh(beta_tau) lands on the unit circle).
ClassicalCouplings couplings_from_dtau(double lambda, cdouble dtau);

// Rank-4 site tensor with legs (left, right, bottom, top); spatial legs carry
// sqrt(tanh beta_s), temporal legs sqrt(tanh beta_tau), and entries with odd
// total index parity vanish.
DenseTensor fundamental_tensor(const ClassicalCouplings& c);

// Scalar in front of the traced slice network: cos^Ns(lambda*dt)*exp(i*dt*Ns)
// in real time, cosh^Ns(lambda*dt)*exp(dt*Ns) in imaginary time.
cdouble teo_prefactor(const ModelParams& p);

}  // namespace trgtime
