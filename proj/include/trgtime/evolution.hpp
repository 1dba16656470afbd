#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "trgtime/hotrg.hpp"
#include "trgtime/states.hpp"

namespace trgtime {

struct StepRecord {
  int step = 0;
  double t = 0.0;
  std::vector<double> n_expect;  // per site, normalized by the state norm
  std::optional<double> cbar;    // missing when the total occupation ~ 0
  double norm = 0.0;             // state 2-norm when the record was taken
};

struct EvolutionRun {
  int steps = 0;
  double dt = 0.0;
  std::vector<StepRecord> series;  // steps + 1 records, t=0 first
  // Relative squared weight dropped by bond truncations over the run; zero
  // for paths that do not truncate (coarse and dense evolution).
  double total_discarded = 0.0;
};

// Mean position weighted by occupation, sum_j j*n_j / sum_j n_j. Undefined
// (and left missing) below an occupation floor of 1e-12.
std::optional<double> occupation_center(const std::vector<double>& n_expect);

// Shared stepping driver for the truncated-basis, dense, and MPS walkers.
// step() advances the state once; measure() returns the per-site
// occupations of the current state; norm() its 2-norm. The t=0 record is
// taken before the first step.
EvolutionRun run_time_series(int steps, double dt,
                             const std::function<void()>& step,
                             const std::function<std::vector<double>()>& measure,
                             const std::function<double()>& norm);

struct EvolveOptions {
  bool renormalize = false;  // rescale to unit norm before each step
  const ProjectedOperator* perturbation = nullptr;  // applied after the TEO
};

// Repeated application of the coarse TEO (then the optional perturbation
// unitary), recording occupations, center and norm each step. The norm is
// recorded as found; with renormalize set the state is rescaled before the
// next step, so records show per-step factors instead of cumulative drift.
EvolutionRun evolve(const ProjectedState& state, const CoarseTEO& teo,
                    int steps, const EvolveOptions& opts = {});

// exp(-i*dt*epsilon * sum_j sx_j) in the kept basis.
ProjectedOperator longitudinal_unitary(const IsometryTree& tree,
                                       double epsilon, double dt);

// Energies E = i*Ln(mu)/dt from the TEO eigenvalues mu, principal branch,
// sorted by real part. Imaginary parts measure non-unitarity. aliased marks
// eigenvalues on the branch-cut boundary |Re E|*dt ~ pi, where the
// principal branch can no longer be trusted.
struct SpectrumResult {
  std::vector<cdouble> energies;
  std::vector<bool> aliased;
  double dt = 0.0;
};
SpectrumResult spectrum(const CoarseTEO& teo);

// Vacuum occupation density <Nbar> = sum_j <N_j> / n for each lambda, at
// the template's d_cut.
struct LambdaScanRow {
  double lambda = 0.0;
  int d_cut = 0;
  double nbar = 0.0;
};
std::vector<LambdaScanRow> lambda_scan(std::span<const double> lambdas,
                                       const ModelParams& base);

}  // namespace trgtime
