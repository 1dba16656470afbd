#include "trgtime/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace trgtime {

namespace {

constexpr double kOccupationFloor = 1e-12;

}  // namespace

std::optional<double> occupation_center(const std::vector<double>& n_expect) {
  double total = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < n_expect.size(); ++j) {
    total += n_expect[j];
    weighted += static_cast<double>(j) * n_expect[j];
  }
  if (std::abs(total) < kOccupationFloor) return std::nullopt;
  return weighted / total;
}

EvolutionRun run_time_series(
    int steps, double dt, const std::function<void()>& step,
    const std::function<std::vector<double>()>& measure,
    const std::function<double()>& norm) {
  if (steps < 1) throw std::invalid_argument("steps must be at least 1");
  EvolutionRun run;
  run.steps = steps;
  run.dt = dt;
  run.series.reserve(static_cast<std::size_t>(steps) + 1);
  for (int s = 0; s <= steps; ++s) {
    if (s > 0) step();
    StepRecord rec;
    rec.step = s;
    rec.t = s * dt;
    rec.n_expect = measure();
    rec.cbar = occupation_center(rec.n_expect);
    rec.norm = norm();
    run.series.push_back(std::move(rec));
  }
  return run;
}

EvolutionRun evolve(const ProjectedState& state, const CoarseTEO& teo,
                    int steps, const EvolveOptions& opts) {
  if (state.tree_fingerprint != teo.tree.fingerprint)
    throw std::invalid_argument("state and TEO come from different trees");
  if (opts.perturbation &&
      opts.perturbation->tree_fingerprint != teo.tree.fingerprint)
    throw std::invalid_argument("perturbation comes from a different tree");

  const std::vector<ProjectedOperator> numbers =
      projected_number_operators(teo.tree);

  VectorXcd psi = state.vector;
  auto step = [&] {
    if (opts.renormalize) {
      const double nrm = psi.norm();
      if (!(nrm > 0.0)) throw std::runtime_error("state norm vanished");
      psi /= nrm;
    }
    psi = teo.matrix * psi;
    if (opts.perturbation) psi = opts.perturbation->matrix * psi;
  };
  auto measure = [&] {
    const double nrm2 = psi.squaredNorm();
    if (!(nrm2 > 0.0)) throw std::runtime_error("state norm vanished");
    std::vector<double> out;
    out.reserve(numbers.size());
    for (const auto& op : numbers)
      out.push_back(psi.dot(op.matrix * psi).real() / nrm2);
    return out;
  };
  auto norm = [&] { return psi.norm(); };
  return run_time_series(steps, teo.params.dt, step, measure, norm);
}

ProjectedOperator longitudinal_unitary(const IsometryTree& tree,
                                       double epsilon, double dt) {
  if (epsilon < 0.0 || !std::isfinite(epsilon))
    throw std::invalid_argument("epsilon must be nonnegative");
  const std::int64_t d = tree.final_dim();
  MatrixXcd total = MatrixXcd::Zero(d, d);
  for (const ProductOperator& op : sigma_x_total(tree.n_sites()))
    total += project_product(op, tree).matrix;
  return ProjectedOperator{herm_expm(total, cdouble(0.0, -dt * epsilon)),
                           tree.fingerprint};
}

SpectrumResult spectrum(const CoarseTEO& teo) {
  Eigen::ComplexEigenSolver<MatrixXcd> es(teo.matrix);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigensolver failed on the step operator");
  const auto& mu = es.eigenvalues();
  const double floor = 1e-14 * mu.cwiseAbs().maxCoeff();
  const double dt = teo.params.dt;

  std::vector<std::pair<cdouble, bool>> rows;
  rows.reserve(static_cast<std::size_t>(mu.size()));
  for (int i = 0; i < mu.size(); ++i) {
    if (std::abs(mu(i)) <= floor) continue;  // truncation null modes
    const cdouble e = cdouble(0.0, 1.0) * std::log(mu(i)) / dt;
    const bool aliased =
        std::numbers::pi - std::abs(std::arg(mu(i))) < 1e-9;
    rows.emplace_back(e, aliased);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.first.real() != b.first.real())
      return a.first.real() < b.first.real();
    return a.first.imag() < b.first.imag();
  });

  SpectrumResult out;
  out.dt = dt;
  out.energies.reserve(rows.size());
  out.aliased.reserve(rows.size());
  for (const auto& [e, flag] : rows) {
    out.energies.push_back(e);
    out.aliased.push_back(flag);
  }
  return out;
}

std::vector<LambdaScanRow> lambda_scan(std::span<const double> lambdas,
                                       const ModelParams& base) {
  std::vector<LambdaScanRow> rows;
  rows.reserve(lambdas.size());
  for (double lam : lambdas) {
    ModelParams p = base;
    p.lambda = lam;
    const CoarseTEO teo = build_teo(p);
    const ProjectedState vac = vacuum_state(teo);
    double total = 0.0;
    for (const auto& op : projected_number_operators(teo.tree))
      total += expectation(op, vac).real();
    rows.push_back({lam, p.d_cut, total / p.n_sites});
  }
  return rows;
}

}  // namespace trgtime
