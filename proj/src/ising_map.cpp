#include "trgtime/ising_map.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace trgtime {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Boundary b) {
  return b == Boundary::periodic ? "periodic" : "open";
}

std::string to_string(QVariant v) {
  switch (v) {
    case QVariant::ReMMT: return "ReMMT";
    case QVariant::MMdag: return "MMdag";
    case QVariant::ImMMdag: return "ImMMdag";
    case QVariant::ImMMT: return "ImMMT";
  }
  throw std::invalid_argument("unknown QVariant");
}

std::string to_string(TimeMode m) {
  return m == TimeMode::real_time ? "real" : "imaginary";
}

void ModelParams::validate() const {
  if (n_sites < 2 || (n_sites & (n_sites - 1)) != 0)
    throw std::invalid_argument("n_sites must be a power of two, >= 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be finite and >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("dt must be finite and > 0");
  if (dt > 0.05 && !allow_large_dt)
    throw std::invalid_argument(
        "dt above 0.05 needs allow_large_dt (expect large discarded weight)");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("epsilon must be finite and >= 0");
  if (d_cut < 1) throw std::invalid_argument("d_cut must be >= 1");
}

int ModelParams::levels() const {
  int lv = 0;
  for (int n = n_sites; n > 1; n >>= 1) ++lv;
  return lv;
}

std::string ModelParams::fingerprint() const {
  std::string s = "trgtime-v1";
  s += ";ns=" + std::to_string(n_sites);
  s += ";lambda=" + fmt_double(lambda);
  s += ";dt=" + fmt_double(dt);
  s += ";epsilon=" + fmt_double(epsilon);
  s += ";dcut=" + std::to_string(d_cut);
  s += ";boundary=" + to_string(boundary);
  s += ";qvariant=" + to_string(q_variant);
  s += ";mode=" + to_string(mode);
  s += ";allow_large_dt=" + std::string(allow_large_dt ? "1" : "0");
  return s;
}

ClassicalCouplings quantum_to_classical(const ModelParams& p) {
  if (!(p.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (p.mode == TimeMode::real_time) {
    // tanh(beta_tau) = (1 - i*dt)/(1 + i*dt), on the unit circle.
    return {cdouble(0.0, p.lambda * p.dt),
            cdouble(-0.5 * std::log(p.dt), -0.25 * M_PI)};
  }
  return couplings_from_dtau(p.lambda, cdouble(p.dt, 0.0));
}

ClassicalCouplings couplings_from_dtau(double lambda, cdouble dtau) {
  const cdouble t = std::exp(-2.0 * dtau);
  if (std::abs(t - 1.0) < 1e-14 || std::abs(t + 1.0) < 1e-14)
    throw std::invalid_argument("dtau places tanh(beta_tau) at a pole");
  return {lambda * dtau, std::atanh(t)};
}

DenseTensor fundamental_tensor(const ClassicalCouplings& c) {
  const cdouble ts = std::tanh(c.beta_s);
  const cdouble tt = std::tanh(c.beta_tau);
  // Exponent tables keep T[1,1,0,0] = tanh(beta_s) exact instead of
  // sqrt(tanh)^2.
  const cdouble ps[3] = {cdouble(1.0), std::sqrt(ts), ts};
  const cdouble pt[3] = {cdouble(1.0), std::sqrt(tt), tt};

  DenseTensor t({2, 2, 2, 2});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          if (((i + j + k + l) & 1) == 0) t(i, j, k, l) = ps[i + j] * pt[k + l];
  return t;
}

cdouble teo_prefactor(const ModelParams& p) {
  const double n = static_cast<double>(p.n_sites);
  if (p.mode == TimeMode::real_time)
    return std::pow(cdouble(std::cos(p.lambda * p.dt)), n) *
           std::exp(cdouble(0.0, p.dt * n));
  return std::pow(cdouble(std::cosh(p.lambda * p.dt)), n) *
         std::exp(cdouble(p.dt * n, 0.0));
}

}  // namespace trgtime
