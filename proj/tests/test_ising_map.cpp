#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "trgtime/ising_map.hpp"

using namespace trgtime;

TEST_CASE("real-time couplings for lambda=0.2, dt=0.01") {
  ModelParams p;
  p.lambda = 0.2;
  p.dt = 0.01;
  ClassicalCouplings c = quantum_to_classical(p);

  CHECK(c.beta_s.real() == 0.0);
  CHECK(c.beta_s.imag() == doctest::Approx(0.002).epsilon(1e-15));
  CHECK(c.beta_tau.real() ==
        doctest::Approx(2.3025850929940457).epsilon(1e-15));
  CHECK(c.beta_tau.imag() ==
        doctest::Approx(-0.78539816339744831).epsilon(1e-15));
}

TEST_CASE("tanh(beta_tau) equals (1 - i dt)/(1 + i dt) on the unit circle") {
  for (double dt : {0.001, 0.005, 0.01, 0.02, 0.05}) {
    ModelParams p;
    p.dt = dt;
    ClassicalCouplings c = quantum_to_classical(p);
    const cdouble t = std::tanh(c.beta_tau);
    const cdouble ref = (cdouble(1.0, -dt)) / (cdouble(1.0, dt));
    CHECK(std::abs(t - ref) < 1e-12);
    CHECK(std::abs(std::abs(t) - 1.0) < 1e-12);
  }
}

TEST_CASE("lambda = 0 turns off the spatial coupling") {
  ModelParams p;
  p.lambda = 0.0;
  ClassicalCouplings c = quantum_to_classical(p);
  CHECK(c.beta_s == cdouble(0.0, 0.0));
}

TEST_CASE("site tensor entries") {
  ModelParams p;
  p.lambda = 0.2;
  p.dt = 0.01;
  ClassicalCouplings c = quantum_to_classical(p);
  DenseTensor t = fundamental_tensor(c);

  REQUIRE(t.shape() == std::vector<std::int64_t>({2, 2, 2, 2}));
  CHECK(t(0, 0, 0, 0) == cdouble(1.0));
  CHECK(std::abs(t(1, 1, 0, 0) - std::tanh(c.beta_s)) < 1e-15);
  CHECK(t(1, 0, 0, 0) == cdouble(0.0));
  CHECK(std::abs(t(1, 0, 1, 0) -
                 std::sqrt(std::tanh(c.beta_s)) *
                     std::sqrt(std::tanh(c.beta_tau))) < 1e-15);
  CHECK(std::abs(t(0, 0, 1, 1) - std::tanh(c.beta_tau)) < 1e-15);

  // All odd-parity entries vanish; exhaustive over the 16 entries.
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          if (((i + j + k + l) & 1) == 1) CHECK(t(i, j, k, l) == cdouble(0.0));

  // Swapping within the spatial or temporal leg pair changes nothing.
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          CHECK(t(i, j, k, l) == t(j, i, k, l));
          CHECK(t(i, j, k, l) == t(i, j, l, k));
        }
}

TEST_CASE("beta_s = 0 factorizes the site tensor") {
  ModelParams p;
  p.lambda = 0.0;
  p.dt = 0.01;
  ClassicalCouplings c = quantum_to_classical(p);
  DenseTensor t = fundamental_tensor(c);
  const cdouble tt = std::tanh(c.beta_tau);

  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          cdouble expect = 0.0;
          if (i == 0 && j == 0 && k == l) expect = (k == 1) ? tt : cdouble(1.0);
          CHECK(std::abs(t(i, j, k, l) - expect) < 1e-15);
        }
}

TEST_CASE("slice prefactor") {
  ModelParams p;
  p.n_sites = 8;
  p.lambda = 0.2;
  p.dt = 0.01;
  const cdouble pf = teo_prefactor(p);
  const cdouble ref = std::pow(std::cos(0.002), 8.0) *
                      std::exp(cdouble(0.0, 0.08));
  CHECK(std::abs(pf - ref) < 1e-15);
  CHECK(std::abs(pf) <= 1.0 + 1e-15);

  // Magnitude never exceeds one in real time.
  for (double lam : {0.0, 0.5, 1.0, 2.0})
    for (double dt : {0.005, 0.01, 0.05}) {
      ModelParams q;
      q.n_sites = 16;
      q.lambda = lam;
      q.dt = dt;
      CHECK(std::abs(teo_prefactor(q)) <= 1.0 + 1e-15);
    }
}

TEST_CASE("imaginary-time couplings are real and match the dtau relations") {
  ModelParams p;
  p.lambda = 0.2;
  p.dt = 0.1;
  p.mode = TimeMode::imaginary_time;
  p.allow_large_dt = true;
  ClassicalCouplings c = quantum_to_classical(p);

  CHECK(c.beta_s.imag() == 0.0);
  CHECK(std::abs(c.beta_tau.imag()) < 1e-15);
  CHECK(c.beta_s.real() == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(std::tanh(c.beta_tau).real() ==
        doctest::Approx(std::exp(-0.2)).epsilon(1e-14));

  ClassicalCouplings c2 = couplings_from_dtau(0.2, cdouble(0.1, 0.0));
  CHECK(std::abs(c.beta_s - c2.beta_s) < 1e-15);
  CHECK(std::abs(c.beta_tau - c2.beta_tau) < 1e-15);
}

TEST_CASE("couplings_from_dtau interpolates to the real-time map") {
  // theta = pi/2 reproduces beta_s of the real-time map and a tanh(beta_tau)
  // on the unit circle.
  const double dt = 0.01, lambda = 0.3;
  ClassicalCouplings c =
      couplings_from_dtau(lambda, dt * std::exp(cdouble(0.0, M_PI / 2)));
  CHECK(std::abs(c.beta_s - cdouble(0.0, lambda * dt)) < 1e-15);
  CHECK(std::abs(std::abs(std::tanh(c.beta_tau)) - 1.0) < 1e-12);
  CHECK(std::abs(std::tanh(c.beta_tau) - std::exp(cdouble(0.0, -2.0 * dt))) <
        1e-14);
}

TEST_CASE("parameter validation") {
  ModelParams p;
  p.validate();  // defaults are fine

  ModelParams big = p;
  big.dt = 1.0;
  CHECK_THROWS_AS(big.validate(), std::invalid_argument);
  big.allow_large_dt = true;
  big.validate();

  ModelParams odd = p;
  odd.n_sites = 6;
  CHECK_THROWS_AS(odd.validate(), std::invalid_argument);
  odd.n_sites = 1;
  CHECK_THROWS_AS(odd.validate(), std::invalid_argument);

  ModelParams neg = p;
  neg.lambda = -0.1;
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);

  ModelParams cut = p;
  cut.d_cut = 0;
  CHECK_THROWS_AS(cut.validate(), std::invalid_argument);

  ModelParams zdt = p;
  zdt.dt = 0.0;
  CHECK_THROWS_AS(zdt.validate(), std::invalid_argument);
}

TEST_CASE("fingerprint is stable and injective over the fields") {
  ModelParams p;
  const std::string f = p.fingerprint();
  CHECK(f == p.fingerprint());

  ModelParams q = p;
  q.d_cut = 38;
  CHECK(q.fingerprint() != f);
  q = p;
  q.dt = 0.010000000000000002;  // one ulp-ish away must still differ
  CHECK(q.fingerprint() != f);
  q = p;
  q.q_variant = QVariant::MMdag;
  CHECK(q.fingerprint() != f);
  q = p;
  q.boundary = Boundary::open;
  CHECK(q.fingerprint() != f);
}

TEST_CASE("levels") {
  ModelParams p;
  p.n_sites = 2;
  CHECK(p.levels() == 1);
  p.n_sites = 8;
  CHECK(p.levels() == 3);
  p.n_sites = 32;
  CHECK(p.levels() == 5);
}
