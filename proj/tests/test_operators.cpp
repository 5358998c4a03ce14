#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "dsnls/operators.hpp"

using dsnls::avg_t;
using dsnls::avg_x;
using dsnls::delta_t;
using dsnls::delta_x;
using Complex = std::complex<double>;

namespace {

std::vector<double> random_array(std::mt19937_64& rng, size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::vector<Complex> random_complex_array(std::mt19937_64& rng, size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Complex> v(n);
  for (Complex& x : v) x = Complex(u(rng), u(rng));
  return v;
}

}  // namespace

TEST_CASE("delta_t trivial cases") {
  const std::vector<double> z{1.0, -2.0, 0.5};
  const double dt = 0.05;

  for (double x : delta_t(0.0, z, z, dt)) CHECK(x == 0.0);

  const double c = 0.3;
  std::vector<double> scaled = z;
  for (double& x : scaled) x *= std::exp(-c * dt);
  for (double x : delta_t(c, scaled, z, dt)) CHECK(std::abs(x) < 1e-14);
}

TEST_CASE("avg_t trivial cases") {
  const std::vector<double> a{1.0, 3.0}, b{3.0, 5.0};
  const double dt = 0.1;
  const std::vector<double> m = avg_t(0.0, a, b, dt);
  CHECK(m[0] == 2.0);
  CHECK(m[1] == 4.0);

  const double c = 0.7;
  std::vector<double> neg = b;
  for (double& x : neg) x *= -std::exp(-c * dt);
  for (double x : avg_t(c, neg, b, dt)) CHECK(std::abs(x) < 1e-14);
}

TEST_CASE("spatial operators trivial cases") {
  const double dx = 0.25;
  const std::vector<double> constant(6, 3.5);
  for (double x : delta_x(0.0, constant, dx)) CHECK(x == 0.0);
  for (double x : avg_x(0.0, constant, dx)) CHECK(x == 3.5);

  std::vector<double> line(6);
  for (size_t j = 0; j < line.size(); ++j) line[j] = j * dx;
  for (double x : delta_x(0.0, line, dx)) CHECK(x == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("operators match the scalar formula on random data") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> cdist(-2.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    const size_t n = 2 + rep % 17;
    const double c = cdist(rng), dt = 0.03, dx = 0.2;
    const auto zn = random_complex_array(rng, n);
    const auto z1 = random_complex_array(rng, n);

    const auto dt_out = delta_t(c, z1, zn, dt);
    const auto at_out = avg_t(c, z1, zn, dt);
    const auto dx_out = delta_x(c, zn, dx);
    const auto ax_out = avg_x(c, zn, dx);
    for (size_t i = 0; i < n; ++i) {
      CHECK(std::abs(dt_out[i] - (z1[i] - std::exp(-c * dt) * zn[i]) / dt) < 1e-13);
      CHECK(std::abs(at_out[i] - (z1[i] + std::exp(-c * dt) * zn[i]) * 0.5) < 1e-14);
      if (i + 1 < n) {
        CHECK(std::abs(dx_out[i] - (zn[i + 1] - std::exp(-c * dx) * zn[i]) / dx) < 1e-13);
        CHECK(std::abs(ax_out[i] - (zn[i + 1] + std::exp(-c * dx) * zn[i]) * 0.5) < 1e-14);
      }
    }
  }
}

TEST_CASE("commutation of temporal and spatial operators") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> cdist(-2.0, 2.0);
  const double dt = 0.04, dx = 0.15;
  for (int rep = 0; rep < 100; ++rep) {
    const size_t n = 4 + rep % 29;
    const double c1 = cdist(rng), c2 = cdist(rng);
    const auto zn = random_complex_array(rng, n);
    const auto z1 = random_complex_array(rng, n);

    auto check_pair = [&](const std::vector<Complex>& a, const std::vector<Complex>& b) {
      REQUIRE(a.size() == b.size());
      for (size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - b[i]) < 1e-13 * (1.0 + std::abs(a[i])));
    };
    check_pair(delta_x(c2, delta_t(c1, z1, zn, dt), dx),
               delta_t(c1, delta_x(c2, z1, dx), delta_x(c2, zn, dx), dt));
    check_pair(avg_x(c2, delta_t(c1, z1, zn, dt), dx),
               delta_t(c1, avg_x(c2, z1, dx), avg_x(c2, zn, dx), dt));
    check_pair(delta_x(c2, avg_t(c1, z1, zn, dt), dx),
               avg_t(c1, delta_x(c2, z1, dx), delta_x(c2, zn, dx), dt));
    check_pair(avg_x(c2, avg_t(c1, z1, zn, dt), dx),
               avg_t(c1, avg_x(c2, z1, dx), avg_x(c2, zn, dx), dt));
  }
}

TEST_CASE("discrete product rule with exponent halving") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> cdist(-2.0, 2.0);
  const double dt = 0.04, dx = 0.15;
  for (int rep = 0; rep < 100; ++rep) {
    const size_t n = 4 + rep % 21;
    const double c = cdist(rng);
    const auto pn = random_array(rng, n), p1 = random_array(rng, n);
    const auto qn = random_array(rng, n), q1 = random_array(rng, n);

    // Temporal: delta^c(phi*psi) = <delta^{c/2}phi, A^{c/2}psi> + <A^{c/2}phi, delta^{c/2}psi>.
    std::vector<double> prod_n(n), prod_1(n);
    for (size_t i = 0; i < n; ++i) {
      prod_n[i] = pn[i] * qn[i];
      prod_1[i] = p1[i] * q1[i];
    }
    const auto lhs_t = delta_t(c, prod_1, prod_n, dt);
    const auto dp = delta_t(0.5 * c, p1, pn, dt);
    const auto ap = avg_t(0.5 * c, p1, pn, dt);
    const auto dq = delta_t(0.5 * c, q1, qn, dt);
    const auto aq = avg_t(0.5 * c, q1, qn, dt);
    for (size_t i = 0; i < n; ++i)
      CHECK(std::abs(lhs_t[i] - (dp[i] * aq[i] + ap[i] * dq[i])) < 1e-13);

    // Spatial direction, same halving.
    const auto lhs_x = delta_x(c, prod_n, dx);
    const auto dxp = delta_x(0.5 * c, pn, dx);
    const auto axp = avg_x(0.5 * c, pn, dx);
    const auto dxq = delta_x(0.5 * c, qn, dx);
    const auto axq = avg_x(0.5 * c, qn, dx);
    for (size_t i = 0; i + 1 < n; ++i)
      CHECK(std::abs(lhs_x[i] - (dxp[i] * axq[i] + axp[i] * dxq[i])) < 1e-13);
  }
}

TEST_CASE("c = 0 reduces to the classical stencils bit-for-bit") {
  std::mt19937_64 rng(17);
  const auto zn = random_array(rng, 12);
  const auto z1 = random_array(rng, 12);
  const double dt = 0.07, dx = 0.3;
  const auto d = delta_t(0.0, z1, zn, dt);
  const auto a = avg_t(0.0, z1, zn, dt);
  const auto s = delta_x(0.0, zn, dx);
  for (size_t i = 0; i < zn.size(); ++i) {
    CHECK(d[i] == (z1[i] - zn[i]) * (1.0 / dt));
    CHECK(a[i] == (z1[i] + zn[i]) * 0.5);
    if (i + 1 < zn.size()) CHECK(s[i] == (zn[i + 1] - zn[i]) * (1.0 / dx));
  }
}

TEST_CASE("structural errors") {
  const std::vector<double> a(4, 1.0), b(5, 1.0), tiny(1, 1.0);
  CHECK_THROWS_AS((void)delta_t(0.1, a, b, 0.1), std::invalid_argument);
  CHECK_THROWS_AS((void)avg_t(0.1, a, b, 0.1), std::invalid_argument);
  CHECK_THROWS_AS((void)delta_x(0.1, tiny, 0.1), std::invalid_argument);
  CHECK_THROWS_AS((void)avg_x(0.1, tiny, 0.1), std::invalid_argument);
}
