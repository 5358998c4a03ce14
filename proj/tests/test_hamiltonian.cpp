#include <doctest.h>

#include <cmath>
#include <random>

#include "dsnls/hamiltonian.hpp"

using dsnls::HamiltonianSystemSpec;
using dsnls::kdv_system;
using dsnls::nls_system;
using dsnls::NlsParameters;

namespace {

Eigen::Vector4d random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  Eigen::Vector4d z;
  for (int i = 0; i < 4; ++i) z[i] = u(rng);
  return z;
}

// Central differences of the scalar potentials / gradients.
void check_derivatives(const HamiltonianSystemSpec& sys, const Eigen::Vector4d& z, double t) {
  const double h = 1e-6;
  const Eigen::VectorXd g1 = sys.grad_S1(z, t);
  const Eigen::VectorXd g2 = sys.grad_S2(z);
  const Eigen::MatrixXd h1 = sys.hess_S1(z, t);
  const Eigen::MatrixXd h2 = sys.hess_S2(z);
  CHECK((h1 - h1.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((h2 - h2.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector4d zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    const double fd1 = (sys.S1(zp, t) - sys.S1(zm, t)) / (2.0 * h);
    const double fd2 = (sys.S2(zp) - sys.S2(zm)) / (2.0 * h);
    CHECK(std::abs(fd1 - g1[i]) < 1e-6 * (1.0 + std::abs(g1[i])));
    CHECK(std::abs(fd2 - g2[i]) < 1e-6 * (1.0 + std::abs(g2[i])));
    const Eigen::VectorXd hfd1 = (sys.grad_S1(zp, t) - sys.grad_S1(zm, t)) / (2.0 * h);
    const Eigen::VectorXd hfd2 = (sys.grad_S2(zp) - sys.grad_S2(zm)) / (2.0 * h);
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(hfd1[k] - h1(k, i)) < 1e-5 * (1.0 + std::abs(h1(k, i))));
      CHECK(std::abs(hfd2[k] - h2(k, i)) < 1e-5 * (1.0 + std::abs(h2(k, i))));
    }
  }
}

}  // namespace

TEST_CASE("NLS structure matrices") {
  const NlsParameters params{0.1, std::sqrt(2.0)};
  const HamiltonianSystemSpec sys = nls_system(params);
  sys.validate();

  CHECK((sys.M + sys.M.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sys.K + sys.K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sys.a == doctest::Approx(0.2));
  CHECK(sys.b == 0.0);

  const Eigen::MatrixXd d = sys.damping();
  CHECK((d - (-0.5 * sys.a * sys.M - 0.5 * sys.b * sys.K)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d(0, 1) == doctest::Approx(0.1));
  CHECK((d + d.transpose()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("NLS potentials") {
  const NlsParameters params{0.1, std::sqrt(2.0)};
  const HamiltonianSystemSpec sys = nls_system(params);

  Eigen::Vector4d z;
  z << 1.0, 0.0, 0.0, 0.0;
  const Eigen::VectorXd g2 = sys.grad_S2(z);
  CHECK(g2[0] == doctest::Approx(-std::sqrt(2.0)));
  CHECK(g2[1] == 0.0);
  CHECK(g2[2] == 0.0);
  CHECK(g2[3] == 0.0);

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Vector4d p = random_point(rng);
    const Eigen::VectorXd g = sys.grad_S2(p);
    CHECK(g[0] == doctest::Approx(-params.epsilon * p[0]));
    CHECK(g[1] == doctest::Approx(-params.epsilon * p[1]));
    CHECK(g[2] == 0.0);
    CHECK(g[3] == 0.0);
    check_derivatives(sys, p, 0.37 * rep);
  }
}

TEST_CASE("KdV structure") {
  const double alpha = 0.3, gamma = 0.8;
  const HamiltonianSystemSpec sys = kdv_system(alpha, gamma);
  sys.validate();

  CHECK(sys.M(0, 1) == doctest::Approx(0.5));
  CHECK(sys.K(0, 3) == doctest::Approx(1.0));
  CHECK((sys.M + sys.M.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sys.K + sys.K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sys.damping()(0, 1) == doctest::Approx(0.5 * alpha));

  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Vector4d p = random_point(rng);
    const Eigen::VectorXd g2 = sys.grad_S2(p);
    CHECK(g2[0] == doctest::Approx(gamma));
    CHECK(g2[1] == 0.0);
    CHECK(g2[2] == 0.0);
    CHECK(g2[3] == 0.0);
    CHECK(sys.hess_S2(p).cwiseAbs().maxCoeff() == 0.0);
    check_derivatives(sys, p, 0.0);
  }
}

TEST_CASE("validation rejects broken structures") {
  HamiltonianSystemSpec sys = nls_system(NlsParameters{0.1, 0.5});
  sys.M(0, 0) = 1.0;  // no longer skew-symmetric
  CHECK_THROWS(sys.validate());

  CHECK_THROWS(NlsParameters{-1.0, 0.5}.validate());
  CHECK_THROWS(NlsParameters{0.1, -0.5}.validate());
  NlsParameters det{0.1, 0.0};
  CHECK_NOTHROW(det.validate());
}
