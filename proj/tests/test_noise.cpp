#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "dsnls/noise.hpp"

using dsnls::basis_e;
using dsnls::f_phi;
using dsnls::gaussian_at;
using dsnls::GridSpec;
using dsnls::NoiseKind;
using dsnls::NoiseModel;
using dsnls::NoisePath;
using dsnls::refine_or_coarsen;
using dsnls::sample_path;

namespace {

NoiseModel spectral_model(int m, double xl, double xr, std::uint64_t seed, std::uint64_t traj) {
  NoiseModel model;
  model.kind = NoiseKind::SpectralTruncated;
  model.truncation_m = m;
  model.x_left = xl;
  model.x_right = xr;
  model.seed = seed;
  model.trajectory_index = traj;
  return model;
}

}  // namespace

TEST_CASE("sine basis closed forms") {
  for (int m = 1; m <= 8; ++m) CHECK(basis_e(m, 0.0, 0.0, 2.0) == doctest::Approx(0.0));
  CHECK(basis_e(1, 1.0, 0.0, 2.0) == doctest::Approx(1.0));
  CHECK_THROWS((void)basis_e(0, 0.5, 0.0, 2.0));
}

TEST_CASE("sine basis orthonormality by quadrature") {
  const double xl = -1.0, xr = 3.0;
  const int n = 4000;
  const double dx = (xr - xl) / n;
  for (int m = 1; m <= 4; ++m) {
    for (int mp = m; mp <= 4; ++mp) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        const double x = xl + (j + 0.5) * dx;
        s += basis_e(m, x, xl, xr) * basis_e(mp, x, xl, xr);
      }
      s *= dx;
      CHECK(std::abs(s - (m == mp ? 1.0 : 0.0)) < 1e-5);
    }
  }
}

TEST_CASE("f_phi values") {
  const NoiseModel m1 = spectral_model(1, 0.0, 2.0, 1, 0);
  CHECK(f_phi(m1, 0.0) == doctest::Approx(0.0));
  CHECK(f_phi(m1, 1.0) == doctest::Approx(1.0));

  const NoiseModel m5 = spectral_model(5, -1.0, 2.5, 1, 0);
  for (double x : {-0.7, 0.1, 1.3, 2.2}) {
    double direct = 0.0;
    for (int m = 1; m <= 5; ++m) {
      const double e = basis_e(m, x, -1.0, 2.5);
      direct += e * e;
    }
    CHECK(f_phi(m5, x) == doctest::Approx(direct).epsilon(1e-13));
  }
}

TEST_CASE("scalar increments are space independent and have variance dt") {
  GridSpec grid{0.0, 1.0, 0.25, 0.01};
  NoiseModel model;
  model.kind = NoiseKind::Scalar;
  model.x_left = 0.0;
  model.x_right = 1.0;
  model.seed = 42;

  const int n_steps = 20000;
  const NoisePath path = sample_path(model, grid, n_steps);
  double sum = 0.0, sq = 0.0;
  for (int n = 0; n < n_steps; ++n) {
    for (int j = 1; j < path.n_nodes; ++j) CHECK(path.increment(n, j) == path.increment(n, 0));
    const double w = path.increment(n, 0);
    sum += w;
    sq += w * w;
  }
  const double mean = sum / n_steps;
  const double var = sq / n_steps - mean * mean;
  CHECK(var > grid.dt * 0.95);
  CHECK(var < grid.dt * 1.05);
}

TEST_CASE("spectral increment variance matches dt * F_phi(x)") {
  GridSpec grid{0.0, 1.0, 0.125, 0.02};
  const int n_steps = 20000;
  const NoiseModel model = spectral_model(4, 0.0, 1.0, 9, 0);
  const NoisePath path = sample_path(model, grid, n_steps);

  for (int j = 1; j < path.n_nodes - 1; ++j) {
    double sum = 0.0, sq = 0.0;
    for (int n = 0; n < n_steps; ++n) {
      const double w = path.increment(n, j);
      sum += w;
      sq += w * w;
    }
    const double mean = sum / n_steps;
    const double var = sq / n_steps - mean * mean;
    const double expect = grid.dt * f_phi(model, grid.node(j));
    CHECK(std::abs(var - expect) < 0.1 * expect + 1e-6);
  }
}

TEST_CASE("reproducibility and independence across trajectories") {
  GridSpec grid{-1.0, 1.0, 0.5, 0.01};
  const NoiseModel a = spectral_model(3, -1.0, 1.0, 77, 4);
  const NoisePath p1 = sample_path(a, grid, 50);
  const NoisePath p2 = sample_path(a, grid, 50);
  CHECK(p1.dw == p2.dw);

  CHECK(gaussian_at(1, 2, 3, 4) == gaussian_at(1, 2, 3, 4));
  CHECK(gaussian_at(1, 2, 3, 4) != gaussian_at(1, 2, 3, 5));

  const int n = 10000;
  GridSpec fine{-1.0, 1.0, 1.0, 0.01};
  const NoisePath t0 = sample_path(spectral_model(3, -1.0, 1.0, 77, 0), fine, n);
  const NoisePath t1 = sample_path(spectral_model(3, -1.0, 1.0, 77, 1), fine, n);
  double s0 = 0.0, s1 = 0.0, s00 = 0.0, s11 = 0.0, s01 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = t0.increment(k, 1), y = t1.increment(k, 1);
    s0 += x;
    s1 += y;
    s00 += x * x;
    s11 += y * y;
    s01 += x * y;
  }
  const double corr = (s01 / n - s0 * s1 / (static_cast<double>(n) * n)) /
                      std::sqrt((s00 / n - s0 * s0 / (static_cast<double>(n) * n)) *
                                (s11 / n - s1 * s1 / (static_cast<double>(n) * n)));
  CHECK(std::abs(corr) < 0.05);
}

TEST_CASE("coarsening is exact pairwise summation") {
  GridSpec grid{0.0, 2.0, 0.5, 0.005};
  const NoiseModel model = spectral_model(3, 0.0, 2.0, 5, 2);
  const NoisePath fine = sample_path(model, grid, 64);

  const NoisePath half = refine_or_coarsen(fine, -1);
  CHECK(half.n_steps == 32);
  CHECK(half.dt == doctest::Approx(2.0 * fine.dt));
  for (int n = 0; n < half.n_steps; ++n)
    for (int j = 0; j < half.n_nodes; ++j)
      CHECK(half.increment(n, j) == fine.increment(2 * n, j) + fine.increment(2 * n + 1, j));

  const NoisePath quarter = refine_or_coarsen(fine, -2);
  const NoisePath quarter_via_half = refine_or_coarsen(half, -1);
  CHECK(quarter.dw == quarter_via_half.dw);

  CHECK_THROWS((void)refine_or_coarsen(fine, 1));  // refinement unsupported

  NoiseModel scalar;
  scalar.kind = NoiseKind::Scalar;
  scalar.seed = 5;
  const NoisePath sc = refine_or_coarsen(sample_path(scalar, grid, 16), -2);
  for (int n = 0; n < sc.n_steps; ++n)
    for (int j = 1; j < sc.n_nodes; ++j) CHECK(sc.increment(n, j) == sc.increment(n, 0));
}

TEST_CASE("coarse increments follow the 2^k dt law") {
  GridSpec grid{0.0, 1.0, 1.0, 0.001};
  NoiseModel scalar;
  scalar.kind = NoiseKind::Scalar;
  scalar.seed = 31;
  const NoisePath fine = sample_path(scalar, grid, 40000);
  const NoisePath coarse = refine_or_coarsen(fine, -3);  // dt' = 8 dt
  double sum = 0.0, sq = 0.0;
  for (int n = 0; n < coarse.n_steps; ++n) {
    const double w = coarse.increment(n, 0);
    sum += w;
    sq += w * w;
  }
  const double mean = sum / coarse.n_steps;
  const double var = sq / coarse.n_steps - mean * mean;
  CHECK(std::abs(var - 8.0 * grid.dt) < 0.08 * 8.0 * grid.dt);
}

TEST_CASE("path dump/load round trip") {
  GridSpec grid{0.0, 1.0, 0.25, 0.01};
  const NoisePath path = sample_path(spectral_model(2, 0.0, 1.0, 13, 1), grid, 7);
  const std::string file = "noise_roundtrip_test.csv";
  dsnls::dump_path_csv(path, file);
  const NoisePath back = dsnls::load_path_csv(file);
  std::remove(file.c_str());
  CHECK(back.n_steps == path.n_steps);
  CHECK(back.n_nodes == path.n_nodes);
  CHECK(back.dw == path.dw);
}

TEST_CASE("model validation") {
  NoiseModel bad = spectral_model(0, 0.0, 1.0, 1, 0);
  CHECK_THROWS(bad.validate());
  GridSpec grid{0.0, 1.0, 0.5, 0.01};
  CHECK_THROWS((void)sample_path(spectral_model(2, 0.0, 1.0, 1, 0), grid, 0));
}
