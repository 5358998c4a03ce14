#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsnls/grid.hpp"

namespace dsnls {

enum class NoiseKind { Scalar, SpectralTruncated };

/** Description of the driving Wiener process. Scalar: one standard Brownian
 * motion shared by all spatial nodes. SpectralTruncated: the eta_m-weighted
 * sine-mode expansion truncated at truncation_m modes. */
struct NoiseModel {
  NoiseKind kind = NoiseKind::SpectralTruncated;
  int truncation_m = 8;
  std::vector<double> eta;  // empty means all ones
  double x_left = 0.0;
  double x_right = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t trajectory_index = 0;

  double eta_m(int m) const {  // m is 1-based
    return eta.empty() ? 1.0 : eta[static_cast<size_t>(m - 1)];
  }
  void validate() const;
};

/** Precomputed Wiener increments dW_j^n, row-major over (step n, node j). */
struct NoisePath {
  int n_steps = 0;
  int n_nodes = 0;
  double dt = 0.0;
  int resolution_level = 0;
  std::vector<double> dw;

  double increment(int n, int j) const {
    return dw[static_cast<size_t>(n) * n_nodes + j];
  }
  const double* step_slice(int n) const { return dw.data() + static_cast<size_t>(n) * n_nodes; }
};

/// Orthonormal sine basis e_m(x) on (x_left, x_right), m >= 1.
double basis_e(int m, double x, double x_left, double x_right);

/// Truncated spatial variance density sum_{m<=M} eta_m e_m(x)^2.
double f_phi(const NoiseModel& model, double x);

/** Deterministic standard normal draw for a counter (seed, trajectory, mode,
 * step). Same counter always yields the same variate. */
double gaussian_at(std::uint64_t seed, std::uint64_t trajectory, std::uint64_t mode,
                   std::uint64_t step);

/** Samples the increment table for n_steps steps of size grid.dt on the nodes
 * of grid. Identical (seed, trajectory_index) gives a bit-identical path. */
NoisePath sample_path(const NoiseModel& model, const GridSpec& grid, int n_steps);

/** Dyadic coarsening: level_delta < 0 merges 2^{-level_delta} consecutive
 * increments by exact summation. Refinement is not supported. */
NoisePath refine_or_coarsen(const NoisePath& path, int level_delta);

void dump_path_csv(const NoisePath& path, const std::string& filename);
NoisePath load_path_csv(const std::string& filename);

}  // namespace dsnls
