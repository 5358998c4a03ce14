#include "dsnls/noise.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace dsnls {

void NoiseModel::validate() const {
  if (kind == NoiseKind::SpectralTruncated) {
    if (truncation_m < 1) throw std::invalid_argument("NoiseModel: truncation_m must be >= 1");
    if (!eta.empty() && static_cast<int>(eta.size()) < truncation_m)
      throw std::invalid_argument("NoiseModel: eta shorter than truncation_m");
  }
  if (!(x_right > x_left)) throw std::invalid_argument("NoiseModel: empty domain");
}

double basis_e(int m, double x, double x_left, double x_right) {
  if (m < 1) throw std::invalid_argument("basis_e: m must be >= 1");
  const double len = x_right - x_left;
  return std::sqrt(2.0 / len) * std::sin(m * std::numbers::pi * (x - x_left) / len);
}

double f_phi(const NoiseModel& model, double x) {
  model.validate();
  if (model.kind == NoiseKind::Scalar) return 1.0;
  double sum = 0.0;
  for (int m = 1; m <= model.truncation_m; ++m) {
    const double e = basis_e(m, x, model.x_left, model.x_right);
    sum += model.eta_m(m) * e * e;
  }
  return sum;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double to_unit(std::uint64_t bits) {
  // (0, 1], avoids log(0) in Box-Muller.
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1p-53;
}

}  // namespace

double gaussian_at(std::uint64_t seed, std::uint64_t trajectory, std::uint64_t mode,
                   std::uint64_t step) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ trajectory);
  key = splitmix64(key ^ mode);
  key = splitmix64(key ^ step);
  const double u1 = to_unit(key);
  const double u2 = to_unit(splitmix64(key ^ 0xda942042e4dd58b5ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

NoisePath sample_path(const NoiseModel& model, const GridSpec& grid, int n_steps) {
  model.validate();
  grid.validate();
  if (n_steps < 1) throw std::invalid_argument("sample_path: n_steps must be >= 1");

  NoisePath path;
  path.n_steps = n_steps;
  path.n_nodes = grid.n_nodes();
  path.dt = grid.dt;
  path.resolution_level = 0;
  path.dw.assign(static_cast<size_t>(n_steps) * path.n_nodes, 0.0);

  const double root_dt = std::sqrt(grid.dt);
  if (model.kind == NoiseKind::Scalar) {
    for (int n = 0; n < n_steps; ++n) {
      const double g = root_dt * gaussian_at(model.seed, model.trajectory_index, 0, n);
      for (int j = 0; j < path.n_nodes; ++j) path.dw[static_cast<size_t>(n) * path.n_nodes + j] = g;
    }
    return path;
  }

  // Spatial profiles sqrt(eta_m) e_m(x_j), evaluated once.
  std::vector<double> profile(static_cast<size_t>(model.truncation_m) * path.n_nodes);
  for (int m = 1; m <= model.truncation_m; ++m) {
    const double amp = std::sqrt(model.eta_m(m));
    for (int j = 0; j < path.n_nodes; ++j)
      profile[static_cast<size_t>(m - 1) * path.n_nodes + j] =
          amp * basis_e(m, grid.node(j), model.x_left, model.x_right);
  }
  for (int n = 0; n < n_steps; ++n) {
    double* row = path.dw.data() + static_cast<size_t>(n) * path.n_nodes;
    for (int m = 1; m <= model.truncation_m; ++m) {
      const double g = root_dt * gaussian_at(model.seed, model.trajectory_index, m, n);
      const double* pm = profile.data() + static_cast<size_t>(m - 1) * path.n_nodes;
      for (int j = 0; j < path.n_nodes; ++j) row[j] += g * pm[j];
    }
  }
  return path;
}

NoisePath refine_or_coarsen(const NoisePath& path, int level_delta) {
  if (level_delta == 0) return path;
  if (level_delta > 0)
    throw std::invalid_argument("refine_or_coarsen: refinement not supported, coarsening only");
  const int factor = 1 << (-level_delta);
  if (path.n_steps % factor != 0)
    throw std::invalid_argument("refine_or_coarsen: step count not divisible by 2^k");

  // Repeated pairwise halving, so that any coarsening route between two
  // levels produces bit-identical sums.
  NoisePath out = path;
  for (int level = 0; level < -level_delta; ++level) {
    NoisePath half;
    half.n_steps = out.n_steps / 2;
    half.n_nodes = out.n_nodes;
    half.dt = out.dt * 2.0;
    half.resolution_level = out.resolution_level - 1;
    half.dw.resize(static_cast<size_t>(half.n_steps) * half.n_nodes);
    for (int n = 0; n < half.n_steps; ++n) {
      const double* a = out.dw.data() + static_cast<size_t>(2 * n) * out.n_nodes;
      const double* b = out.dw.data() + static_cast<size_t>(2 * n + 1) * out.n_nodes;
      double* row = half.dw.data() + static_cast<size_t>(n) * half.n_nodes;
      for (int j = 0; j < half.n_nodes; ++j) row[j] = a[j] + b[j];
    }
    out = std::move(half);
  }
  return out;
}

void dump_path_csv(const NoisePath& path, const std::string& filename) {
  std::FILE* f = std::fopen(filename.c_str(), "w");
  if (!f) throw std::runtime_error("dump_path_csv: cannot open " + filename);
  std::fprintf(f, "n,j,dW\n");
  for (int n = 0; n < path.n_steps; ++n)
    for (int j = 0; j < path.n_nodes; ++j)
      std::fprintf(f, "%d,%d,%.17g\n", n, j, path.increment(n, j));
  std::fclose(f);
}

NoisePath load_path_csv(const std::string& filename) {
  std::FILE* f = std::fopen(filename.c_str(), "r");
  if (!f) throw std::runtime_error("load_path_csv: cannot open " + filename);
  char header[256];
  if (!std::fgets(header, sizeof header, f)) {
    std::fclose(f);
    throw std::runtime_error("load_path_csv: empty file");
  }
  std::vector<double> values;
  int n = 0, j = 0, max_n = -1, max_j = -1;
  double w = 0.0;
  std::vector<std::tuple<int, int, double>> rows;
  while (std::fscanf(f, "%d,%d,%lg", &n, &j, &w) == 3) {
    rows.emplace_back(n, j, w);
    if (n > max_n) max_n = n;
    if (j > max_j) max_j = j;
  }
  std::fclose(f);
  if (max_n < 0) throw std::runtime_error("load_path_csv: no data rows");

  NoisePath path;
  path.n_steps = max_n + 1;
  path.n_nodes = max_j + 1;
  path.dw.assign(static_cast<size_t>(path.n_steps) * path.n_nodes, 0.0);
  for (auto& [rn, rj, rw] : rows) path.dw[static_cast<size_t>(rn) * path.n_nodes + rj] = rw;
  return path;
}

}  // namespace dsnls
