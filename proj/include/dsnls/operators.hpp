#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dsnls {

// Conformal difference and averaging stencils. The temporal forms act on a
// pair of time levels; the spatial forms act along one level with a forward
// stencil (j, j+1), so the output is one entry shorter than the input.
// The exponential weight exp(-c*h) is evaluated once per call.

namespace detail {
inline void check_same_length(size_t a, size_t b) {
  if (a != b) throw std::invalid_argument("conformal operator: array length mismatch");
}
inline void check_spatial(size_t n) {
  if (n < 2) throw std::invalid_argument("conformal operator: need at least 2 nodes");
}
}  // namespace detail

/// (z^{n+1} - e^{-c dt} z^n) / dt, elementwise.
template <class T>
std::vector<T> delta_t(double c, const std::vector<T>& z_next, const std::vector<T>& z_curr,
                       double dt) {
  detail::check_same_length(z_next.size(), z_curr.size());
  const double w = std::exp(-c * dt);
  std::vector<T> out(z_next.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = (z_next[i] - w * z_curr[i]) * (1.0 / dt);
  return out;
}

/// (z^{n+1} + e^{-c dt} z^n) / 2, elementwise.
template <class T>
std::vector<T> avg_t(double c, const std::vector<T>& z_next, const std::vector<T>& z_curr,
                     double dt) {
  detail::check_same_length(z_next.size(), z_curr.size());
  const double w = std::exp(-c * dt);
  std::vector<T> out(z_next.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = (z_next[i] + w * z_curr[i]) * 0.5;
  return out;
}

/// (z_{j+1} - e^{-c dx} z_j) / dx for j = 0..J-1.
template <class T>
std::vector<T> delta_x(double c, const std::vector<T>& z, double dx) {
  detail::check_spatial(z.size());
  const double w = std::exp(-c * dx);
  std::vector<T> out(z.size() - 1);
  for (size_t j = 0; j + 1 < z.size(); ++j) out[j] = (z[j + 1] - w * z[j]) * (1.0 / dx);
  return out;
}

/// (z_{j+1} + e^{-c dx} z_j) / 2 for j = 0..J-1.
template <class T>
std::vector<T> avg_x(double c, const std::vector<T>& z, double dx) {
  detail::check_spatial(z.size());
  const double w = std::exp(-c * dx);
  std::vector<T> out(z.size() - 1);
  for (size_t j = 0; j + 1 < z.size(); ++j) out[j] = (z[j + 1] + w * z[j]) * 0.5;
  return out;
}

}  // namespace dsnls
