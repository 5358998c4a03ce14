#pragma once

#include <cmath>
#include <stdexcept>

namespace dsnls {

/** Uniform space-time mesh on [x_left, x_right] with J = floor((x_right-x_left)/dx)
 * cells, nodes x_j = x_left + j*dx for j = 0..J. */
struct GridSpec {
  double x_left = 0.0;
  double x_right = 1.0;
  double dx = 0.1;
  double dt = 0.01;

  int n_interior() const { return static_cast<int>(std::floor((x_right - x_left) / dx + 1e-12)); }
  int n_nodes() const { return n_interior() + 1; }
  double node(int j) const { return x_left + j * dx; }

  void validate() const {
    if (!(x_right > x_left)) throw std::invalid_argument("GridSpec: x_right must exceed x_left");
    if (!(dx > 0.0) || dx > (x_right - x_left)) throw std::invalid_argument("GridSpec: bad dx");
    if (!(dt > 0.0)) throw std::invalid_argument("GridSpec: bad dt");
  }
};

}  // namespace dsnls
