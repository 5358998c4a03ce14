#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsnls/grid.hpp"
#include "dsnls/hamiltonian.hpp"

namespace dsnls {

using Complex = std::complex<double>;

struct StepConfig {
  double fixed_point_tol = 1e-13;
  int max_iterations = 200;
  double theta = 1.0;  // time-centering parameter of the transformed scheme
};

enum class BoundaryKind { Dirichlet, Periodic };

/** One time level of the complex field on nodes j = 0..J. Dirichlet runs keep
 * u[0] = u[J] = 0; periodic runs identify node J with node 0 and only use
 * nodes 0..J-1. */
struct ComplexGridState {
  std::vector<Complex> u;
  double time = 0.0;
};

/** One time level of the 4-component real state z_j = (p, q, v, w). */
struct RealGridState4 {
  std::vector<Eigen::Vector4d> z;
  double time = 0.0;
};

/** A pair of perturbations evolved by the variational equation of the generic
 * scheme, sharing the base trajectory and noise. */
struct TangentPair {
  std::vector<Eigen::Vector4d> U;
  std::vector<Eigen::Vector4d> V;
};

/// Thrown when an implicit solve does not reach fixed_point_tol.
struct StepFailure : std::runtime_error {
  StepFailure(const std::string& what, double residual_, int iterations_)
      : std::runtime_error(what), residual(residual_), iterations(iterations_) {}
  double residual;
  int iterations;
};

/** Conformal multi-symplectic step for the damped stochastic NLS field u.
 * noise_dw holds the Wiener increments dW_j^n for this step (per node). */
ComplexGridState cms_step_nls(const ComplexGridState& u, const NlsParameters& params,
                              std::span<const double> noise_dw, const GridSpec& grid,
                              const StepConfig& cfg,
                              BoundaryKind boundary = BoundaryKind::Dirichlet);

/** Multi-symplectic step for the transformed variable varpi = e^{alpha t} u,
 * with time-centering parameter cfg.theta. */
ComplexGridState ms_step_transformed(const ComplexGridState& w, const NlsParameters& params,
                                     std::span<const double> noise_dw, const GridSpec& grid,
                                     const StepConfig& cfg);

/// Crank-Nicolson comparator step (non-conformal).
ComplexGridState cn_step(const ComplexGridState& u, const NlsParameters& params,
                         std::span<const double> noise_dw, const GridSpec& grid,
                         const StepConfig& cfg);

/** Generic conformal multi-symplectic step for a 4-component damped stochastic
 * Hamiltonian PDE. Solves the stacked nonlinear system over all nodes with a
 * banded Newton iteration; residual is the max-norm scheme defect. */
RealGridState4 cms_step_generic(const HamiltonianSystemSpec& system, const RealGridState4& z,
                                std::span<const double> noise_dw, const GridSpec& grid,
                                const StepConfig& cfg);

/** Advances a tangent pair through the variational equation frozen at the
 * already-computed base pair (z_curr, z_next) and the same noise. */
TangentPair tangent_step(const HamiltonianSystemSpec& system, const RealGridState4& z_curr,
                         const RealGridState4& z_next, const TangentPair& tangents,
                         std::span<const double> noise_dw, const GridSpec& grid,
                         const StepConfig& cfg);

/** Discrete conformal 2-form defect
 *   delta_t^a <M A_x U, A_x V> + delta_x^b <K A_t U, A_t V>
 * at every cell j = 0..J-1 for one step of a tangent pair. */
std::vector<double> two_form_defect(const HamiltonianSystemSpec& system,
                                    const TangentPair& tan_curr, const TangentPair& tan_next,
                                    const GridSpec& grid);

/// Maps u = p + i q plus supplied (v, w) profiles onto the 4-component state.
RealGridState4 pack_state4(const ComplexGridState& u, const std::vector<Complex>& w_aux);

/// Extracts p + i q from the 4-component state.
ComplexGridState unpack_state4(const RealGridState4& z);

}  // namespace dsnls
