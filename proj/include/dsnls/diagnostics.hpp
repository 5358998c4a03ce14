#pragma once

#include <span>
#include <vector>

#include "dsnls/grid.hpp"
#include "dsnls/integrators.hpp"

namespace dsnls {

/** Per-step functionals of one trajectory. */
struct DiagnosticsSeries {
  std::vector<double> times;
  std::vector<double> charge;
  std::vector<double> charge_residual;
  std::vector<double> energy_grad;      // 0.5 dx sum |delta_x u|^2
  std::vector<double> energy_quartic;   // 0.25 dx sum |A_x u|^4
  std::vector<double> energy_noise_cum; // cumulative noise term of the recursion
  std::vector<double> two_form;
  std::vector<double> amplitude;
  std::vector<double> phase;
};

/// dx * sum_j |(u_{j+1} + u_j)/2|^2 over cells j = 0..J-1.
double discrete_charge(const ComplexGridState& u, const GridSpec& grid);

/// Periodic variant (cells wrap around).
double discrete_charge_periodic(const ComplexGridState& u, const GridSpec& grid);

/// 2 alpha dt - log(Q_curr / Q_next); zero for an exact conformal step.
double charge_residual(double q_curr, double q_next, double alpha, double dt);

/// Exact plane wave value at time t given the Brownian value W(t).
Complex plane_wave_exact(double t, double w_t, Complex amplitude, const NlsParameters& params);

/** (spatial-mean |u_j| - |exact|, spatial-mean unwrapped arg(u_j) - arg(exact)),
 * with the phase difference folded into (-pi, pi]. */
std::pair<double, double> amplitude_phase_error(const ComplexGridState& u, Complex exact);

/// Spatial mean of |u_j| and of the spatially unwrapped arg(u_j).
std::pair<double, double> mean_amplitude_phase(const ComplexGridState& u);

/// Folds an angle into (-pi, pi].
double wrap_angle(double x);

/// (dx * sum_j |u_j - v_j|^2)^{1/2} over all nodes.
double discrete_l2_error(const ComplexGridState& u, const ComplexGridState& v,
                         const GridSpec& grid);

/** |LHS - RHS| of the discrete energy recursion for one conformal step
 * (u_curr, u_next) driven by noise_dw, with the noise sum taken inside. */
double energy_recursion_check(const ComplexGridState& u_curr, const ComplexGridState& u_next,
                              const NlsParameters& params, std::span<const double> noise_dw,
                              const GridSpec& grid);

}  // namespace dsnls
