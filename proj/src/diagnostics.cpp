#include "dsnls/diagnostics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dsnls {

double discrete_charge(const ComplexGridState& u, const GridSpec& grid) {
  double q = 0.0;
  for (size_t j = 0; j + 1 < u.u.size(); ++j) q += std::norm(0.5 * (u.u[j + 1] + u.u[j]));
  return grid.dx * q;
}

double discrete_charge_periodic(const ComplexGridState& u, const GridSpec& grid) {
  const size_t n = u.u.size();
  double q = 0.0;
  for (size_t j = 0; j < n; ++j) q += std::norm(0.5 * (u.u[(j + 1) % n] + u.u[j]));
  return grid.dx * q;
}

double charge_residual(double q_curr, double q_next, double alpha, double dt) {
  if (!(q_curr > 0.0) || !(q_next > 0.0))
    throw std::invalid_argument("charge_residual: charges must be positive");
  return 2.0 * alpha * dt - std::log(q_curr / q_next);
}

Complex plane_wave_exact(double t, double w_t, Complex amplitude, const NlsParameters& params) {
  const double a2 = std::norm(amplitude);
  double phase;
  if (params.alpha > 0.0)
    phase = a2 / (2.0 * params.alpha) * (1.0 - std::exp(-2.0 * params.alpha * t));
  else
    phase = a2 * t;  // limit of (1 - e^{-2 alpha t}) / (2 alpha)
  phase += params.epsilon * w_t;
  return amplitude * std::exp(-params.alpha * t) * std::exp(Complex(0.0, phase));
}

double wrap_angle(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  x = std::fmod(x + std::numbers::pi, two_pi);
  if (x <= 0.0) x += two_pi;
  return x - std::numbers::pi;
}

std::pair<double, double> mean_amplitude_phase(const ComplexGridState& u) {
  if (u.u.empty()) throw std::invalid_argument("mean_amplitude_phase: empty field");
  double amp = 0.0;
  double phase_sum = 0.0;
  double prev = 0.0;
  bool have_prev = false;
  double unwrapped = 0.0;
  for (const Complex& c : u.u) {
    if (std::abs(c) == 0.0) throw std::invalid_argument("mean_amplitude_phase: zero field value");
    amp += std::abs(c);
    const double raw = std::arg(c);
    if (!have_prev) {
      unwrapped = raw;
      have_prev = true;
    } else {
      unwrapped += wrap_angle(raw - prev);
    }
    prev = raw;
    phase_sum += unwrapped;
  }
  const double n = static_cast<double>(u.u.size());
  return {amp / n, phase_sum / n};
}

std::pair<double, double> amplitude_phase_error(const ComplexGridState& u, Complex exact) {
  auto [amp, phase] = mean_amplitude_phase(u);
  return {amp - std::abs(exact), wrap_angle(phase - std::arg(exact))};
}

double discrete_l2_error(const ComplexGridState& u, const ComplexGridState& v,
                         const GridSpec& grid) {
  if (u.u.size() != v.u.size()) throw std::invalid_argument("discrete_l2_error: grid mismatch");
  double s = 0.0;
  for (size_t j = 0; j < u.u.size(); ++j) s += std::norm(u.u[j] - v.u[j]);
  return std::sqrt(grid.dx * s);
}

double energy_recursion_check(const ComplexGridState& u_curr, const ComplexGridState& u_next,
                              const NlsParameters& params, std::span<const double> noise_dw,
                              const GridSpec& grid) {
  const size_t cells = u_curr.u.size() - 1;
  const double dt = grid.dt, dx = grid.dx;
  const double e = std::exp(-params.alpha * dt);
  const double e2 = e * e;

  double grad_next = 0.0, grad_curr = 0.0;
  double quartic_next = 0.0, quartic_curr = 0.0;
  double noise_term = 0.0;
  for (size_t j = 0; j < cells; ++j) {
    grad_next += std::norm((u_next.u[j + 1] - u_next.u[j]) / dx);
    grad_curr += std::norm((u_curr.u[j + 1] - u_curr.u[j]) / dx);
    const double ax_next = std::norm(0.5 * (u_next.u[j + 1] + u_next.u[j]));
    const double ax_curr = std::norm(0.5 * (u_curr.u[j + 1] + u_curr.u[j]));
    const double atax = std::norm(0.25 * ((u_next.u[j + 1] + u_next.u[j]) +
                                          e * (u_curr.u[j + 1] + u_curr.u[j])));
    quartic_next += atax * ax_next;
    quartic_curr += atax * ax_curr;
    noise_term += (ax_next - e2 * ax_curr) * (noise_dw[j] / dt);
  }
  const double lhs = grad_next - quartic_next;
  const double rhs = e2 * (grad_curr - quartic_curr) + params.epsilon * noise_term;
  return std::abs(lhs - rhs);
}

}  // namespace dsnls
