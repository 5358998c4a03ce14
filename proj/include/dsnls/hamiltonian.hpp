#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

namespace dsnls {

/** Parameters of the damped stochastic NLS equation: absorption alpha >= 0,
 * noise size epsilon >= 0 (epsilon = 0 gives the deterministic equation). */
struct NlsParameters {
  double alpha = 0.1;
  double epsilon = 0.5;

  void validate() const {
    if (alpha < 0.0) throw std::invalid_argument("NlsParameters: alpha must be >= 0");
    if (epsilon < 0.0) throw std::invalid_argument("NlsParameters: epsilon must be >= 0");
  }
};

/** A damped stochastic Hamiltonian PDE structure
 *    M z_t + K z_x = grad S1(z) + grad S2(z) chi_dot + D z
 * with skew-symmetric M, K and D = -(a/2) M - (b/2) K. S1 may carry an
 * explicit time dependence (used by the transformed system); the plain
 * instances ignore the time argument. */
struct HamiltonianSystemSpec {
  int dim = 4;
  Eigen::MatrixXd M;
  Eigen::MatrixXd K;
  double a = 0.0;  // temporal conformal exponent
  double b = 0.0;  // spatial conformal exponent

  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> grad_S1;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_S2;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> hess_S1;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hess_S2;

  // Scalar potentials, kept for consistency checks against the gradients.
  std::function<double(const Eigen::VectorXd&, double)> S1;
  std::function<double(const Eigen::VectorXd&)> S2;

  Eigen::MatrixXd damping() const { return -0.5 * a * M - 0.5 * b * K; }

  void validate() const;
};

/// NLS instance: z = (p, q, v, w), a = 2*alpha, b = 0.
HamiltonianSystemSpec nls_system(const NlsParameters& params);

/// KdV instance: z = (phi, u, v, w), additive noise of amplitude gamma.
HamiltonianSystemSpec kdv_system(double alpha, double gamma);

}  // namespace dsnls
