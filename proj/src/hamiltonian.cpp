#include "dsnls/hamiltonian.hpp"

namespace dsnls {

void HamiltonianSystemSpec::validate() const {
  if (dim < 1) throw std::invalid_argument("HamiltonianSystemSpec: dim must be positive");
  if (M.rows() != dim || M.cols() != dim || K.rows() != dim || K.cols() != dim)
    throw std::invalid_argument("HamiltonianSystemSpec: matrix shape mismatch");
  if (M != -M.transpose()) throw std::invalid_argument("HamiltonianSystemSpec: M not skew-symmetric");
  if (K != -K.transpose()) throw std::invalid_argument("HamiltonianSystemSpec: K not skew-symmetric");
  if (!grad_S1 || !grad_S2 || !hess_S1 || !hess_S2)
    throw std::invalid_argument("HamiltonianSystemSpec: missing potential callbacks");
}

HamiltonianSystemSpec nls_system(const NlsParameters& params) {
  params.validate();
  const double eps = params.epsilon;

  HamiltonianSystemSpec sys;
  sys.dim = 4;
  sys.M = Eigen::MatrixXd::Zero(4, 4);
  sys.M(0, 1) = -1.0;
  sys.M(1, 0) = 1.0;
  sys.K = Eigen::MatrixXd::Zero(4, 4);
  sys.K(0, 2) = 1.0;
  sys.K(1, 3) = 1.0;
  sys.K(2, 0) = -1.0;
  sys.K(3, 1) = -1.0;
  sys.a = 2.0 * params.alpha;
  sys.b = 0.0;

  sys.S1 = [](const Eigen::VectorXd& z, double) {
    const double p = z[0], q = z[1], v = z[2], w = z[3];
    const double r2 = p * p + q * q;
    return -0.5 * (v * v + w * w) - 0.25 * r2 * r2;
  };
  sys.grad_S1 = [](const Eigen::VectorXd& z, double) {
    const double p = z[0], q = z[1];
    const double r2 = p * p + q * q;
    Eigen::VectorXd g(4);
    g << -p * r2, -q * r2, -z[2], -z[3];
    return g;
  };
  sys.hess_S1 = [](const Eigen::VectorXd& z, double) {
    const double p = z[0], q = z[1];
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 4);
    h(0, 0) = -(3.0 * p * p + q * q);
    h(0, 1) = h(1, 0) = -2.0 * p * q;
    h(1, 1) = -(p * p + 3.0 * q * q);
    h(2, 2) = -1.0;
    h(3, 3) = -1.0;
    return h;
  };

  sys.S2 = [eps](const Eigen::VectorXd& z) {
    return -0.5 * eps * (z[0] * z[0] + z[1] * z[1]);
  };
  sys.grad_S2 = [eps](const Eigen::VectorXd& z) {
    Eigen::VectorXd g(4);
    g << -eps * z[0], -eps * z[1], 0.0, 0.0;
    return g;
  };
  sys.hess_S2 = [eps](const Eigen::VectorXd&) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 4);
    h(0, 0) = -eps;
    h(1, 1) = -eps;
    return h;
  };

  sys.validate();
  return sys;
}

HamiltonianSystemSpec kdv_system(double alpha, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("kdv_system: gamma must be >= 0");

  HamiltonianSystemSpec sys;
  sys.dim = 4;
  sys.M = Eigen::MatrixXd::Zero(4, 4);
  sys.M(0, 1) = 0.5;
  sys.M(1, 0) = -0.5;
  sys.K = Eigen::MatrixXd::Zero(4, 4);
  sys.K(0, 3) = 1.0;
  sys.K(1, 2) = -1.0;
  sys.K(2, 1) = 1.0;
  sys.K(3, 0) = -1.0;
  // a = -2*alpha makes the derived D reproduce the damping term (alpha/2) u
  // of the first-order system; note D = -(a/2) M.
  sys.a = -2.0 * alpha;
  sys.b = 0.0;

  sys.S1 = [](const Eigen::VectorXd& z, double) {
    const double u = z[1], v = z[2], w = z[3];
    return u * u * u - u * w + 0.5 * v * v;
  };
  sys.grad_S1 = [](const Eigen::VectorXd& z, double) {
    const double u = z[1], v = z[2], w = z[3];
    Eigen::VectorXd g(4);
    g << 0.0, 3.0 * u * u - w, v, -u;
    return g;
  };
  sys.hess_S1 = [](const Eigen::VectorXd& z, double) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 4);
    h(1, 1) = 6.0 * z[1];
    h(1, 3) = h(3, 1) = -1.0;
    h(2, 2) = 1.0;
    return h;
  };

  sys.S2 = [gamma](const Eigen::VectorXd& z) { return gamma * z[0]; };
  sys.grad_S2 = [gamma](const Eigen::VectorXd&) {
    Eigen::VectorXd g(4);
    g << gamma, 0.0, 0.0, 0.0;
    return g;
  };
  sys.hess_S2 = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(4, 4); };

  sys.validate();
  return sys;
}

}  // namespace dsnls
