#include "dsnls/integrators.hpp"

#include <algorithm>
#include <cmath>

#include "dsnls/banded.hpp"

namespace dsnls {

namespace {

constexpr Complex I{0.0, 1.0};

double max_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Reduced conformal scheme for u. Equation index j couples nodes j, j+1, j+2;
// the cubic magnitude is lagged (Picard) while the averaged linear factor,
// the Laplacian and the noise term stay implicit, so each iteration is one
// tridiagonal solve.
// ---------------------------------------------------------------------------
ComplexGridState cms_step_nls(const ComplexGridState& state, const NlsParameters& params,
                              std::span<const double> noise_dw, const GridSpec& grid,
                              const StepConfig& cfg, BoundaryKind boundary) {
  params.validate();
  const int J = grid.n_interior();
  const double dt = grid.dt, dx = grid.dx;
  const double e = std::exp(-params.alpha * dt);
  const double eps = params.epsilon;
  const Complex idx2 = I / (dx * dx);
  const std::vector<Complex>& un = state.u;

  if (boundary == BoundaryKind::Dirichlet) {
    if (static_cast<int>(un.size()) != J + 1)
      throw std::invalid_argument("cms_step_nls: state size mismatch");
    if (static_cast<int>(noise_dw.size()) < J + 1)
      throw std::invalid_argument("cms_step_nls: noise slice too short");

    std::vector<double> chi(J + 1);
    for (int j = 0; j <= J; ++j) chi[j] = noise_dw[j] / dt;

    std::vector<Complex> v(J + 1, Complex{});
    const double predictor = std::exp(-params.alpha * dt * 0.5);
    for (int j = 1; j < J; ++j) v[j] = predictor * un[j];

    const int n = J - 1;
    std::vector<Complex> sub(n), diag(n), sup(n), rhs(n);
    std::vector<double> c(J);  // |A_t A_x u_j|^2 at the current iterate

    double residual = 0.0;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      for (int j = 0; j < J; ++j) {
        const Complex zbar = 0.25 * ((v[j] + v[j + 1]) + e * (un[j] + un[j + 1]));
        c[j] = std::norm(zbar);
      }
      for (int j = 0; j <= J - 2; ++j) {
        const int r = j;  // unknown k = j+1 sits on the diagonal
        sub[r] = 0.5 / dt - idx2 - 0.25 * I * (c[j] + eps * chi[j]);
        diag[r] = 1.0 / dt + 2.0 * idx2 -
                  0.25 * I * (c[j] + c[j + 1] + eps * (chi[j] + chi[j + 1]));
        sup[r] = 0.5 / dt - idx2 - 0.25 * I * (c[j + 1] + eps * chi[j + 1]);
        rhs[r] = e * (un[j] + 2.0 * un[j + 1] + un[j + 2]) * (0.5 / dt) +
                 idx2 * e * (un[j] - 2.0 * un[j + 1] + un[j + 2]) +
                 0.25 * I * e *
                     (c[j] * (un[j] + un[j + 1]) + c[j + 1] * (un[j + 1] + un[j + 2])) +
                 0.25 * I * eps * e *
                     (chi[j] * (un[j] + un[j + 1]) + chi[j + 1] * (un[j + 1] + un[j + 2]));
      }
      std::vector<Complex> sol = solve_tridiagonal(sub, diag, sup, rhs);
      residual = 0.0;
      for (int k = 1; k < J; ++k) {
        residual = std::max(residual, std::abs(sol[k - 1] - v[k]));
        v[k] = sol[k - 1];
      }
      if (residual < cfg.fixed_point_tol)
        return ComplexGridState{std::move(v), state.time + dt};
    }
    throw StepFailure("cms_step_nls: fixed point did not converge", residual,
                      cfg.max_iterations);
  }

  // Periodic wrap: nodes 0..J-1, equations j = 0..J-1 with indices mod J,
  // relabeled so that equation j lands in row (j+1) mod J of a cyclic
  // tridiagonal system.
  const int n = static_cast<int>(un.size());
  if (n < 3) throw std::invalid_argument("cms_step_nls: periodic grid too small");
  if (static_cast<int>(noise_dw.size()) < n)
    throw std::invalid_argument("cms_step_nls: noise slice too short");

  std::vector<double> chi(n);
  for (int j = 0; j < n; ++j) chi[j] = noise_dw[j] / dt;

  std::vector<Complex> v(n);
  const double predictor = std::exp(-params.alpha * dt * 0.5);
  for (int j = 0; j < n; ++j) v[j] = predictor * un[j];

  std::vector<double> c(n);
  std::vector<Complex> sub(n), diag(n), sup(n), rhs(n);
  double residual = 0.0;
  auto wrap = [n](int j) { return (j % n + n) % n; };

  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (int j = 0; j < n; ++j) {
      const int jp = wrap(j + 1);
      const Complex zbar = 0.25 * ((v[j] + v[jp]) + e * (un[j] + un[jp]));
      c[j] = std::norm(zbar);
    }
    Complex top_right{}, bottom_left{};
    for (int j = 0; j < n; ++j) {
      const int r = wrap(j + 1);
      const int j1 = wrap(j + 1), j2 = wrap(j + 2);
      const Complex left = 0.5 / dt - idx2 - 0.25 * I * (c[j] + eps * chi[j]);
      const Complex mid = 1.0 / dt + 2.0 * idx2 -
                          0.25 * I * (c[j] + c[j1] + eps * (chi[j] + chi[j1]));
      // right coefficient belongs to node j+2; its cubic/noise weights are
      // those of cell j+1.
      const Complex rightc = 0.5 / dt - idx2 - 0.25 * I * (c[j1] + eps * chi[j1]);
      if (r == 0) {
        top_right = left;  // column n-1
      } else {
        sub[r] = left;
      }
      diag[r] = mid;
      if (r == n - 1) {
        bottom_left = rightc;  // column 0
      } else {
        sup[r] = rightc;
      }
      rhs[r] = e * (un[j] + 2.0 * un[j1] + un[j2]) * (0.5 / dt) +
               idx2 * e * (un[j] - 2.0 * un[j1] + un[j2]) +
               0.25 * I * e * (c[j] * (un[j] + un[j1]) + c[j1] * (un[j1] + un[j2])) +
               0.25 * I * eps * e *
                   (chi[j] * (un[j] + un[j1]) + chi[j1] * (un[j1] + un[j2]));
    }
    std::vector<Complex> sol = solve_cyclic_tridiagonal(sub, diag, sup, top_right, bottom_left, rhs);
    residual = max_diff(sol, v);
    v = std::move(sol);
    if (residual < cfg.fixed_point_tol) return ComplexGridState{std::move(v), state.time + dt};
  }
  throw StepFailure("cms_step_nls: periodic fixed point did not converge", residual,
                    cfg.max_iterations);
}

// ---------------------------------------------------------------------------
// Transformed multi-symplectic scheme for varpi = e^{alpha t} u, centered at
// node j with half-cell averages on both sides.
// ---------------------------------------------------------------------------
ComplexGridState ms_step_transformed(const ComplexGridState& state, const NlsParameters& params,
                                     std::span<const double> noise_dw, const GridSpec& grid,
                                     const StepConfig& cfg) {
  params.validate();
  const int J = grid.n_interior();
  const double dt = grid.dt, dx = grid.dx;
  const double eps = params.epsilon;
  const Complex idx2 = I / (dx * dx);
  const std::vector<Complex>& wn = state.u;
  if (static_cast<int>(wn.size()) != J + 1)
    throw std::invalid_argument("ms_step_transformed: state size mismatch");
  if (static_cast<int>(noise_dw.size()) < J + 1)
    throw std::invalid_argument("ms_step_transformed: noise slice too short");

  const double e2 = std::exp(-2.0 * params.alpha * (state.time + cfg.theta * dt));
  std::vector<double> chi(J + 1);
  for (int j = 0; j <= J; ++j) chi[j] = noise_dw[j] / dt;

  std::vector<Complex> v = wn;  // transformed variable carries no decay
  const int n = J - 1;
  std::vector<Complex> sub(n), diag(n), sup(n), rhs(n);
  std::vector<double> c(J);  // |varpi^{n+1/2}_{j+1/2}|^2 per cell

  double residual = 0.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (int j = 0; j < J; ++j) {
      const Complex m = 0.25 * (v[j] + v[j + 1] + wn[j] + wn[j + 1]);
      c[j] = std::norm(m);
    }
    for (int j = 1; j < J; ++j) {
      const int r = j - 1;
      const double cm = c[j - 1], cp = c[j];
      sub[r] = 0.5 / dt - idx2 - 0.25 * I * (e2 * cm + eps * chi[j - 1]);
      diag[r] = 1.0 / dt + 2.0 * idx2 -
                0.25 * I * (e2 * (cp + cm) + eps * (chi[j] + chi[j - 1]));
      sup[r] = 0.5 / dt - idx2 - 0.25 * I * (e2 * cp + eps * chi[j]);
      rhs[r] = (wn[j - 1] + 2.0 * wn[j] + wn[j + 1]) * (0.5 / dt) +
               idx2 * (wn[j - 1] - 2.0 * wn[j] + wn[j + 1]) +
               0.25 * I * e2 * (cp * (wn[j] + wn[j + 1]) + cm * (wn[j - 1] + wn[j])) +
               0.25 * I * eps *
                   (chi[j] * (wn[j] + wn[j + 1]) + chi[j - 1] * (wn[j - 1] + wn[j]));
    }
    std::vector<Complex> sol = solve_tridiagonal(sub, diag, sup, rhs);
    residual = 0.0;
    for (int k = 1; k < J; ++k) {
      residual = std::max(residual, std::abs(sol[k - 1] - v[k]));
      v[k] = sol[k - 1];
    }
    if (residual < cfg.fixed_point_tol) return ComplexGridState{std::move(v), state.time + dt};
  }
  throw StepFailure("ms_step_transformed: fixed point did not converge", residual,
                    cfg.max_iterations);
}

// ---------------------------------------------------------------------------
// Crank-Nicolson comparator.
// ---------------------------------------------------------------------------
ComplexGridState cn_step(const ComplexGridState& state, const NlsParameters& params,
                         std::span<const double> noise_dw, const GridSpec& grid,
                         const StepConfig& cfg) {
  params.validate();
  const int J = grid.n_interior();
  const double dt = grid.dt, dx = grid.dx;
  const double alpha = params.alpha, eps = params.epsilon;
  const Complex ihdx2 = 0.5 * I / (dx * dx);
  const std::vector<Complex>& un = state.u;
  if (static_cast<int>(un.size()) != J + 1)
    throw std::invalid_argument("cn_step: state size mismatch");
  if (static_cast<int>(noise_dw.size()) < J + 1)
    throw std::invalid_argument("cn_step: noise slice too short");

  std::vector<double> chi(J + 1);
  for (int j = 0; j <= J; ++j) chi[j] = noise_dw[j] / dt;

  std::vector<Complex> v = un;
  const int n = J - 1;
  std::vector<Complex> sub(n), diag(n), sup(n), rhs(n);

  double residual = 0.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (int j = 1; j < J; ++j) {
      const int r = j - 1;
      const double c = 0.5 * (std::norm(v[j]) + std::norm(un[j]));  // A_t^0 |u_j|^2
      sub[r] = -ihdx2;
      diag[r] = 1.0 / dt + 0.5 * alpha + 2.0 * ihdx2 - 0.5 * I * c - 0.5 * I * eps * chi[j];
      sup[r] = -ihdx2;
      rhs[r] = un[j] / dt - 0.5 * alpha * un[j] +
               ihdx2 * (un[j + 1] - 2.0 * un[j] + un[j - 1]) + 0.5 * I * c * un[j] +
               0.5 * I * eps * chi[j] * un[j];
    }
    std::vector<Complex> sol = solve_tridiagonal(sub, diag, sup, rhs);
    residual = 0.0;
    for (int k = 1; k < J; ++k) {
      residual = std::max(residual, std::abs(sol[k - 1] - v[k]));
      v[k] = sol[k - 1];
    }
    if (residual < cfg.fixed_point_tol) return ComplexGridState{std::move(v), state.time + dt};
  }
  throw StepFailure("cn_step: fixed point did not converge", residual, cfg.max_iterations);
}

// ---------------------------------------------------------------------------
// Generic stacked scheme: Newton iteration on all 4 components over all
// nodes, banded Jacobian (kl = ku = 5). Unknown ordering: component c of
// node i sits at index 4*i + c. Row layout: two boundary rows (p, q at the
// left node), then four scheme rows per cell j = 0..J-1, then two boundary
// rows for the right node.
// ---------------------------------------------------------------------------
namespace {

struct GenericWorkspace {
  const HamiltonianSystemSpec* sys;
  Eigen::Matrix4d M, K;
  double a, b, dt, dx, et, ex, t_eval;
  std::span<const double> chi;
  const std::vector<Eigen::Vector4d>* zn;
  int J;

  Eigen::Vector4d ax(const std::vector<Eigen::Vector4d>& z, int j) const {
    return 0.5 * (z[j + 1] + ex * z[j]);
  }

  // Scheme defect of cell j given the candidate next level.
  Eigen::Vector4d defect(const std::vector<Eigen::Vector4d>& znext, int j) const {
    const Eigen::Vector4d axp = ax(znext, j);
    const Eigen::Vector4d axn = ax(*zn, j);
    const Eigen::Vector4d dtax = (axp - et * axn) / dt;
    const Eigen::Vector4d at_j = 0.5 * (znext[j] + et * (*zn)[j]);
    const Eigen::Vector4d at_j1 = 0.5 * (znext[j + 1] + et * (*zn)[j + 1]);
    const Eigen::Vector4d dxat = (at_j1 - ex * at_j) / dx;
    const Eigen::Vector4d zbar = 0.5 * (axp + et * axn);
    Eigen::VectorXd g1 = sys->grad_S1(zbar, t_eval);
    Eigen::VectorXd g2 = sys->grad_S2(zbar);
    return M * dtax + K * dxat - g1 - g2 * chi[j];
  }

  // Jacobian blocks of the cell-j defect wrt znext[j] (A) and znext[j+1] (B).
  void jacobian_blocks(const std::vector<Eigen::Vector4d>& znext, int j, Eigen::Matrix4d& A,
                       Eigen::Matrix4d& B) const {
    const Eigen::Vector4d zbar = 0.5 * (ax(znext, j) + et * ax(*zn, j));
    Eigen::Matrix4d H = sys->hess_S1(zbar, t_eval) + sys->hess_S2(zbar) * chi[j];
    A = M * (ex / (2.0 * dt)) - K * (ex / (2.0 * dx)) - H * (ex / 4.0);
    B = M * (1.0 / (2.0 * dt)) + K * (1.0 / (2.0 * dx)) - H * 0.25;
  }
};

void assemble_jacobian(const GenericWorkspace& ws, const std::vector<Eigen::Vector4d>& znext,
                       BandedSolver<double>& solver) {
  const int J = ws.J;
  solver.reset();
  // Boundary rows pin p and q at both ends.
  solver.coeff(0, 0) = 1.0;
  solver.coeff(1, 1) = 1.0;
  solver.coeff(4 * J + 2, 4 * J) = 1.0;
  solver.coeff(4 * J + 3, 4 * J + 1) = 1.0;
  Eigen::Matrix4d A, B;
  for (int j = 0; j < J; ++j) {
    ws.jacobian_blocks(znext, j, A, B);
    for (int c = 0; c < 4; ++c) {
      const int row = 2 + 4 * j + c;
      for (int d = 0; d < 4; ++d) {
        solver.coeff(row, 4 * j + d) = A(c, d);
        solver.coeff(row, 4 * (j + 1) + d) = B(c, d);
      }
    }
  }
  solver.factor();
}

}  // namespace

RealGridState4 cms_step_generic(const HamiltonianSystemSpec& system, const RealGridState4& state,
                                std::span<const double> noise_dw, const GridSpec& grid,
                                const StepConfig& cfg) {
  system.validate();
  if (system.dim != 4) throw std::invalid_argument("cms_step_generic: dim 4 expected");
  const int J = grid.n_interior();
  const double dt = grid.dt;
  if (static_cast<int>(state.z.size()) != J + 1)
    throw std::invalid_argument("cms_step_generic: state size mismatch");
  if (static_cast<int>(noise_dw.size()) < J + 1)
    throw std::invalid_argument("cms_step_generic: noise slice too short");

  std::vector<double> chi(J + 1);
  for (int j = 0; j <= J; ++j) chi[j] = noise_dw[j] / dt;

  GenericWorkspace ws;
  ws.sys = &system;
  ws.M = system.M;
  ws.K = system.K;
  ws.a = system.a;
  ws.b = system.b;
  ws.dt = dt;
  ws.dx = grid.dx;
  ws.et = std::exp(-0.5 * system.a * dt);
  ws.ex = std::exp(-0.5 * system.b * grid.dx);
  ws.t_eval = state.time + cfg.theta * dt;
  ws.chi = chi;
  ws.zn = &state.z;
  ws.J = J;

  std::vector<Eigen::Vector4d> znext(J + 1);
  for (int j = 0; j <= J; ++j) znext[j] = ws.et * state.z[j];
  znext[0][0] = znext[0][1] = 0.0;
  znext[J][0] = znext[J][1] = 0.0;

  const int nu = 4 * (J + 1);
  BandedSolver<double> solver(nu, 5, 5);
  std::vector<double> rhs(nu);

  double residual = 0.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    residual = 0.0;
    rhs[0] = -znext[0][0];
    rhs[1] = -znext[0][1];
    rhs[4 * J + 2] = -znext[J][0];
    rhs[4 * J + 3] = -znext[J][1];
    for (int j = 0; j < J; ++j) {
      const Eigen::Vector4d f = ws.defect(znext, j);
      for (int c = 0; c < 4; ++c) {
        rhs[2 + 4 * j + c] = -f[c];
        residual = std::max(residual, std::abs(f[c]));
      }
    }
    if (residual < cfg.fixed_point_tol)
      return RealGridState4{std::move(znext), state.time + dt};

    assemble_jacobian(ws, znext, solver);
    solver.solve(rhs);
    for (int j = 0; j <= J; ++j)
      for (int c = 0; c < 4; ++c) znext[j][c] += rhs[4 * j + c];
  }
  throw StepFailure("cms_step_generic: Newton did not converge", residual, cfg.max_iterations);
}

TangentPair tangent_step(const HamiltonianSystemSpec& system, const RealGridState4& z_curr,
                         const RealGridState4& z_next, const TangentPair& tangents,
                         std::span<const double> noise_dw, const GridSpec& grid,
                         const StepConfig& cfg) {
  system.validate();
  const int J = grid.n_interior();
  const double dt = grid.dt;
  if (static_cast<int>(z_curr.z.size()) != J + 1 || static_cast<int>(z_next.z.size()) != J + 1)
    throw std::invalid_argument("tangent_step: base state size mismatch");

  std::vector<double> chi(J + 1);
  for (int j = 0; j <= J; ++j) chi[j] = noise_dw[j] / dt;

  GenericWorkspace ws;
  ws.sys = &system;
  ws.M = system.M;
  ws.K = system.K;
  ws.a = system.a;
  ws.b = system.b;
  ws.dt = dt;
  ws.dx = grid.dx;
  ws.et = std::exp(-0.5 * system.a * dt);
  ws.ex = std::exp(-0.5 * system.b * grid.dx);
  ws.t_eval = z_curr.time + cfg.theta * dt;
  ws.chi = chi;
  ws.zn = &z_curr.z;
  ws.J = J;

  const int nu = 4 * (J + 1);
  BandedSolver<double> solver(nu, 5, 5);
  assemble_jacobian(ws, z_next.z, solver);

  auto advance = [&](const std::vector<Eigen::Vector4d>& dzn) {
    // Variational defect with dz^{n+1} = 0, moved to the right-hand side.
    std::vector<double> rhs(nu, 0.0);
    for (int j = 0; j < J; ++j) {
      const Eigen::Vector4d zbar = 0.5 * (ws.ax(z_next.z, j) + ws.et * ws.ax(z_curr.z, j));
      const Eigen::Matrix4d H =
          Eigen::Matrix4d(system.hess_S1(zbar, ws.t_eval)) +
          Eigen::Matrix4d(system.hess_S2(zbar)) * chi[j];
      const Eigen::Vector4d axn = ws.ax(dzn, j);
      const Eigen::Vector4d f0 = ws.M * (-ws.et * axn / dt) +
                                 ws.K * ((ws.et * 0.5) * (dzn[j + 1] - ws.ex * dzn[j]) / ws.dx) -
                                 H * (0.5 * ws.et * axn);
      for (int c = 0; c < 4; ++c) rhs[2 + 4 * j + c] = -f0[c];
    }
    solver.solve(rhs);
    std::vector<Eigen::Vector4d> out(J + 1);
    for (int j = 0; j <= J; ++j)
      for (int c = 0; c < 4; ++c) out[j][c] = rhs[4 * j + c];
    return out;
  };

  TangentPair next;
  next.U = advance(tangents.U);
  next.V = advance(tangents.V);
  return next;
}

std::vector<double> two_form_defect(const HamiltonianSystemSpec& system,
                                    const TangentPair& tan_curr, const TangentPair& tan_next,
                                    const GridSpec& grid) {
  const int J = grid.n_interior();
  const double dt = grid.dt, dx = grid.dx;
  const double ea = std::exp(-system.a * dt);       // full temporal exponent a
  const double eb = std::exp(-system.b * dx);       // full spatial exponent b
  const double et = std::exp(-0.5 * system.a * dt); // half exponents inside the forms
  const double ex = std::exp(-0.5 * system.b * dx);
  const Eigen::Matrix4d M = system.M, K = system.K;

  auto omega = [&](const std::vector<Eigen::Vector4d>& U, const std::vector<Eigen::Vector4d>& V,
                   int j) {
    const Eigen::Vector4d axu = 0.5 * (U[j + 1] + ex * U[j]);
    const Eigen::Vector4d axv = 0.5 * (V[j + 1] + ex * V[j]);
    return (M * axu).dot(axv);
  };
  auto kappa = [&](int j) {
    const Eigen::Vector4d atu = 0.5 * (tan_next.U[j] + et * tan_curr.U[j]);
    const Eigen::Vector4d atv = 0.5 * (tan_next.V[j] + et * tan_curr.V[j]);
    return (K * atu).dot(atv);
  };

  std::vector<double> defect(J);
  for (int j = 0; j < J; ++j) {
    const double w_next = omega(tan_next.U, tan_next.V, j);
    const double w_curr = omega(tan_curr.U, tan_curr.V, j);
    defect[j] = (w_next - ea * w_curr) / dt + (kappa(j + 1) - eb * kappa(j)) / dx;
  }
  return defect;
}

RealGridState4 pack_state4(const ComplexGridState& u, const std::vector<Complex>& w_aux) {
  if (u.u.size() != w_aux.size())
    throw std::invalid_argument("pack_state4: auxiliary profile size mismatch");
  RealGridState4 out;
  out.time = u.time;
  out.z.resize(u.u.size());
  for (size_t j = 0; j < u.u.size(); ++j)
    out.z[j] << u.u[j].real(), u.u[j].imag(), w_aux[j].real(), w_aux[j].imag();
  return out;
}

ComplexGridState unpack_state4(const RealGridState4& z) {
  ComplexGridState out;
  out.time = z.time;
  out.u.resize(z.z.size());
  for (size_t j = 0; j < z.z.size(); ++j) out.u[j] = Complex(z.z[j][0], z.z[j][1]);
  return out;
}

}  // namespace dsnls
