#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dsnls {

/** Banded LU factorization with partial pivoting.
 *
 * Compact storage: row i of `a` holds A(i, i-kl) .. A(i, i+ku), i.e.
 * a(i, d) = A(i, i-kl+d) for d = 0..kl+ku. Entries falling outside the
 * matrix are ignored. Works for real and complex scalars.
 */
template <class Scalar>
class BandedSolver {
public:
  BandedSolver(int n, int kl, int ku)
      : n_(n), kl_(kl), ku_(ku), w_(kl + ku + 1),
        a_(static_cast<size_t>(n) * w_, Scalar{}),
        al_(static_cast<size_t>(n) * kl_, Scalar{}), piv_(n) {}

  int size() const { return n_; }

  Scalar& coeff(int i, int j) {
    int d = j - i + kl_;
    if (d < 0 || d >= w_) throw std::logic_error("BandedSolver: entry outside band");
    return a_[static_cast<size_t>(i) * w_ + d];
  }

  void reset() {
    std::fill(a_.begin(), a_.end(), Scalar{});
    factored_ = false;
  }

  // In-place band LU (Numerical Recipes bandec, adapted).
  void factor() {
    const int m = w_;
    int l = kl_;
    for (int i = 0; i < kl_; ++i) {
      for (int j = kl_ - i; j < m; ++j) at(i, j - l) = at(i, j);
      --l;
      for (int j = m - l - 1; j < m; ++j) at(i, j) = Scalar{};
    }
    l = kl_;
    for (int k = 0; k < n_; ++k) {
      Scalar dum = at(k, 0);
      int i = k;
      if (l < n_) ++l;
      for (int j = k + 1; j < l; ++j) {
        if (std::abs(at(j, 0)) > std::abs(dum)) {
          dum = at(j, 0);
          i = j;
        }
      }
      piv_[k] = i;
      if (std::abs(dum) == 0.0) throw std::runtime_error("BandedSolver: singular matrix");
      if (i != k)
        for (int j = 0; j < m; ++j) std::swap(at(k, j), at(i, j));
      for (i = k + 1; i < l; ++i) {
        dum = at(i, 0) / at(k, 0);
        al_[static_cast<size_t>(k) * kl_ + (i - k - 1)] = dum;
        for (int j = 1; j < m; ++j) at(i, j - 1) = at(i, j) - dum * at(k, j);
        at(i, m - 1) = Scalar{};
      }
    }
    factored_ = true;
  }

  void solve(std::vector<Scalar>& b) const {
    if (!factored_) throw std::logic_error("BandedSolver: solve before factor");
    const int m = w_;
    int l = kl_;
    for (int k = 0; k < n_; ++k) {
      int i = piv_[k];
      if (i != k) std::swap(b[k], b[i]);
      if (l < n_) ++l;
      for (i = k + 1; i < l; ++i) b[i] -= al_[static_cast<size_t>(k) * kl_ + (i - k - 1)] * b[k];
    }
    l = 1;
    for (int i = n_ - 1; i >= 0; --i) {
      Scalar dum = b[i];
      for (int k = 1; k < l; ++k) dum -= cat(i, k) * b[i + k];
      b[i] = dum / cat(i, 0);
      if (l < m) ++l;
    }
  }

private:
  Scalar& at(int i, int j) { return a_[static_cast<size_t>(i) * w_ + j]; }
  const Scalar& cat(int i, int j) const { return a_[static_cast<size_t>(i) * w_ + j]; }

  int n_, kl_, ku_, w_;
  std::vector<Scalar> a_, al_;
  std::vector<int> piv_;
  bool factored_ = false;
};

/** Solves a tridiagonal system given by sub/diag/sup bands. */
template <class Scalar>
std::vector<Scalar> solve_tridiagonal(const std::vector<Scalar>& sub,
                                      const std::vector<Scalar>& diag,
                                      const std::vector<Scalar>& sup,
                                      std::vector<Scalar> rhs) {
  const int n = static_cast<int>(diag.size());
  BandedSolver<Scalar> s(n, 1, 1);
  for (int i = 0; i < n; ++i) {
    s.coeff(i, i) = diag[i];
    if (i > 0) s.coeff(i, i - 1) = sub[i];
    if (i < n - 1) s.coeff(i, i + 1) = sup[i];
  }
  s.factor();
  s.solve(rhs);
  return rhs;
}

/** Cyclic tridiagonal solve via the Sherman-Morrison correction.
 * Corner entries: top_right = A(0, n-1), bottom_left = A(n-1, 0).
 */
template <class Scalar>
std::vector<Scalar> solve_cyclic_tridiagonal(const std::vector<Scalar>& sub,
                                             std::vector<Scalar> diag,
                                             const std::vector<Scalar>& sup,
                                             Scalar top_right, Scalar bottom_left,
                                             const std::vector<Scalar>& rhs) {
  const int n = static_cast<int>(diag.size());
  if (n < 3) throw std::invalid_argument("solve_cyclic_tridiagonal: n >= 3 required");
  const Scalar gamma = -diag[0];
  diag[0] -= gamma;
  diag[n - 1] -= top_right * bottom_left / gamma;
  std::vector<Scalar> x = solve_tridiagonal(sub, diag, sup, rhs);
  std::vector<Scalar> u(n, Scalar{});
  u[0] = gamma;
  u[n - 1] = bottom_left;
  std::vector<Scalar> z = solve_tridiagonal(sub, diag, sup, u);
  const Scalar fact = (x[0] + top_right * x[n - 1] / gamma) /
                      (Scalar{1} + z[0] + top_right * z[n - 1] / gamma);
  for (int i = 0; i < n; ++i) x[i] -= fact * z[i];
  return x;
}

}  // namespace dsnls
