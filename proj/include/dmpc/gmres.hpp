#pragma once

#include <cmath>
#include <string>

#include "dmpc/errors.hpp"
#include "dmpc/types.hpp"

namespace dmpc {

template <typename Scalar>
struct GmresResult {
  VectorX<Scalar> solution;
  Scalar relative_residual = Scalar(0);
  int iterations = 0;
  bool breakdown = false;  // Krylov space became invariant before convergence check
};

namespace detail {

template <typename Scalar>
void givens(Scalar a, Scalar b, Scalar& c, Scalar& s) {
  using std::abs;
  using std::sqrt;
  if (b == Scalar(0)) {
    c = Scalar(1);
    s = Scalar(0);
  } else if (abs(b) > abs(a)) {
    const Scalar t = a / b;
    s = Scalar(1) / sqrt(Scalar(1) + t * t);
    c = s * t;
  } else {
    const Scalar t = b / a;
    c = Scalar(1) / sqrt(Scalar(1) + t * t);
    s = c * t;
  }
}

}  // namespace detail

/// Matrix-free GMRES, single cycle without restarts.
///
/// `apply` maps a vector to the operator image. Arnoldi uses modified
/// Gram-Schmidt and the least-squares problem is kept triangular with Givens
/// rotations, so the residual estimate is available at every iteration. Stops
/// when ||rhs - A x|| <= tolerance * ||rhs|| or after `max_iters` iterations and
/// returns the best iterate in the Krylov space built so far.
template <typename Scalar, typename Operator>
GmresResult<Scalar> gmres_solve(Operator&& apply, const VectorX<Scalar>& rhs,
                                const VectorX<Scalar>& x_init, int max_iters, Scalar tolerance) {
  using std::abs;
  const Index n = rhs.size();
  if (x_init.size() != n) throw LayoutError("gmres: initial guess has wrong dimension");
  if (!rhs.allFinite() || !x_init.allFinite()) throw NumericError("gmres: non-finite input");

  GmresResult<Scalar> result;
  const Scalar rhs_norm = rhs.norm();
  if (rhs_norm == Scalar(0)) {
    result.solution = VectorX<Scalar>::Zero(n);
    return result;
  }

  VectorX<Scalar> r = rhs - apply(x_init);
  if (!r.allFinite()) throw NumericError("gmres: operator produced non-finite values");
  const Scalar beta = r.norm();
  result.solution = x_init;
  result.relative_residual = beta / rhs_norm;
  if (result.relative_residual <= tolerance || max_iters <= 0) return result;

  const int k_max = static_cast<int>(std::min<Index>(max_iters, n));
  MatrixX<Scalar> basis(n, k_max + 1);
  MatrixX<Scalar> hessenberg = MatrixX<Scalar>::Zero(k_max + 1, k_max);
  VectorX<Scalar> g = VectorX<Scalar>::Zero(k_max + 1);
  VectorX<Scalar> cs(k_max), sn(k_max);
  basis.col(0) = r / beta;
  g(0) = beta;

  int used = 0;
  for (int j = 0; j < k_max; ++j) {
    VectorX<Scalar> w = apply(basis.col(j));
    if (!w.allFinite()) throw NumericError("gmres: operator produced non-finite values");
    const Scalar w_norm0 = w.norm();
    for (int i = 0; i <= j; ++i) {
      hessenberg(i, j) = w.dot(basis.col(i));
      w -= hessenberg(i, j) * basis.col(i);
    }
    const Scalar h_next = w.norm();
    hessenberg(j + 1, j) = h_next;

    for (int i = 0; i < j; ++i) {
      const Scalar tmp = cs(i) * hessenberg(i, j) + sn(i) * hessenberg(i + 1, j);
      hessenberg(i + 1, j) = -sn(i) * hessenberg(i, j) + cs(i) * hessenberg(i + 1, j);
      hessenberg(i, j) = tmp;
    }
    detail::givens(hessenberg(j, j), hessenberg(j + 1, j), cs(j), sn(j));
    hessenberg(j, j) = cs(j) * hessenberg(j, j) + sn(j) * hessenberg(j + 1, j);
    hessenberg(j + 1, j) = Scalar(0);
    g(j + 1) = -sn(j) * g(j);
    g(j) = cs(j) * g(j);

    used = j + 1;
    result.relative_residual = abs(g(j + 1)) / rhs_norm;
    if (h_next <= Scalar(64) * Eigen::NumTraits<Scalar>::epsilon() * w_norm0) {
      result.breakdown = true;
      // A zero pivot means the operator is singular on the Krylov space; keep
      // the iterate from the previous column instead of dividing by it.
      if (hessenberg(j, j) == Scalar(0)) {
        used = j;
        result.relative_residual = abs(g(j)) / rhs_norm;
      }
      break;
    }
    basis.col(j + 1) = w / h_next;
    if (result.relative_residual <= tolerance) break;
  }

  if (used > 0) {
    const VectorX<Scalar> y = hessenberg.topLeftCorner(used, used)
                                  .template triangularView<Eigen::Upper>()
                                  .solve(g.head(used));
    result.solution.noalias() += basis.leftCols(used) * y;
  }
  result.iterations = used;
  if (!result.solution.allFinite()) throw NumericError("gmres: non-finite solution");
  return result;
}

}  // namespace dmpc
