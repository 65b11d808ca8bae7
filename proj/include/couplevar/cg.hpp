#pragma once

// Matrix-free conjugate gradients and flattening helpers for grid data.

#include "couplevar/grid.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace couplevar {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct CgResult {
  Vector<Scalar> x;
  int iterations = 0;
  Scalar relative_residual = 0;
  bool converged = false;
};

struct NoCgObserver {
  template <typename Scalar>
  void operator()(int, Scalar) const {}
};

/// Solves A x = rhs for a symmetric positive definite operator given as a
/// callable Vector -> Vector. Stops when |r_k| <= tol * |rhs - A x0| or after
/// max_iterations. The observer sees (iteration, relative residual) after
/// each step.
template <typename Scalar, typename Apply, typename Observer = NoCgObserver>
CgResult<Scalar> cg_solve(Apply&& apply, const Vector<Scalar>& rhs, Vector<Scalar> x0, int max_iterations, Scalar tol,
                          Observer&& observer = {}) {
  if (rhs.size() != x0.size()) throw std::invalid_argument("cg_solve: size mismatch");
  CgResult<Scalar> result;
  Vector<Scalar> r = rhs - apply(x0);
  const Scalar r0 = r.norm();
  result.x = std::move(x0);
  if (r0 == Scalar(0)) {
    result.converged = true;
    return result;
  }
  Vector<Scalar> p = r;
  Scalar rr = r.squaredNorm();
  for (int k = 1; k <= max_iterations; ++k) {
    const Vector<Scalar> ap = apply(p);
    const Scalar curvature = p.dot(ap);
    if (!(curvature > 0)) throw std::runtime_error("cg_solve: non-positive curvature, operator is not SPD");
    const Scalar step = rr / curvature;
    result.x.noalias() += step * p;
    r.noalias() -= step * ap;
    const Scalar rr_next = r.squaredNorm();
    result.iterations = k;
    result.relative_residual = std::sqrt(rr_next) / r0;
    observer(k, result.relative_residual);
    if (result.relative_residual <= tol) {
      result.converged = true;
      return result;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return result;
}

template <typename Scalar>
Vector<Scalar> to_vector(const ScalarGrid<Scalar>& u) {
  return Eigen::Map<const Vector<Scalar>>(u.data(), u.size());
}

template <typename Scalar>
ScalarGrid<Scalar> grid_from_vector(const Eigen::Ref<const Vector<Scalar>>& x, Index width, Index height) {
  if (x.size() != width * height) throw std::invalid_argument("grid_from_vector: size mismatch");
  return ScalarGrid<Scalar>(GridArray<Scalar>(Eigen::Map<const GridArray<Scalar>>(x.data(), height, width)));
}

/// x-component faces first, then y-component faces, both row-major.
template <typename Scalar>
Vector<Scalar> to_vector(const StaggeredField<Scalar>& w) {
  Vector<Scalar> out(w.size());
  const Index nx = w.x_array().size();
  out.head(nx) = Eigen::Map<const Vector<Scalar>>(w.x_array().data(), nx);
  out.tail(w.y_array().size()) = Eigen::Map<const Vector<Scalar>>(w.y_array().data(), w.y_array().size());
  return out;
}

template <typename Scalar>
StaggeredField<Scalar> field_from_vector(const Eigen::Ref<const Vector<Scalar>>& x, Index width, Index height) {
  const Index nx = height * (width - 1);
  const Index ny = (height - 1) * width;
  if (x.size() != nx + ny) throw std::invalid_argument("field_from_vector: size mismatch");
  GridArray<Scalar> ax = Eigen::Map<const GridArray<Scalar>>(x.data(), height, width - 1);
  GridArray<Scalar> ay = Eigen::Map<const GridArray<Scalar>>(x.data() + nx, height - 1, width);
  return StaggeredField<Scalar>(std::move(ax), std::move(ay));
}

}  // namespace couplevar
