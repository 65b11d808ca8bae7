#pragma once

// Discrete coupling energies
//
//   E(u, v) = 1/2 |u - f|^2 + alpha/2 * S(v) + beta * sum_cells sqrt(m + eps)
//
// where m is the cell-centred squared coupling magnitude of grad u - v
// (half the sum of the four squared face residuals around a cell, summed
// over channels) and S is either |v|^2 (first order) or the staggered
// Jacobian norm (second order).

#include "couplevar/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace couplevar {

enum class ModelOrder : int { first = 1, second = 2 };

inline int as_int(ModelOrder order) { return static_cast<int>(order); }

inline ModelOrder model_order_from_int(int order) {
  if (order == 1) return ModelOrder::first;
  if (order == 2) return ModelOrder::second;
  throw std::invalid_argument("model order must be 1 or 2, got " + std::to_string(order));
}

template <typename Scalar = double>
struct ModelParams {
  ModelOrder order = ModelOrder::first;
  Scalar alpha = 1;
  Scalar beta = 1;
  Scalar epsilon = Scalar(1e-6);

  void validate() const {
    if (!(alpha > 0)) throw std::invalid_argument("alpha must be positive");
    if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
    if (!(epsilon >= 0)) throw std::invalid_argument("epsilon must be non-negative");
    if (order != ModelOrder::first && order != ModelOrder::second) throw std::invalid_argument("invalid model order");
  }
};

/// Regularised penaliser sqrt(m + eps).
template <typename Scalar>
Scalar phi(Scalar m, Scalar epsilon) {
  return std::sqrt(m + epsilon);
}

/// Diffusivity 1 / sqrt(m + eps).
template <typename Scalar>
Scalar phi_prime(Scalar m, Scalar epsilon) {
  const Scalar s = m + epsilon;
  if (!(s > 0)) throw std::domain_error("phi_prime: m + epsilon must be positive");
  return Scalar(1) / std::sqrt(s);
}

/// Cell map 1/2 (r1(i-1/2)^2 + r1(i+1/2)^2 + r2(j-1/2)^2 + r2(j+1/2)^2).
template <typename Scalar>
ScalarGrid<Scalar> cell_magnitude(const StaggeredField<Scalar>& r) {
  const Index width = r.width(), height = r.height();
  GridArray<Scalar> m = GridArray<Scalar>::Zero(height, width);
  if (width > 1) {
    const GridArray<Scalar> sq = r.x_array().square();
    m.leftCols(width - 1) += sq;
    m.rightCols(width - 1) += sq;
  }
  if (height > 1) {
    const GridArray<Scalar> sq = r.y_array().square();
    m.topRows(height - 1) += sq;
    m.bottomRows(height - 1) += sq;
  }
  m *= Scalar(0.5);
  return ScalarGrid<Scalar>(std::move(m));
}

/// Channel-summed cell magnitude of a set of face fields.
template <typename Scalar>
ScalarGrid<Scalar> cell_magnitude(const FieldSet<Scalar>& r) {
  if (r.empty()) throw std::invalid_argument("cell_magnitude: no channels");
  ScalarGrid<Scalar> m = cell_magnitude(r.front());
  for (std::size_t c = 1; c < r.size(); ++c) m += cell_magnitude(r[c]);
  return m;
}

template <typename Scalar>
ScalarGrid<Scalar> coupling_magnitude(const ScalarGrid<Scalar>& u, const StaggeredField<Scalar>& w) {
  if (!w.matches(u.width(), u.height())) throw std::invalid_argument("coupling_magnitude: shape mismatch");
  return cell_magnitude(grad_forward(u) - w);
}

/// Coupling magnitude of a vector-valued image; channels are summed before
/// any square root is taken, which is the only place channels interact.
template <typename Scalar>
ScalarGrid<Scalar> coupling_magnitude(const MultiChannelImage<Scalar>& u, const FieldSet<Scalar>& w) {
  if (static_cast<Index>(w.size()) != u.channels()) throw std::invalid_argument("coupling_magnitude: channel count mismatch");
  ScalarGrid<Scalar> m = coupling_magnitude(u[0], w[0]);
  for (Index c = 1; c < u.channels(); ++c) m += coupling_magnitude(u[c], w[static_cast<std::size_t>(c)]);
  return m;
}

template <typename Scalar>
ScalarGrid<Scalar> phi_prime(const ScalarGrid<Scalar>& m, Scalar epsilon) {
  const GridArray<Scalar> s = m.array() + epsilon;
  if (!(s > 0).all()) throw std::domain_error("phi_prime: m + epsilon must be positive");
  return ScalarGrid<Scalar>(GridArray<Scalar>(s.rsqrt()));
}

/// Face diffusivities: the mean of phi' at the two cells adjacent to a face.
template <typename Scalar>
StaggeredField<Scalar> face_diffusivities(const ScalarGrid<Scalar>& m, Scalar epsilon) {
  const ScalarGrid<Scalar> g = phi_prime(m, epsilon);
  const Index width = m.width(), height = m.height();
  const auto& a = g.array();
  GridArray<Scalar> dx(height, width - 1);
  GridArray<Scalar> dy(height - 1, width);
  if (width > 1) dx = Scalar(0.5) * (a.leftCols(width - 1) + a.rightCols(width - 1));
  if (height > 1) dy = Scalar(0.5) * (a.topRows(height - 1) + a.bottomRows(height - 1));
  return StaggeredField<Scalar>(std::move(dx), std::move(dy));
}

/// S^1(w) = |w|^2, S^2(w) = staggered Jacobian norm with the mixed
/// Dirichlet/Neumann differences.
template <typename Scalar>
Scalar smoothness(const StaggeredField<Scalar>& w, ModelOrder order) {
  if (order == ModelOrder::first) return w.squared_norm();
  using namespace detail;
  return neg_adjoint_x(w.x_array()).square().sum() + diff_y(w.x_array()).square().sum() +
         diff_x(w.y_array()).square().sum() + neg_adjoint_y(w.y_array()).square().sum();
}

/// Gradient of 1/2 S(w).
template <typename Scalar>
StaggeredField<Scalar> smoothness_half_gradient(const StaggeredField<Scalar>& w, ModelOrder order) {
  if (order == ModelOrder::first) return w;
  return Scalar(-1) * laplacian_v(w);
}

namespace detail {
template <typename Scalar>
void require_consistent(const MultiChannelImage<Scalar>& f, const MultiChannelImage<Scalar>& u,
                        const FieldSet<Scalar>& w) {
  if (!f.same_shape(u)) throw std::invalid_argument("energy: f and u shapes differ");
  if (static_cast<Index>(w.size()) != u.channels()) throw std::invalid_argument("energy: channel count mismatch");
  for (const auto& wc : w) {
    if (!wc.matches(u.width(), u.height())) throw std::invalid_argument("energy: field shape mismatch");
  }
}
}  // namespace detail

template <typename Scalar>
Scalar total_energy(const MultiChannelImage<Scalar>& f, const MultiChannelImage<Scalar>& u, const FieldSet<Scalar>& w,
                    const ModelParams<Scalar>& params) {
  detail::require_consistent(f, u, w);
  Scalar data = 0, smooth = 0;
  for (Index c = 0; c < u.channels(); ++c) {
    data += squared_norm(u[c] - f[c]);
    smooth += smoothness(w[static_cast<std::size_t>(c)], params.order);
  }
  const ScalarGrid<Scalar> m = coupling_magnitude(u, w);
  const Scalar coupling = (m.array() + params.epsilon).sqrt().sum();
  return Scalar(0.5) * data + Scalar(0.5) * params.alpha * smooth + params.beta * coupling;
}

template <typename Scalar>
Scalar total_energy(const ScalarGrid<Scalar>& f, const ScalarGrid<Scalar>& u, const StaggeredField<Scalar>& w,
                    const ModelParams<Scalar>& params) {
  return total_energy(MultiChannelImage<Scalar>(f), MultiChannelImage<Scalar>(u), FieldSet<Scalar>{w}, params);
}

/// Energy with the coupling penaliser replaced by beta/2 |grad u - w|^2.
template <typename Scalar>
Scalar quadratic_coupling_energy(const MultiChannelImage<Scalar>& f, const MultiChannelImage<Scalar>& u,
                                 const FieldSet<Scalar>& w, const ModelParams<Scalar>& params) {
  detail::require_consistent(f, u, w);
  Scalar total = 0;
  for (Index c = 0; c < u.channels(); ++c) {
    const auto& wc = w[static_cast<std::size_t>(c)];
    total += Scalar(0.5) * squared_norm(u[c] - f[c]) + Scalar(0.5) * params.alpha * smoothness(wc, params.order) +
             Scalar(0.5) * params.beta * (grad_forward(u[c]) - wc).squared_norm();
  }
  return total;
}

template <typename Scalar>
struct EnergyGradient {
  std::vector<ScalarGrid<Scalar>> u;
  FieldSet<Scalar> w;

  Scalar squared_norm() const {
    Scalar s = 0;
    for (const auto& g : u) s += couplevar::squared_norm(g);
    for (const auto& g : w) s += g.squared_norm();
    return s;
  }
};

/// Analytic gradient of total_energy with respect to every cell of u and
/// every stored face of w. Requires m + eps > 0 everywhere.
template <typename Scalar>
EnergyGradient<Scalar> energy_gradient(const MultiChannelImage<Scalar>& f, const MultiChannelImage<Scalar>& u,
                                       const FieldSet<Scalar>& w, const ModelParams<Scalar>& params) {
  detail::require_consistent(f, u, w);
  const StaggeredField<Scalar> d = face_diffusivities(coupling_magnitude(u, w), params.epsilon);
  EnergyGradient<Scalar> g;
  for (Index c = 0; c < u.channels(); ++c) {
    const auto& wc = w[static_cast<std::size_t>(c)];
    const StaggeredField<Scalar> flux = params.beta * hadamard(d, grad_forward(u[c]) - wc);
    g.u.push_back(u[c] - f[c] - divergence(flux));
    g.w.push_back(params.alpha * smoothness_half_gradient(wc, params.order) - flux);
  }
  return g;
}

template <typename Scalar>
EnergyGradient<Scalar> quadratic_coupling_gradient(const MultiChannelImage<Scalar>& f,
                                                   const MultiChannelImage<Scalar>& u, const FieldSet<Scalar>& w,
                                                   const ModelParams<Scalar>& params) {
  detail::require_consistent(f, u, w);
  EnergyGradient<Scalar> g;
  for (Index c = 0; c < u.channels(); ++c) {
    const auto& wc = w[static_cast<std::size_t>(c)];
    const StaggeredField<Scalar> flux = params.beta * (grad_forward(u[c]) - wc);
    g.u.push_back(u[c] - f[c] - divergence(flux));
    g.w.push_back(params.alpha * smoothness_half_gradient(wc, params.order) - flux);
  }
  return g;
}

}  // namespace couplevar
