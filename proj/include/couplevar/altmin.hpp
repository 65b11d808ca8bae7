#pragma once

// Alternating minimisation baseline. Each outer step freezes the face
// diffusivities d at the old iterate and then
//   u <- CG on  u - beta div(d grad u) = f - beta div(d v)
//   v <- beta d grad u / (alpha + beta d)                        (order 1)
//        CG on  (beta D - alpha Lap_v) v = beta D grad u         (order 2)
// The quadratic-coupling mode uses d = 1; the TV limit skips the v-step.

#include "couplevar/cg.hpp"
#include "couplevar/solver.hpp"

namespace couplevar {

namespace altmin {

template <typename Scalar>
ScalarGrid<Scalar> u_step(const ScalarGrid<Scalar>& u, const ScalarGrid<Scalar>& f, const StaggeredField<Scalar>& v,
                          const StaggeredField<Scalar>& d, const SolverConfig<Scalar>& config) {
  const Scalar beta = config.params.beta;
  const Index width = u.width(), height = u.height();
  auto apply = [&](const Vector<Scalar>& x) {
    const ScalarGrid<Scalar> g = grid_from_vector<Scalar>(x, width, height);
    return to_vector(g - beta * divergence(hadamard(d, grad_forward(g))));
  };
  const Vector<Scalar> rhs = to_vector(f - beta * divergence(hadamard(d, v)));
  const CgResult<Scalar> cg = cg_solve<Scalar>(apply, rhs, to_vector(u), config.cg_max_iterations, config.cg_tolerance);
  return grid_from_vector<Scalar>(cg.x, width, height);
}

template <typename Scalar>
StaggeredField<Scalar> v_step(const StaggeredField<Scalar>& v, const ScalarGrid<Scalar>& u,
                              const StaggeredField<Scalar>& d, const SolverConfig<Scalar>& config) {
  const auto& params = config.params;
  const StaggeredField<Scalar> gu = grad_forward(u);
  if (params.order == ModelOrder::first) {
    return StaggeredField<Scalar>(
        GridArray<Scalar>(params.beta * d.x_array() * gu.x_array() / (params.alpha + params.beta * d.x_array())),
        GridArray<Scalar>(params.beta * d.y_array() * gu.y_array() / (params.alpha + params.beta * d.y_array())));
  }
  const Index width = u.width(), height = u.height();
  auto apply = [&](const Vector<Scalar>& x) {
    const StaggeredField<Scalar> w = field_from_vector<Scalar>(x, width, height);
    return to_vector(params.beta * hadamard(d, w) - params.alpha * laplacian_v(w));
  };
  const Vector<Scalar> rhs = to_vector(params.beta * hadamard(d, gu));
  const CgResult<Scalar> cg = cg_solve<Scalar>(apply, rhs, to_vector(v), config.cg_max_iterations, config.cg_tolerance);
  return field_from_vector<Scalar>(cg.x, width, height);
}

}  // namespace altmin

/// Alternating minimisation with lagged diffusivities and CG inner solves.
/// Same initial state, residual and stopping rule as solve().
template <typename Scalar>
SolveResult<Scalar> solve_altmin(const MultiChannelImage<Scalar>& f, const SolverConfig<Scalar>& config) {
  require_solvable(f, config);
  Stopwatch clock;
  MultiChannelImage<Scalar> u = f;
  FieldSet<Scalar> v = zero_fields(f);
  const Scalar r0 = initial_residual(f, config);
  const Index channels = f.channels();

  SolveResult<Scalar> result;
  int iteration = 0;
  auto record = [&](Scalar rel) {
    if (!config.record_trace) return;
    result.trace.push_back({iteration, clock.elapsed_ms(), static_cast<double>(rel),
                            static_cast<double>(mode_energy(f, u, v, config))});
  };

  Scalar rel = r0 == Scalar(0) ? Scalar(0) : Scalar(1);
  record(rel);
  while (rel > config.tolerance && iteration < config.max_iterations && !out_of_time(config, clock)) {
    StaggeredField<Scalar> d(f.width(), f.height());
    if (config.mode == SolverMode::quadratic_coupling) {
      d = StaggeredField<Scalar>(GridArray<Scalar>::Ones(d.x_array().rows(), d.x_array().cols()),
                                 GridArray<Scalar>::Ones(d.y_array().rows(), d.y_array().cols()));
    } else {
      d = face_diffusivities(coupling_magnitude(u, v), config.params.epsilon);
    }
    for_each_channel(channels, config.parallel_channels, [&](Index c) {
      const auto k = static_cast<std::size_t>(c);
      u[c] = altmin::u_step(u[c], f[c], v[k], d, config);
      if (config.mode != SolverMode::tv_limit) v[k] = altmin::v_step(v[k], u[c], d, config);
    });
    ++iteration;
    rel = absolute_residual(f, u, v, config) / r0;
    record(rel);
  }

  result.converged = rel <= config.tolerance;
  result.iterations = iteration;
  result.relative_residual = rel;
  result.u = std::move(u);
  result.v = std::move(v);
  result.elapsed_ms = clock.elapsed_ms();
  return result;
}

template <typename Scalar>
SolveResult<Scalar> solve_altmin(const ScalarGrid<Scalar>& f, const SolverConfig<Scalar>& config) {
  return solve_altmin(MultiChannelImage<Scalar>(f), config);
}

}  // namespace couplevar
