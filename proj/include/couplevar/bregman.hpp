#pragma once

// Split Bregman minimisation of the coupling energy.
//
// With p = grad u - v split off and Bregman variable b, one outer step is
//   u <- Jacobi sweeps on (I - lambda Lap_u) u = f - lambda div(p + v - b)
//   v <- lambda/(alpha + lambda) (grad u - p + b)                  (order 1)
//        Jacobi sweeps on (lambda I - alpha Lap_v) v = lambda (grad u - p + b)
//   p <- lambda q / (lambda + beta d(p_old)),  q = grad u - v + b
//   b <- b + grad u - v - p
// where d holds the face diffusivities of the previous p. The right-hand
// side sign of the u-system follows from divergence = -grad^T.

#include "couplevar/cg.hpp"
#include "couplevar/solver.hpp"

namespace couplevar {

template <typename Scalar = double>
struct BregmanState {
  MultiChannelImage<Scalar> u;
  FieldSet<Scalar> v, p, b;
  int iteration = 0;

  static BregmanState initial(const MultiChannelImage<Scalar>& f) {
    BregmanState s;
    s.u = f;
    s.v = s.p = s.b = zero_fields(f);
    return s;
  }
};

namespace bregman {

/// `sweeps` warm-started Jacobi iterations for one channel's u-system.
template <typename Scalar>
ScalarGrid<Scalar> u_step(const ScalarGrid<Scalar>& u, const ScalarGrid<Scalar>& f, const StaggeredField<Scalar>& p,
                          const StaggeredField<Scalar>& v, const StaggeredField<Scalar>& b, Scalar lambda,
                          int sweeps) {
  const ScalarGrid<Scalar> rhs = f - lambda * divergence(p + v - b);
  const GridArray<Scalar> diag = Scalar(1) + lambda * laplacian_u_degree<Scalar>(u.width(), u.height());
  GridArray<Scalar> x = u.array();
  GridArray<Scalar> next;
  for (int s = 0; s < sweeps; ++s) {
    detail::jacobi_sweep(x, rhs.array(), diag, lambda, next);
    x.swap(next);
  }
  return ScalarGrid<Scalar>(std::move(x));
}

/// Residual norm of (I - lambda Lap_u) u = rhs, used by tests and diagnostics.
template <typename Scalar>
Scalar u_system_residual(const ScalarGrid<Scalar>& u, const ScalarGrid<Scalar>& rhs, Scalar lambda) {
  const ScalarGrid<Scalar> r = rhs - (u - lambda * laplacian_u(u));
  return std::sqrt(squared_norm(r));
}

template <typename Scalar>
StaggeredField<Scalar> v_step(const StaggeredField<Scalar>& v, const ScalarGrid<Scalar>& u,
                             const StaggeredField<Scalar>& p, const StaggeredField<Scalar>& b,
                             const ModelParams<Scalar>& params, Scalar lambda, int sweeps) {
  const StaggeredField<Scalar> target = grad_forward(u) - p + b;
  if (params.order == ModelOrder::first) return (lambda / (params.alpha + lambda)) * target;
  const StaggeredField<Scalar> rhs = lambda * target;
  const StaggeredField<Scalar> degree = laplacian_v_degree<Scalar>(u.width(), u.height());
  const GridArray<Scalar> diag_x = lambda + params.alpha * degree.x_array();
  const GridArray<Scalar> diag_y = lambda + params.alpha * degree.y_array();
  GridArray<Scalar> x = v.x_array(), y = v.y_array();
  GridArray<Scalar> next;
  for (int s = 0; s < sweeps; ++s) {
    detail::jacobi_sweep(x, rhs.x_array(), diag_x, params.alpha, next);
    x.swap(next);
    detail::jacobi_sweep(y, rhs.y_array(), diag_y, params.alpha, next);
    y.swap(next);
  }
  return StaggeredField<Scalar>(std::move(x), std::move(y));
}

/// Lagged-diffusivity update of all channels' p; channels share the
/// diffusivity computed from the summed magnitude of the old p.
template <typename Scalar>
FieldSet<Scalar> p_step(const MultiChannelImage<Scalar>& u, const FieldSet<Scalar>& v, const FieldSet<Scalar>& p,
                        const FieldSet<Scalar>& b, const ModelParams<Scalar>& params, Scalar lambda) {
  const StaggeredField<Scalar> d = face_diffusivities(cell_magnitude(p), params.epsilon);
  const GridArray<Scalar> scale_x = lambda / (lambda + params.beta * d.x_array());
  const GridArray<Scalar> scale_y = lambda / (lambda + params.beta * d.y_array());
  FieldSet<Scalar> out;
  out.reserve(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) {
    const StaggeredField<Scalar> q = grad_forward(u[static_cast<Index>(c)]) - v[c] + b[c];
    out.emplace_back(GridArray<Scalar>(scale_x * q.x_array()), GridArray<Scalar>(scale_y * q.y_array()));
  }
  return out;
}

}  // namespace bregman

template <typename Scalar>
std::vector<ScalarGrid<Scalar>> subproblem_u(const BregmanState<Scalar>& state, const MultiChannelImage<Scalar>& f,
                                             const SolverConfig<Scalar>& config) {
  std::vector<ScalarGrid<Scalar>> out(static_cast<std::size_t>(f.channels()));
  const Scalar lambda = config.lambda_value();
  for_each_channel(f.channels(), config.parallel_channels, [&](Index c) {
    const auto k = static_cast<std::size_t>(c);
    out[k] = bregman::u_step(state.u[c], f[c], state.p[k], state.v[k], state.b[k], lambda, config.sweeps);
  });
  return out;
}

template <typename Scalar>
FieldSet<Scalar> subproblem_v(const BregmanState<Scalar>& state, const SolverConfig<Scalar>& config) {
  FieldSet<Scalar> out(state.v.size());
  const Scalar lambda = config.lambda_value();
  for_each_channel(state.u.channels(), config.parallel_channels, [&](Index c) {
    const auto k = static_cast<std::size_t>(c);
    out[k] = bregman::v_step(state.v[k], state.u[c], state.p[k], state.b[k], config.params, lambda, config.sweeps);
  });
  return out;
}

template <typename Scalar>
FieldSet<Scalar> update_p(const BregmanState<Scalar>& state, const SolverConfig<Scalar>& config) {
  return bregman::p_step(state.u, state.v, state.p, state.b, config.params, config.lambda_value());
}

template <typename Scalar>
FieldSet<Scalar> update_b(const BregmanState<Scalar>& state) {
  FieldSet<Scalar> out;
  out.reserve(state.b.size());
  for (std::size_t c = 0; c < state.b.size(); ++c) {
    out.push_back(state.b[c] + grad_forward(state.u[static_cast<Index>(c)]) - state.v[c] - state.p[c]);
  }
  return out;
}

/// Relative stationarity residual of a state (1 at the initial state).
template <typename Scalar>
Scalar residual(const BregmanState<Scalar>& state, const MultiChannelImage<Scalar>& f,
                const SolverConfig<Scalar>& config) {
  return relative_residual(f, state.u, state.v, config);
}

/// One complete outer iteration: u, v, p, then b.
template <typename Scalar>
void bregman_iteration(BregmanState<Scalar>& state, const MultiChannelImage<Scalar>& f,
                       const SolverConfig<Scalar>& config) {
  state.u = MultiChannelImage<Scalar>(subproblem_u(state, f, config));
  if (config.mode != SolverMode::tv_limit) state.v = subproblem_v(state, config);
  state.p = update_p(state, config);
  state.b = update_b(state);
  ++state.iteration;
}

namespace detail {

// Quadratic coupling: the (u, v) optimality system is linear and solved in
// one conjugate-gradient run over all channels stacked.
template <typename Scalar>
SolveResult<Scalar> solve_quadratic_coupling(const MultiChannelImage<Scalar>& f, const SolverConfig<Scalar>& config) {
  Stopwatch clock;
  const Index width = f.width(), height = f.height(), channels = f.channels();
  const Index cells = width * height;
  const Index faces = StaggeredField<Scalar>(width, height).size();
  const Index block = cells + faces;
  const auto& params = config.params;

  auto unpack_u = [&](const Vector<Scalar>& x, Index c) {
    return grid_from_vector<Scalar>(x.segment(c * block, cells), width, height);
  };
  auto unpack_v = [&](const Vector<Scalar>& x, Index c) {
    return field_from_vector<Scalar>(x.segment(c * block + cells, faces), width, height);
  };

  auto apply = [&](const Vector<Scalar>& x) {
    Vector<Scalar> y(x.size());
    for (Index c = 0; c < channels; ++c) {
      const ScalarGrid<Scalar> u = unpack_u(x, c);
      const StaggeredField<Scalar> v = unpack_v(x, c);
      const StaggeredField<Scalar> flux = params.beta * (grad_forward(u) - v);
      y.segment(c * block, cells) = to_vector(u - divergence(flux));
      y.segment(c * block + cells, faces) = to_vector(params.alpha * smoothness_half_gradient(v, params.order) - flux);
    }
    return y;
  };

  Vector<Scalar> rhs = Vector<Scalar>::Zero(block * channels);
  Vector<Scalar> x0 = Vector<Scalar>::Zero(block * channels);
  for (Index c = 0; c < channels; ++c) {
    rhs.segment(c * block, cells) = to_vector(f[c]);
    x0.segment(c * block, cells) = to_vector(f[c]);
  }

  SolveResult<Scalar> result;
  const auto record = [&](int iteration, Scalar rel, const Vector<Scalar>* x) {
    if (!config.record_trace) return;
    double energy = 0;
    if (x != nullptr) {
      std::vector<ScalarGrid<Scalar>> us;
      FieldSet<Scalar> vs;
      for (Index c = 0; c < channels; ++c) {
        us.push_back(unpack_u(*x, c));
        vs.push_back(unpack_v(*x, c));
      }
      energy = static_cast<double>(quadratic_coupling_energy(f, MultiChannelImage<Scalar>(us), vs, params));
    }
    result.trace.push_back({iteration, clock.elapsed_ms(), static_cast<double>(rel), energy});
  };
  record(0, Scalar(1), &x0);

  // The observer cannot see x, so the energy column is filled for the
  // initial and final entries only.
  const CgResult<Scalar> cg = cg_solve<Scalar>(apply, rhs, x0, config.max_iterations, config.tolerance,
                                               [&](int k, Scalar rel) { record(k, rel, nullptr); });

  std::vector<ScalarGrid<Scalar>> us;
  for (Index c = 0; c < channels; ++c) {
    us.push_back(unpack_u(cg.x, c));
    result.v.push_back(unpack_v(cg.x, c));
  }
  result.u = MultiChannelImage<Scalar>(std::move(us));
  result.iterations = cg.iterations;
  result.relative_residual = relative_residual(f, result.u, result.v, config);
  result.converged = cg.converged;
  if (config.record_trace && !result.trace.empty()) {
    result.trace.back().energy = static_cast<double>(quadratic_coupling_energy(f, result.u, result.v, params));
  }
  result.elapsed_ms = clock.elapsed_ms();
  return result;
}

}  // namespace detail

/// Split Bregman solve from u = f, v = p = b = 0. Iterates until the
/// relative stationarity residual drops to config.tolerance or
/// config.max_iterations outer steps have run; a capped run is returned with
/// converged = false.
template <typename Scalar>
SolveResult<Scalar> solve(const MultiChannelImage<Scalar>& f, const SolverConfig<Scalar>& config) {
  require_solvable(f, config);
  if (config.mode == SolverMode::quadratic_coupling) return detail::solve_quadratic_coupling(f, config);

  Stopwatch clock;
  BregmanState<Scalar> state = BregmanState<Scalar>::initial(f);
  const Scalar r0 = initial_residual(f, config);
  SolveResult<Scalar> result;
  auto record = [&](Scalar rel) {
    if (!config.record_trace) return;
    result.trace.push_back({state.iteration, clock.elapsed_ms(), static_cast<double>(rel),
                            static_cast<double>(mode_energy(f, state.u, state.v, config))});
  };

  Scalar rel = r0 == Scalar(0) ? Scalar(0) : Scalar(1);
  record(rel);
  while (rel > config.tolerance && state.iteration < config.max_iterations && !out_of_time(config, clock)) {
    bregman_iteration(state, f, config);
    rel = absolute_residual(f, state.u, state.v, config) / r0;
    record(rel);
  }

  result.converged = rel <= config.tolerance;
  result.iterations = state.iteration;
  result.relative_residual = rel;
  result.u = std::move(state.u);
  result.v = std::move(state.v);
  result.elapsed_ms = clock.elapsed_ms();
  return result;
}

template <typename Scalar>
SolveResult<Scalar> solve(const ScalarGrid<Scalar>& f, const SolverConfig<Scalar>& config) {
  return solve(MultiChannelImage<Scalar>(f), config);
}

}  // namespace couplevar
