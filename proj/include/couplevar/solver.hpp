#pragma once

// Configuration, results and the shared stopping criterion of both solvers.

#include "couplevar/energy.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace couplevar {

enum class SolverMode {
  coupled,             // sqrt coupling penaliser
  tv_limit,            // v held at zero: the alpha -> infinity limit
  quadratic_coupling,  // beta/2 |grad u - v|^2 coupling
};

template <typename Scalar = double>
struct SolverConfig {
  ModelParams<Scalar> params;
  /// Split Bregman penalty; defaults to order * beta.
  std::optional<Scalar> lambda;
  int max_iterations = 10000;
  Scalar tolerance = Scalar(1e-6);
  /// Jacobi sweeps per linear subproblem (split Bregman).
  int sweeps = 10;
  SolverMode mode = SolverMode::coupled;
  bool record_trace = false;
  bool parallel_channels = false;
  /// Inner conjugate-gradient rule of the alternating baseline, relative to
  /// the inner initial residual.
  Scalar cg_tolerance = Scalar(1e-2);
  int cg_max_iterations = 200;
  /// Wall-clock budget for the outer loop in milliseconds; 0 disables it.
  double time_limit_ms = 0;

  Scalar lambda_value() const { return lambda ? *lambda : Scalar(as_int(params.order)) * params.beta; }

  void validate() const {
    params.validate();
    if (mode != SolverMode::quadratic_coupling && !(params.epsilon > 0)) {
      throw std::invalid_argument("solvers require epsilon > 0");
    }
    if (!(lambda_value() > 0)) throw std::invalid_argument("lambda must be positive");
    if (!(tolerance > 0)) throw std::invalid_argument("tolerance must be positive");
    if (sweeps < 1) throw std::invalid_argument("sweeps must be at least 1");
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be non-negative");
    if (!(cg_tolerance > 0) || cg_max_iterations < 1) throw std::invalid_argument("invalid inner CG settings");
    if (!(time_limit_ms >= 0)) throw std::invalid_argument("time limit must be non-negative");
  }
};

struct TraceEntry {
  int iteration = 0;
  double elapsed_ms = 0;
  double relative_residual = 0;
  double energy = 0;
};

using ConvergenceTrace = std::vector<TraceEntry>;

template <typename Scalar = double>
struct SolveResult {
  MultiChannelImage<Scalar> u;
  FieldSet<Scalar> v;
  ConvergenceTrace trace;
  bool converged = false;
  int iterations = 0;
  Scalar relative_residual = 0;
  double elapsed_ms = 0;
};

/// Norm of the exact (non-lagged) stationarity residual of the energy the
/// mode minimises.
template <typename Scalar>
Scalar absolute_residual(const MultiChannelImage<Scalar>& f, const MultiChannelImage<Scalar>& u,
                         const FieldSet<Scalar>& v, const SolverConfig<Scalar>& config) {
  switch (config.mode) {
    case SolverMode::quadratic_coupling:
      return std::sqrt(quadratic_coupling_gradient(f, u, v, config.params).squared_norm());
    case SolverMode::tv_limit: {
      Scalar s = 0;
      for (const auto& g : energy_gradient(f, u, v, config.params).u) s += squared_norm(g);
      return std::sqrt(s);
    }
    case SolverMode::coupled:
      break;
  }
  return std::sqrt(energy_gradient(f, u, v, config.params).squared_norm());
}

template <typename Scalar>
FieldSet<Scalar> zero_fields(const MultiChannelImage<Scalar>& f) {
  return FieldSet<Scalar>(static_cast<std::size_t>(f.channels()), StaggeredField<Scalar>(f.width(), f.height()));
}

/// Residual at the initial state u = f, v = 0.
template <typename Scalar>
Scalar initial_residual(const MultiChannelImage<Scalar>& f, const SolverConfig<Scalar>& config) {
  return absolute_residual(f, f, zero_fields(f), config);
}

/// Residual relative to the initial state; 0 when the initial residual is 0.
template <typename Scalar>
Scalar relative_residual(const MultiChannelImage<Scalar>& f, const MultiChannelImage<Scalar>& u,
                         const FieldSet<Scalar>& v, const SolverConfig<Scalar>& config) {
  const Scalar r0 = initial_residual(f, config);
  if (r0 == Scalar(0)) return 0;
  return absolute_residual(f, u, v, config) / r0;
}

template <typename Scalar>
Scalar mode_energy(const MultiChannelImage<Scalar>& f, const MultiChannelImage<Scalar>& u, const FieldSet<Scalar>& v,
                   const SolverConfig<Scalar>& config) {
  if (config.mode == SolverMode::quadratic_coupling) return quadratic_coupling_energy(f, u, v, config.params);
  return total_energy(f, u, v, config.params);
}

template <typename Scalar>
void require_solvable(const MultiChannelImage<Scalar>& f, const SolverConfig<Scalar>& config) {
  config.validate();
  if (f.channels() < 1) throw std::invalid_argument("empty input image");
  for (const auto& c : f.grids()) {
    if (!all_finite(c)) throw std::invalid_argument("input image contains non-finite values");
  }
}

/// Thread cap from COUPLEVAR_THREADS, else the hardware concurrency.
inline unsigned max_threads() {
  if (const char* env = std::getenv("COUPLEVAR_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(c) for every channel. In parallel mode channels are spread over
/// at most max_threads() workers; fn must only touch channel c.
template <typename Fn>
void for_each_channel(Index channels, bool parallel, Fn&& fn) {
  const unsigned workers = parallel ? std::min<unsigned>(max_threads(), static_cast<unsigned>(channels)) : 1u;
  if (workers <= 1) {
    for (Index c = 0; c < channels; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (Index c = t; c < channels; c += workers) fn(c);
    });
  }
  for (auto& th : pool) th.join();
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

template <typename Scalar>
bool out_of_time(const SolverConfig<Scalar>& config, const Stopwatch& clock) {
  return config.time_limit_ms > 0 && clock.elapsed_ms() >= config.time_limit_ms;
}

}  // namespace couplevar
