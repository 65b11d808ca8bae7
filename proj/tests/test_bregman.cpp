#include <doctest.h>

#include "couplevar/bregman.hpp"
#include "oracles.hpp"

using namespace couplevar;

namespace {

SolverConfig<double> config(int order, double alpha, double beta) {
  SolverConfig<double> c;
  c.params.order = model_order_from_int(order);
  c.params.alpha = alpha;
  c.params.beta = beta;
  return c;
}

BregmanState<double> random_state(Index M, Index N, std::mt19937_64& rng) {
  BregmanState<double> s = BregmanState<double>::initial(Image(oracle::random_grid(M, N, rng)));
  s.v[0] = oracle::random_field(M, N, rng, 10);
  s.p[0] = oracle::random_field(M, N, rng, 10);
  s.b[0] = oracle::random_field(M, N, rng, 10);
  return s;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = config(1, 1, 1);
  CHECK(c.lambda_value() == 1);
  CHECK(config(2, 1, 3).lambda_value() == 6);
  c.lambda = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = config(1, 1, 1);
  c.params.epsilon = 0;
  CHECK_THROWS_AS(solve(Grid(4, 4), c), std::invalid_argument);
  c = config(1, 1, 1);
  c.sweeps = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = config(1, 1, 1);
  Grid bad(3, 3);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve(bad, c), std::invalid_argument);
}

TEST_CASE("constant input is a fixed point") {
  const auto result = solve(Grid(8, 6, 42.0), config(1, 10, 5));
  CHECK(result.converged);
  CHECK(result.iterations <= 2);
  CHECK((result.u[0].array() == 42.0).all());
  CHECK(result.v[0].squared_norm() == 0);
}

TEST_CASE("subproblem_u with zero auxiliaries keeps a constant image") {
  const Image f(Grid(5, 5, 3.0));
  const auto s = BregmanState<double>::initial(f);
  const auto u = subproblem_u(s, f, config(1, 1, 1));
  CHECK((u[0].array() == 3.0).all());
}

TEST_CASE("Jacobi on the u-system decreases its residual monotonically") {
  std::mt19937_64 rng(41);
  const auto s = random_state(8, 8, rng);
  const Grid f = oracle::random_grid(8, 8, rng);
  const double lambda = 5;
  const Grid rhs = f - lambda * divergence(s.p[0] + s.v[0] - s.b[0]);
  Grid u = s.u[0];
  double last = bregman::u_system_residual(u, rhs, lambda);
  for (int k = 0; k < 50; ++k) {
    u = bregman::u_step(u, f, s.p[0], s.v[0], s.b[0], lambda, 1);
    const double r = bregman::u_system_residual(u, rhs, lambda);
    REQUIRE(r < last);
    last = r;
  }
}

TEST_CASE("subproblem_v first order is the exact pointwise formula") {
  std::mt19937_64 rng(42);
  auto s = random_state(6, 5, rng);
  auto c = config(1, 4, 4);  // alpha == lambda
  const Field v = subproblem_v(s, c)[0];
  const Field target = 0.5 * (grad_forward(s.u[0]) - s.p[0] + s.b[0]);
  CHECK((v - target).squared_norm() < 1e-24);

  c.params.alpha = 1e12;
  CHECK(subproblem_v(s, c)[0].squared_norm() < 1e-12);
}

TEST_CASE("subproblem_v second order converges to the dense solve") {
  std::mt19937_64 rng(43);
  const Index M = 6, N = 6;
  auto s = random_state(M, N, rng);
  auto c = config(2, 3, 2);
  c.sweeps = 5000;
  const double lambda = c.lambda_value();
  const Field v = subproblem_v(s, c)[0];

  const oracle::Mat K = oracle::smoothness_matrix(M, N);
  const Index F = K.cols();
  const oracle::Mat A = lambda * oracle::Mat::Identity(F, F) + c.params.alpha * K.transpose() * K;
  const oracle::Vec rhs = lambda * oracle::flatten(grad_forward(s.u[0]) - s.p[0] + s.b[0]);
  const oracle::Vec ref = A.ldlt().solve(rhs);
  CHECK((oracle::flatten(v) - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("update_p formula") {
  std::mt19937_64 rng(44);
  auto s = random_state(5, 5, rng);
  auto c = config(1, 1, 2);
  const Field q = grad_forward(s.u[0]) - s.v[0] + s.b[0];

  s.p[0] = Field(5, 5);  // d = 1000 everywhere
  const Field p0 = update_p(s, c)[0];
  const double scale = 2.0 / (2.0 + 2.0 * 1000.0);
  CHECK((p0.x_array() - scale * q.x_array()).abs().maxCoeff() < 1e-12);

  s.p[0] = 1e12 * oracle::random_field(5, 5, rng, 1);
  s.p[0].x_values() += 1e12;
  const Field big = update_p(s, c)[0];
  CHECK((big - q).squared_norm() < 1e-8 * q.squared_norm());
}

TEST_CASE("update_b telescopes exactly") {
  std::mt19937_64 rng(45);
  const auto s = random_state(6, 4, rng);
  const Field b = update_b(s)[0];
  const Field expect = grad_forward(s.u[0]) - s.v[0] - s.p[0];
  CHECK(((b - s.b[0]) - expect).squared_norm() < 1e-20);
}

TEST_CASE("residual is one at the initial state") {
  std::mt19937_64 rng(46);
  const Image f(oracle::random_grid(7, 7, rng));
  const auto s = BregmanState<double>::initial(f);
  CHECK(residual(s, f, config(2, 2, 2)) == 1);
  CHECK(residual(BregmanState<double>::initial(Image(Grid(3, 3, 1.0))), Image(Grid(3, 3, 1.0)), config(1, 1, 1)) == 0);
}

TEST_CASE("split Bregman matches the Newton oracle on 8x8") {
  std::mt19937_64 rng(47);
  for (int order : {1, 2}) {
    CAPTURE(order);
    const Grid f = oracle::random_grid(8, 8, rng);
    const double alpha = order == 1 ? 10 : 100, beta = 5;
    const auto c = config(order, alpha, beta);
    const auto result = solve(f, c);
    REQUIRE(result.converged);
    const auto ref = oracle::Minimiser{8, 8, order, alpha, beta, 1e-6}.run(f);
    CHECK(oracle::rms(result.u[0], ref.u) <= 1e-4);
    const double e = oracle::energy(f, result.u[0], result.v[0], order, alpha, beta, 1e-6);
    CHECK(std::abs(e - ref.energy) <= 1e-6 * ref.energy);
    CHECK(e <= oracle::energy(f, f, Field(8, 8), order, alpha, beta, 1e-6));
    CHECK(residual(BregmanState<double>{Image(ref.u), {ref.w}, {}, {}, 0}, Image(f), c) <= 1e-6);

    // At the minimiser p = grad u - v is reproduced by one update.
    BregmanState<double> fixed{Image(ref.u), {ref.w}, {grad_forward(ref.u) - ref.w}, {}, 0};
    fixed.b = {Field(8, 8)};
    const auto& p = fixed.p[0];
    const Field d = face_diffusivities(cell_magnitude(p), c.params.epsilon);
    fixed.b[0] = (c.params.beta / c.lambda_value()) * hadamard(d, p);
    const Field next = update_p(fixed, c)[0];
    CHECK(std::sqrt((next - p).squared_norm()) <= 1e-6 * (1 + std::sqrt(p.squared_norm())));
  }
}

TEST_CASE("quadratic coupling equals Tikhonov with alpha beta / (alpha + beta)") {
  std::mt19937_64 rng(48);
  const Grid f = oracle::random_grid(16, 12, rng);
  auto c = config(1, 10, 10);
  c.mode = SolverMode::quadratic_coupling;
  c.tolerance = 1e-13;
  const auto result = solve(f, c);
  CHECK(result.converged);
  CHECK(oracle::rms(result.u[0], oracle::tikhonov(f, 5.0)) <= 1e-8);
}

TEST_CASE("tv mode keeps v at zero") {
  std::mt19937_64 rng(49);
  const Grid f = oracle::random_grid(10, 10, rng);
  auto c = config(1, 1, 20);
  c.mode = SolverMode::tv_limit;
  const auto result = solve(f, c);
  CHECK(result.converged);
  CHECK(result.v[0].squared_norm() == 0);
}

TEST_CASE("coupling residual is non-increasing in beta") {
  std::mt19937_64 rng(50);
  const Grid f = oracle::random_grid(12, 12, rng);
  double last = std::numeric_limits<double>::infinity();
  for (double beta : {1e2, 1e3, 1e4}) {
    auto c = config(1, 10, beta);
    c.tolerance = 1e-8;
    c.max_iterations = 100000;
    const auto r = solve(f, c);
    const double coupling = std::sqrt((grad_forward(r.u[0]) - r.v[0]).squared_norm());
    CHECK(coupling <= last);
    last = coupling;
  }
}

TEST_CASE("trace is ordered and ends at the tolerance") {
  std::mt19937_64 rng(51);
  auto c = config(1, 10, 5);
  c.record_trace = true;
  const auto result = solve(oracle::random_grid(16, 16, rng), c);
  REQUIRE(result.converged);
  REQUIRE(result.trace.size() == static_cast<std::size_t>(result.iterations) + 1);
  CHECK(result.trace.front().relative_residual == 1);
  CHECK(result.trace.back().relative_residual <= 1e-6);
  for (std::size_t k = 1; k < result.trace.size(); ++k) {
    CHECK(result.trace[k].iteration > result.trace[k - 1].iteration);
    CHECK(result.trace[k].elapsed_ms >= result.trace[k - 1].elapsed_ms);
  }
  CHECK(result.trace.back().energy <= result.trace.front().energy);
}

TEST_CASE("iteration cap flags non-convergence without throwing") {
  std::mt19937_64 rng(52);
  auto c = config(1, 10, 5);
  c.max_iterations = 3;
  const auto result = solve(oracle::random_grid(8, 8, rng), c);
  CHECK_FALSE(result.converged);
  CHECK(result.iterations == 3);
}

TEST_CASE("repeated runs are bitwise identical, also with parallel channels") {
  std::mt19937_64 rng(53);
  const Image f(std::vector<Grid>{oracle::random_grid(12, 10, rng), oracle::random_grid(12, 10, rng),
                                  oracle::random_grid(12, 10, rng)});
  auto c = config(2, 50, 10);
  c.max_iterations = 40;
  const auto a = solve(f, c);
  const auto b = solve(f, c);
  c.parallel_channels = true;
  const auto p = solve(f, c);
  for (Index k = 0; k < 3; ++k) {
    CHECK((a.u[k].array() == b.u[k].array()).all());
    CHECK((a.u[k].array() == p.u[k].array()).all());
  }
}

TEST_CASE("flipped input gives the flipped solution") {
  std::mt19937_64 rng(54);
  const Grid f = oracle::random_grid(9, 7, rng);
  auto c = config(2, 20, 5);
  c.max_iterations = 30;
  const auto a = solve(f, c);
  const auto b = solve(flip_x(f), c);
  CHECK((flip_x(a.u[0]).array() == b.u[0].array()).all());
}
