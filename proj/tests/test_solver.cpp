#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tvp/error.hpp"
#include "tvp/phantom.hpp"
#include "tvp/solver.hpp"

using namespace tvp;

namespace {

ForwardModel tiny_model() {
  const Grid g = Grid::centered({8, 8, 8});
  return ForwardModel(g, TiltGeometry::uniform(8, -60, 60, g));
}

double data_term(const Volume& f, const ProjectionStack& g, const ForwardModel& m) {
  const auto tf = m.apply(f);
  double s = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) s += (tf.data()[n] - g.data()[n]) * (tf.data()[n] - g.data()[n]);
  return 0.5 * m.pixel_area() * s;
}

bool non_increasing(const std::vector<double>& t) {
  for (std::size_t k = 1; k < t.size(); ++k)
    if (t[k] > t[k - 1]) return false;
  return true;
}

} // namespace

TEST_CASE("objective: components") {
  const auto m = tiny_model();
  std::mt19937_64 rng(61);
  const auto f = testutil::random_volume(m.grid(), rng);
  ProjectionStack g(m.geometry());
  std::normal_distribution<double> n;
  for (double& x : g.data()) x = n(rng);

  double gg = 0.0;
  for (double x : g.data()) gg += x * x;
  CHECK(objective(Volume(m.grid()), g, m, {2.0, 0.0}) == doctest::Approx(0.5 * m.pixel_area() * gg).epsilon(1e-13));
  CHECK(objective(f, m.apply(f), m, {0.0, 0.0}) == 0.0);
  const TvConfig tv{0.7, 1e-2};
  CHECK(objective(f, g, m, tv) == doctest::Approx(tv_value(f, tv) + data_term(f, g, m)).epsilon(1e-13));
  CHECK_THROWS_AS((void)objective(Volume(Grid::centered({8, 8, 9})), g, m, tv), ShapeError);
}

TEST_CASE("zero data gives the zero reconstruction") {
  const auto m = tiny_model();
  SolverConfig cfg;
  cfg.tv = {1.0, 3e-4};
  const auto r = solve(ProjectionStack(m.geometry()), m, cfg);
  CHECK(r.converged);
  CHECK(r.iterations_used <= 2);
  CHECK(linf_norm(r.reconstruction) == 0.0);
}

TEST_CASE("lambda = 0 drives the residual of exact data to zero") {
  const auto m = tiny_model();
  const auto f = rasterize_ball({{0.3, -0.2, 0.1}, 4.0, 1.0}, m.grid());
  const auto g = m.apply(f);
  SolverConfig cfg;
  cfg.tv = {0.0, 1e-8};
  cfg.max_iters = 500;
  cfg.rel_change_tol = 0.0;
  const auto r = solve(g, m, cfg);
  REQUIRE(r.objective_trace.size() >= 2);
  CHECK(non_increasing(r.objective_trace));
  const double initial = data_term(Volume(m.grid()), g, m);
  CHECK(data_term(r.reconstruction, g, m) <= 1e-6 * initial);
  CHECK(r.objective_trace.front() == doctest::Approx(initial).epsilon(1e-13));

  // plain gradient descent with the same iteration budget gets less far
  Volume h(m.grid());
  const double step = 1.0 / 60.0;
  for (int it = 0; it < 500; ++it) {
    auto res = m.apply(h);
    for (std::size_t n = 0; n < res.size(); ++n) res.data()[n] -= g.data()[n];
    const auto grad = m.adjoint(res);
    h = axpy(h, -step * m.pixel_area(), grad);
  }
  CHECK(data_term(r.reconstruction, g, m) <= data_term(h, g, m));
}

TEST_CASE("noisy desk-scale data: monotone trace, 2-D step beats the line search") {
  const Grid g = Grid::centered({24, 24, 24}, 0.015);
  PhantomSpec s;
  s.count = 3;
  s.size_range = {4 * 0.015, 7 * 0.015};
  s.seed = 4;
  const auto ph = make_phantom(s, g);
  const ForwardModel m(g, TiltGeometry::uniform(11, -60, 60, g));
  const auto data = simulate_data(ph, m, {15.7, 9});
  SolverConfig cfg;
  cfg.tv = {2e-6, 3e-4};
  cfg.max_iters = 40;
  cfg.record_line_search = true;
  const auto r = solve(data, m, cfg);
  CHECK(non_increasing(r.objective_trace));
  CHECK(r.objective_trace.back() <= objective(Volume(g), data, m, cfg.tv));
  CHECK(r.objective_trace.back() == doctest::Approx(objective(r.reconstruction, data, m, cfg.tv)).epsilon(1e-10));
  REQUIRE(r.line_search_trace.size() + 1 == r.objective_trace.size());
  for (std::size_t k = 0; k < r.line_search_trace.size(); ++k)
    CHECK(r.objective_trace[k + 1] <= r.line_search_trace[k]);
  CHECK(trace_csv(r).rfind("iteration,objective\n0,", 0) == 0);

  // deterministic
  const auto again = solve(data, m, cfg);
  CHECK(again.reconstruction.values() == r.reconstruction.values());

  cfg.nonneg = true;
  const auto pos = solve(data, m, cfg);
  for (double v : pos.reconstruction.data()) CHECK(v >= 0.0);
  CHECK(non_increasing(pos.objective_trace));
}

TEST_CASE("a large lambda leaves the reconstruction near zero") {
  const Grid g = Grid::centered({16, 16, 16}, 0.015);
  PhantomSpec s;
  s.count = 2;
  s.size_range = {4 * 0.015, 6 * 0.015};
  s.seed = 6;
  const auto ph = make_phantom(s, g);
  const ForwardModel m(g, TiltGeometry::uniform(9, -60, 60, g));
  const auto data = simulate_data(ph, m, {15.7, 3});
  SolverConfig cfg;
  cfg.max_iters = 60;
  // scan upward until the reconstruction collapses
  double lam = 1e-6;
  double peak = 1.0;
  for (; lam < 1.0 && peak > 1e-3; lam *= 4) {
    cfg.tv = {lam, 3e-4};
    peak = linf_norm(solve(data, m, cfg).reconstruction);
  }
  CHECK(peak <= 1e-3);
  // and stays collapsed beyond that
  cfg.tv = {lam * 16, 3e-4};
  CHECK(linf_norm(solve(data, m, cfg).reconstruction) <= 1e-3);
}

TEST_CASE("configuration errors") {
  const auto m = tiny_model();
  SolverConfig cfg;
  cfg.tv = {1.0, 0.0};
  CHECK_THROWS_AS((void)solve(ProjectionStack(m.geometry()), m, cfg), PreconditionError);
  cfg.tv = {1.0, 1e-3};
  cfg.max_iters = 0;
  CHECK_THROWS_AS((void)solve(ProjectionStack(m.geometry()), m, cfg), PreconditionError);
  cfg.max_iters = 10;
  CHECK_THROWS_AS((void)solve(ProjectionStack(TiltGeometry::uniform(3, -60, 60, m.grid())), m, cfg), ShapeError);
}
