#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tvp/error.hpp"
#include "tvp/tv.hpp"

using namespace tvp;

namespace {

// Direct evaluation: Ibar is every lattice point in I or 6-adjacent to I,
// values outside I are zero.
double tv_oracle(const Volume& f, double lambda, double beta) {
  const long nx = static_cast<long>(f.dims().nx), ny = static_cast<long>(f.dims().ny),
             nz = static_cast<long>(f.dims().nz);
  auto in = [&](long x, long y, long z) { return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz; };
  auto at = [&](long x, long y, long z) {
    return in(x, y, z) ? f(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z))
                       : 0.0;
  };
  const long off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  double total = 0.0;
  for (long z = -1; z <= nz; ++z)
    for (long y = -1; y <= ny; ++y)
      for (long x = -1; x <= nx; ++x) {
        bool member = in(x, y, z);
        for (const auto& o : off) member = member || in(x + o[0], y + o[1], z + o[2]);
        if (!member) continue;
        double q = 0.0;
        for (const auto& o : off) {
          const double d = at(x + o[0], y + o[1], z + o[2]) - at(x, y, z);
          q += d * d;
        }
        total += std::sqrt(beta * beta + 0.5 * q);
      }
  return lambda * total;
}

} // namespace

TEST_CASE("zero volume has zero TV at beta 0") {
  const Grid g = Grid::centered({5, 5, 5});
  CHECK(tv_value(Volume(g), {1.0, 0.0}) == 0.0);
}

TEST_CASE("single voxel TV: sqrt 3 + 6 sqrt(1/2)") {
  const Grid g = Grid::centered({5, 5, 5});
  Volume f(g);
  f(2, 2, 2) = 1.0;
  // centre: six unit differences, each squared once -> sqrt(6/2);
  // each of the 6 neighbours: one unit difference -> sqrt(1/2)
  const double expected = std::sqrt(3.0) + 6.0 * std::sqrt(0.5);
  CHECK(std::abs(tv_value(f, {1.0, 0.0}) - expected) <= 1e-12);
  CHECK(std::abs(tv_oracle(f, 1.0, 0.0) - expected) <= 1e-12);
  // on the corner of the grid the same value holds under zero extension
  Volume c(g);
  c(0, 0, 0) = 1.0;
  CHECK(std::abs(tv_value(c, {1.0, 0.0}) - expected) <= 1e-12);
}

TEST_CASE("TV matches the direct oracle") {
  std::mt19937_64 rng(31);
  for (double beta : {0.0, 3e-4, 0.1}) {
    const auto f = testutil::random_volume(Grid::centered({6, 5, 7}), rng);
    CHECK(tv_value(f, {1.7, beta}) == doctest::Approx(tv_oracle(f, 1.7, beta)).epsilon(1e-13));
  }
}

TEST_CASE("homogeneity, subadditivity, convexity, additivity") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-3, 3);
  const Grid g = Grid::centered({7, 7, 7});
  const TvConfig tv{1.0, 0.0};
  for (int trial = 0; trial < 20; ++trial) {
    const auto f1 = testutil::random_volume(g, rng);
    const auto f2 = testutil::random_volume(g, rng);
    const double a = u(rng);
    CHECK(tv_value(scaled(f1, a), tv) == doctest::Approx(std::abs(a) * tv_value(f1, tv)).epsilon(1e-12));
    CHECK(tv_value(axpy(f1, 1.0, f2), tv) <= tv_value(f1, tv) + tv_value(f2, tv));
    const double t = 0.5 + u(rng) / 6.0;
    CHECK(tv_value(axpy(scaled(f1, t), 1.0 - t, f2), tv) <=
          t * tv_value(f1, tv) + (1.0 - t) * tv_value(f2, tv) + 1e-12);
  }
  Volume f(g);
  f(2, 2, 2) = -2.0;
  CHECK(tv_value(f, tv) == doctest::Approx(2.0 * (std::sqrt(3.0) + 6.0 * std::sqrt(0.5))).epsilon(1e-15));

  // supports two voxels apart do not interact
  const Grid h = Grid::centered({12, 8, 8});
  Volume p(h), q(h);
  for (std::size_t i = 1; i < 4; ++i) p(i, 3, 3) = 1.0 + 0.1 * static_cast<double>(i);
  for (std::size_t i = 6; i < 9; ++i) q(i, 3, 4) = 0.7;
  CHECK(tv_value(axpy(p, 1.0, q), tv) == doctest::Approx(tv_value(p, tv) + tv_value(q, tv)).epsilon(1e-14));
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 rng(33);
  const Grid g = Grid::centered({8, 8, 8});
  const TvConfig tv{1.3, 1e-2};
  const auto f = testutil::random_volume(g, rng);
  const auto grad = tv_gradient(f, tv);
  const double eps = 1e-5;
  double worst = 0.0;
  for (std::size_t n = 0; n < f.size(); ++n) {
    Volume fp = f, fm = f;
    fp[n] += eps;
    fm[n] -= eps;
    const double fd = (tv_value(fp, tv) - tv_value(fm, tv)) / (2 * eps);
    worst = std::max(worst, std::abs(fd - grad[n]) / std::max(std::abs(fd), 1e-8));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("gradient of a constant volume vanishes away from the boundary") {
  // Zero extension makes the grid boundary a jump, so only the interior is flat.
  const Grid g = Grid::centered({8, 8, 8});
  Volume f(g);
  for (double& v : f.data()) v = 2.0;
  const auto grad = tv_gradient(f, {1.0, 3e-4});
  for (std::size_t k = 2; k < 6; ++k)
    for (std::size_t j = 2; j < 6; ++j)
      for (std::size_t i = 2; i < 6; ++i) CHECK(grad(i, j, k) == 0.0);
  CHECK(grad(0, 0, 0) > 0.0);
}

TEST_CASE("gradient is translation equivariant and needs beta > 0") {
  const Grid g = Grid::centered({14, 14, 14});
  const auto ball = rasterize_ball({{0.2, -0.4, 0.1}, 5.0, 1.0}, g);
  const TvConfig tv{1.0, 3e-4};
  const auto a = translate(tv_gradient(ball, tv), {2, -1, 1});
  const auto b = tv_gradient(translate(ball, {2, -1, 1}), tv);
  for (std::size_t n = 0; n < a.size(); ++n) CHECK(std::abs(a[n] - b[n]) <= 1e-12);
  CHECK_THROWS_AS((void)tv_gradient(ball, {1.0, 0.0}), PreconditionError);
  CHECK_THROWS_AS((void)tv_value(ball, {-1.0, 0.0}), DomainError);
}

TEST_CASE("TV restricted to a plane: value, gradient, Hessian") {
  std::mt19937_64 rng(34);
  const Grid g = Grid::centered({6, 6, 6});
  const auto f = testutil::random_volume(g, rng);
  const auto d1 = testutil::random_volume(g, rng);
  const auto d2 = testutil::random_volume(g, rng);
  const TvConfig tv{0.8, 5e-2};
  const TvPlane plane(f, d1, d2, tv);
  auto direct = [&](double c1, double c2) { return tv_value(axpy(axpy(f, c1, d1), c2, d2), tv); };
  const std::array<double, 2> c{0.3, -0.2};
  const auto e = plane(c);
  CHECK(e.value == doctest::Approx(direct(c[0], c[1])).epsilon(1e-12));
  const double h = 1e-5;
  CHECK(e.grad[0] == doctest::Approx((direct(c[0] + h, c[1]) - direct(c[0] - h, c[1])) / (2 * h)).epsilon(1e-6));
  CHECK(e.grad[1] == doctest::Approx((direct(c[0], c[1] + h) - direct(c[0], c[1] - h)) / (2 * h)).epsilon(1e-6));
  const double k = 1e-4;
  auto grad_at = [&](double c1, double c2) { return plane({c1, c2}).grad; };
  CHECK(e.hess[0] == doctest::Approx((grad_at(c[0] + k, c[1])[0] - grad_at(c[0] - k, c[1])[0]) / (2 * k)).epsilon(1e-5));
  CHECK(e.hess[1] == doctest::Approx((grad_at(c[0], c[1] + k)[0] - grad_at(c[0], c[1] - k)[0]) / (2 * k)).epsilon(1e-5));
  CHECK(e.hess[2] == doctest::Approx((grad_at(c[0], c[1] + k)[1] - grad_at(c[0], c[1] - k)[1]) / (2 * k)).epsilon(1e-5));
}
