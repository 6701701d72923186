#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "tvp/analysis.hpp"
#include "tvp/error.hpp"

using namespace tvp;

namespace {

// Union-find over the superlevel set; returns the partition as a set of sorted
// index lists so that ordering does not matter.
std::set<std::vector<std::size_t>> union_find_oracle(const Volume& f, double a, int conn) {
  const auto& d = f.dims();
  const std::size_t n = f.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t k = 0; k < d.nz; ++k)
    for (std::size_t j = 0; j < d.ny; ++j)
      for (std::size_t i = 0; i < d.nx; ++i) {
        if (!(f(i, j, k) > a)) continue;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
              if (manhattan == 0 || (conn == 6 && manhattan > 1)) continue;
              const long x = static_cast<long>(i) + dx, y = static_cast<long>(j) + dy, z = static_cast<long>(k) + dz;
              if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(d.nx) || y >= static_cast<long>(d.ny) ||
                  z >= static_cast<long>(d.nz))
                continue;
              if (!(f(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)) > a))
                continue;
              parent[find(i + d.nx * (j + d.ny * k))] =
                  find(static_cast<std::size_t>(x) + d.nx * (static_cast<std::size_t>(y) + d.ny * static_cast<std::size_t>(z)));
            }
      }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t v = 0; v < n; ++v)
    if (f[v] > a) groups[find(v)].push_back(v);
  std::set<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) out.insert(members);
  return out;
}

// Two unit-contrast cubes of side 2 at opposite corners of a 10^3 grid.
Phantom two_cubes() {
  const Grid g = Grid::centered({10, 10, 10});
  Phantom ph{Volume(g), {}};
  for (int o = 0; o < 2; ++o) {
    PhantomObject obj;
    obj.id = o;
    const std::size_t base = o == 0 ? 1 : 6;
    for (std::size_t k = base; k < base + 2; ++k)
      for (std::size_t j = base; j < base + 2; ++j)
        for (std::size_t i = base; i < base + 2; ++i) {
          obj.voxels.push_back(i + 10 * (j + 10 * k));
          ph.volume(i, j, k) = 1.0;
        }
    std::sort(obj.voxels.begin(), obj.voxels.end());
    ph.objects.push_back(obj);
  }
  return ph;
}

} // namespace

TEST_CASE("connected components: empty and diagonal cases") {
  const Grid g = Grid::centered({5, 5, 5});
  Volume f(g);
  for (double& v : f.data()) v = 0.5;
  CHECK(connected_components(f, 0.5).components.empty());
  CHECK(connected_components(f, 0.7).components.empty());

  Volume d(g);
  d(1, 1, 1) = 1.0;
  d(2, 2, 1) = 1.0;
  CHECK(connected_components(d, 0.5, Connectivity::face6).components.size() == 2);
  CHECK(connected_components(d, 0.5, Connectivity::full26).components.size() == 1);
  d(2, 2, 1) = 0.0;
  d(2, 2, 2) = 1.0;  // corner contact
  CHECK(connected_components(d, 0.5, Connectivity::face6).components.size() == 2);
  CHECK(connected_components(d, 0.5, Connectivity::full26).components.size() == 1);

  CHECK(parse_connectivity(6) == Connectivity::face6);
  CHECK(parse_connectivity(26) == Connectivity::full26);
  CHECK_THROWS_AS((void)parse_connectivity(8), DomainError);
}

TEST_CASE("connected components match a union-find oracle") {
  std::mt19937_64 rng(71);
  std::bernoulli_distribution on(0.3);
  const Grid g = Grid::centered({12, 12, 12});
  for (int trial = 0; trial < 10; ++trial) {
    Volume f(g);
    for (double& v : f.data()) v = on(rng) ? 1.0 : 0.0;
    for (int conn : {6, 26}) {
      const auto cs = connected_components(f, 0.5, parse_connectivity(conn));
      const std::set<std::vector<std::size_t>> got(cs.components.begin(), cs.components.end());
      CHECK(got.size() == cs.components.size());
      CHECK(got == union_find_oracle(f, 0.5, conn));
      // ordered by smallest index, each sorted
      for (std::size_t c = 0; c < cs.components.size(); ++c) {
        CHECK(std::is_sorted(cs.components[c].begin(), cs.components[c].end()));
        if (c > 0) CHECK(cs.components[c - 1].front() < cs.components[c].front());
      }
    }
  }
}

TEST_CASE("components partition the strict superlevel set") {
  std::mt19937_64 rng(72);
  std::uniform_real_distribution<double> u(0, 1);
  const Grid g = Grid::centered({9, 11, 7});
  Volume f(g);
  for (double& v : f.data()) v = u(rng);
  f[3] = 0.6;  // tie at the threshold is excluded
  const auto cs = connected_components(f, 0.6);
  std::vector<int> seen(f.size(), 0);
  for (const auto& c : cs.components)
    for (std::size_t v : c) ++seen[v];
  for (std::size_t v = 0; v < f.size(); ++v) CHECK(seen[v] == (f[v] > 0.6 ? 1 : 0));
}

TEST_CASE("classify hits") {
  const Phantom ph = two_cubes();
  SUBCASE("component equal to an object") {
    Volume f(ph.volume.grid());
    for (std::size_t v : ph.objects[0].voxels) f[v] = 1.0;
    const auto h = classify_hits(connected_components(f, 0.5), ph);
    CHECK(h.true_hits == 1);
    CHECK(h.false_hits == 0);
    CHECK(h.object_hit == std::vector<bool>{true, false});
  }
  SUBCASE("one component covering both objects") {
    Volume f(ph.volume.grid());
    for (std::size_t i = 1; i < 8; ++i) f(i, i, i) = f(i + 1, i, i) = f(i + 1, i + 1, i) = 1.0;
    const auto cs = connected_components(f, 0.5);
    REQUIRE(cs.components.size() == 1);
    const auto h = classify_hits(cs, ph);
    CHECK(h.true_hits == 2);
    CHECK(h.false_hits == 0);
    CHECK(h.component_objects[0] == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("disjoint component and a duplicate hit") {
    Volume f(ph.volume.grid());
    f(8, 1, 1) = 1.0;
    f(1, 1, 1) = 1.0;
    f(2, 2, 2) = 1.0;  // second component on object 0 under 6-connectivity
    const auto cs = connected_components(f, 0.5);
    REQUIRE(cs.components.size() == 3);
    const auto h = classify_hits(cs, ph);
    CHECK(h.true_hits == 1);
    CHECK(h.false_hits == 1);
    // true_hits + repeated hits + false hits = components
    std::size_t on_objects = 0;
    for (auto k : h.component_kind) on_objects += k == HitKind::true_hit;
    CHECK(on_objects + h.false_hits == cs.components.size());
  }
  SUBCASE("grid mismatch") {
    const Volume f(Grid::centered({10, 10, 11}));
    CHECK_THROWS_AS((void)classify_hits(connected_components(f, 0.5), ph), ShapeError);
  }
}

TEST_CASE("classification does not depend on component order") {
  const Phantom ph = two_cubes();
  std::mt19937_64 rng(73);
  std::bernoulli_distribution on(0.08);
  Volume f(ph.volume.grid());
  for (double& v : f.data()) v = on(rng) ? 1.0 : 0.0;
  for (std::size_t v : ph.objects[1].voxels) f[v] = 1.0;
  auto cs = connected_components(f, 0.5);
  const auto base = classify_hits(cs, ph);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(cs.components.begin(), cs.components.end(), rng);
    const auto h = classify_hits(cs, ph);
    CHECK(h.true_hits == base.true_hits);
    CHECK(h.false_hits == base.false_hits);
    CHECK(h.object_hit == base.object_hit);
  }
}

TEST_CASE("false hits need not fall monotonically with the threshold") {
  // A bridge above 0.3 joins two peaks above 0.8: one false hit at 0.2,
  // two at 0.5, none at 0.9. The superlevel sets themselves are nested.
  const Phantom ph = two_cubes();
  Volume f(ph.volume.grid());
  f(4, 8, 2) = 0.9;
  f(5, 8, 2) = 0.4;
  f(6, 8, 2) = 0.9;
  std::size_t prev_voxels = f.size();
  for (double a : {0.2, 0.5, 0.95}) {
    const auto cs = connected_components(f, a);
    std::size_t voxels = 0;
    for (const auto& c : cs.components) voxels += c.size();
    CHECK(voxels <= prev_voxels);
    prev_voxels = voxels;
  }
  CHECK(classify_hits(connected_components(f, 0.2), ph).false_hits == 1);
  CHECK(classify_hits(connected_components(f, 0.5), ph).false_hits == 2);
  CHECK(classify_hits(connected_components(f, 0.95), ph).false_hits == 0);
}

TEST_CASE("ideal rule sweep") {
  const Phantom ph = two_cubes();
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.05 * i);

  std::mt19937_64 rng(74);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  Volume noisy = ph.volume;
  double spurious_max = 0.0;
  // sparse spurious voxels kept one voxel away from the cubes
  std::bernoulli_distribution sparse(0.1);
  auto near_cube = [](std::size_t i, std::size_t j, std::size_t k, std::size_t b) {
    return i + 1 >= b && i <= b + 2 && j + 1 >= b && j <= b + 2 && k + 1 >= b && k <= b + 2;
  };
  for (std::size_t k = 0; k < 10; ++k)
    for (std::size_t j = 0; j < 10; ++j)
      for (std::size_t i = 0; i < 10; ++i)
        if (!near_cube(i, j, k, 1) && !near_cube(i, j, k, 6) && sparse(rng)) {
          noisy(i, j, k) = u(rng);
          spurious_max = std::max(spurious_max, noisy(i, j, k));
        }

  const std::vector<Reconstruction> recs{{1.0, ph.volume}, {2.0, noisy}, {3.0, Volume(ph.volume.grid())}};
  const auto curve = ideal_rule_sweep(recs, ph, grid);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].a_ideal == grid.front());
  CHECK(curve[2].a_ideal == grid.front());
  // first grid value at or above every spurious maximum
  const double expected = *std::find_if(grid.begin(), grid.end(), [&](double a) { return a >= spurious_max; });
  CHECK(curve[1].a_ideal == expected);
  CHECK(curve[1].false_hits == 0);
  CHECK(curve[1].lambda == 2.0);

  // persistent false hits leave the grid maximum
  Volume loud = ph.volume;
  loud(8, 1, 1) = 5.0;
  const auto stuck = ideal_rule_sweep({{1.0, loud}}, ph, grid);
  CHECK(stuck[0].a_ideal == grid.back());
  CHECK(stuck[0].false_hits == 1);

  CHECK_THROWS_AS((void)ideal_rule_sweep({}, ph, grid), PreconditionError);
  CHECK_THROWS_AS((void)ideal_rule_sweep(recs, ph, {}), PreconditionError);
  CHECK_THROWS_AS((void)ideal_rule_sweep(recs, ph, {0.1, 0.1}), PreconditionError);

  const auto csv = ideal_curve_csv(curve);
  CHECK(csv.rfind("lambda,a_ideal,false_hits\n", 0) == 0);
  const auto j = nlohmann::json::parse(ideal_curve_json(curve, Connectivity::face6));
  CHECK(j["curve"].size() == 3);
}

TEST_CASE("hit table") {
  const Phantom ph = two_cubes();
  const std::vector<Reconstruction> same{{1.0, ph.volume}, {2.0, ph.volume}, {4.0, ph.volume}};
  const auto rows = hit_table(same, ph, 0.5);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.true_hits == 2);
    CHECK(r.false_hits == 0);
    CHECK(r.components == 2);
  }
  const auto zero = hit_table({{1e9, Volume(ph.volume.grid())}}, ph, 0.5);
  CHECK(zero[0].true_hits == 0);
  CHECK(zero[0].false_hits == 0);

  CHECK(hit_table_csv(rows) == "lambda,true_hits,false_hits,components\n1,2,0,2\n2,2,0,2\n4,2,0,2\n");
  const auto j = nlohmann::json::parse(hit_table_json(rows, 0.5, Connectivity::full26));
  CHECK(j["connectivity"] == 26);
  CHECK(j["rows"].size() == 3);
}
