#include "tvp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "tvp/error.hpp"

namespace tvp {

namespace {

constexpr std::size_t kUnlabeled = static_cast<std::size_t>(-1);

const char* connectivity_name(Connectivity c) { return c == Connectivity::face6 ? "6" : "26"; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

} // namespace

Connectivity parse_connectivity(int n) {
  if (n == 6) return Connectivity::face6;
  if (n == 26) return Connectivity::full26;
  throw DomainError("connectivity must be 6 or 26, got " + std::to_string(n));
}

ComponentSet connected_components(const Volume& f, double a, Connectivity connectivity) {
  if (!std::isfinite(a)) throw DomainError("threshold must be finite");
  const Dims d = f.dims();
  const long nx = static_cast<long>(d.nx), ny = static_cast<long>(d.ny), nz = static_cast<long>(d.nz);
  const int reach = connectivity == Connectivity::face6 ? 1 : 3;

  ComponentSet out;
  out.threshold = a;
  out.connectivity = connectivity;
  out.dims = d;

  std::vector<std::size_t> label(f.size(), kUnlabeled);
  std::vector<std::size_t> queue;
  const auto vals = f.values();
  for (std::size_t seed = 0; seed < f.size(); ++seed) {
    if (!(vals[seed] > a) || label[seed] != kUnlabeled) continue;
    const std::size_t id = out.components.size();
    queue.assign(1, seed);
    label[seed] = id;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t cur = queue[head];
      const long x = static_cast<long>(cur % d.nx);
      const long y = static_cast<long>((cur / d.nx) % d.ny);
      const long z = static_cast<long>(cur / (d.nx * d.ny));
      for (long dz = -1; dz <= 1; ++dz)
        for (long dy = -1; dy <= 1; ++dy)
          for (long dx = -1; dx <= 1; ++dx) {
            const int order = std::abs(static_cast<int>(dx)) + std::abs(static_cast<int>(dy)) + std::abs(static_cast<int>(dz));
            if (order == 0 || order > reach) continue;
            const long X = x + dx, Y = y + dy, Z = z + dz;
            if (X < 0 || Y < 0 || Z < 0 || X >= nx || Y >= ny || Z >= nz) continue;
            const std::size_t n = static_cast<std::size_t>(X + nx * (Y + ny * Z));
            if (label[n] != kUnlabeled || !(vals[n] > a)) continue;
            label[n] = id;
            queue.push_back(n);
          }
    }
    std::sort(queue.begin(), queue.end());
    out.components.push_back(queue);
  }
  return out;
}

HitAnalysis classify_hits(const ComponentSet& components, const Phantom& phantom) {
  if (components.dims != phantom.volume.dims()) throw ShapeError("classify_hits: component grid differs from phantom grid");
  std::vector<std::size_t> owner(phantom.volume.size(), kUnlabeled);
  for (std::size_t o = 0; o < phantom.objects.size(); ++o)
    for (std::size_t v : phantom.objects[o].voxels) {
      if (v >= owner.size()) throw OutOfBoundsError("classify_hits: object voxel outside grid");
      owner[v] = o;
    }

  HitAnalysis out;
  out.object_hit.assign(phantom.objects.size(), false);
  for (const auto& comp : components.components) {
    std::vector<std::size_t> touched;
    for (std::size_t v : comp)
      if (owner[v] != kUnlabeled) touched.push_back(owner[v]);
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (std::size_t o : touched) out.object_hit[o] = true;
    if (touched.empty()) ++out.false_hits;
    out.component_kind.push_back(touched.empty() ? HitKind::false_hit : HitKind::true_hit);
    out.component_objects.push_back(std::move(touched));
  }
  out.true_hits = static_cast<std::size_t>(std::count(out.object_hit.begin(), out.object_hit.end(), true));
  return out;
}

std::vector<IdealPoint> ideal_rule_sweep(const std::vector<Reconstruction>& recs, const Phantom& phantom,
                                         const std::vector<double>& a_grid, Connectivity connectivity) {
  if (recs.empty()) throw PreconditionError("ideal_rule_sweep: no reconstructions");
  if (a_grid.empty()) throw PreconditionError("ideal_rule_sweep: empty threshold grid");
  for (std::size_t k = 1; k < a_grid.size(); ++k)
    if (!(a_grid[k] > a_grid[k - 1])) throw PreconditionError("ideal_rule_sweep: threshold grid must be increasing");

  std::vector<IdealPoint> out;
  for (const auto& rec : recs) {
    IdealPoint pt{rec.lambda, a_grid.back(), 0};
    for (double a : a_grid) {
      const auto hits = classify_hits(connected_components(rec.volume, a, connectivity), phantom);
      pt.a_ideal = a;
      pt.false_hits = hits.false_hits;
      if (hits.false_hits == 0) break;
    }
    out.push_back(pt);
  }
  return out;
}

std::vector<HitRow> hit_table(const std::vector<Reconstruction>& recs, const Phantom& phantom, double a,
                              Connectivity connectivity) {
  std::vector<HitRow> rows;
  for (const auto& rec : recs) {
    const auto cs = connected_components(rec.volume, a, connectivity);
    const auto hits = classify_hits(cs, phantom);
    rows.push_back({rec.lambda, hits.true_hits, hits.false_hits, cs.components.size()});
  }
  return rows;
}

std::string hit_table_csv(const std::vector<HitRow>& rows) {
  std::string s = "lambda,true_hits,false_hits,components\n";
  for (const auto& r : rows)
    s += fmt(r.lambda) + ',' + std::to_string(r.true_hits) + ',' + std::to_string(r.false_hits) + ',' +
         std::to_string(r.components) + '\n';
  return s;
}

std::string hit_table_json(const std::vector<HitRow>& rows, double a, Connectivity connectivity) {
  nlohmann::ordered_json j;
  j["threshold"] = a;
  j["connectivity"] = std::stoi(connectivity_name(connectivity));
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    j["rows"].push_back(
        {{"lambda", r.lambda}, {"true_hits", r.true_hits}, {"false_hits", r.false_hits}, {"components", r.components}});
  return j.dump(2) + '\n';
}

std::string ideal_curve_csv(const std::vector<IdealPoint>& curve) {
  std::string s = "lambda,a_ideal,false_hits\n";
  for (const auto& p : curve) s += fmt(p.lambda) + ',' + fmt(p.a_ideal) + ',' + std::to_string(p.false_hits) + '\n';
  return s;
}

std::string ideal_curve_json(const std::vector<IdealPoint>& curve, Connectivity connectivity) {
  nlohmann::ordered_json j;
  j["connectivity"] = std::stoi(connectivity_name(connectivity));
  j["curve"] = nlohmann::ordered_json::array();
  for (const auto& p : curve)
    j["curve"].push_back({{"lambda", p.lambda}, {"a_ideal", p.a_ideal}, {"false_hits", p.false_hits}});
  return j.dump(2) + '\n';
}

} // namespace tvp
