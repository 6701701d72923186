#include "tvp/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <json.hpp>

#include "tvp/error.hpp"
#include "tvp/io.hpp"
#include "tvp/rng.hpp"

namespace tvp {

namespace {

double uniform01(CounterRng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(CounterRng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

// Uniformly distributed rotation from a random unit quaternion (Shoemake).
std::array<Vec3, 3> random_rotation(CounterRng& rng) {
  const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double w = a * std::sin(2.0 * std::numbers::pi * u2);
  const double x = a * std::cos(2.0 * std::numbers::pi * u2);
  const double y = b * std::sin(2.0 * std::numbers::pi * u3);
  const double z = b * std::cos(2.0 * std::numbers::pi * u3);
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

std::vector<std::size_t> nonzero_indices(const Volume& v) {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < v.size(); ++n)
    if (v[n] != 0.0) out.push_back(n);
  return out;
}

std::vector<std::size_t> rasterize_y(const PhantomObject& obj, const Grid& grid) {
  const double reach = distance(obj.center, obj.tips[0]) + obj.radius;
  std::array<std::size_t, 3> lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    const double fl = std::floor((obj.center[a] - reach - grid.origin[a]) / grid.voxel_size);
    const double ce = std::ceil((obj.center[a] + reach - grid.origin[a]) / grid.voxel_size);
    lo[a] = static_cast<std::size_t>(std::max(0.0, fl));
    hi[a] = static_cast<std::size_t>(std::min(static_cast<double>(grid.dims[a] - 1), std::max(0.0, ce)));
  }
  std::vector<std::size_t> out;
  for (std::size_t k = lo[2]; k <= hi[2]; ++k)
    for (std::size_t j = lo[1]; j <= hi[1]; ++j)
      for (std::size_t i = lo[0]; i <= hi[0]; ++i) {
        const Vec3 p = grid.voxel_center(i, j, k);
        const bool inside = std::any_of(obj.tips.begin(), obj.tips.end(), [&](const Vec3& tip) {
          return capsule_contains(obj.center, tip, obj.radius, p);
        });
        if (inside) out.push_back(i + grid.dims.nx * (j + grid.dims.ny * k));
      }
  return out;
}

} // namespace

bool capsule_contains(const Vec3& a, const Vec3& b, double radius, const Vec3& p) noexcept {
  Vec3 ab{}, ap{};
  double len2 = 0.0, proj = 0.0;
  for (int i = 0; i < 3; ++i) {
    ab[i] = b[i] - a[i];
    ap[i] = p[i] - a[i];
    len2 += ab[i] * ab[i];
    proj += ab[i] * ap[i];
  }
  const double t = len2 > 0.0 ? std::clamp(proj / len2, 0.0, 1.0) : 0.0;
  double d2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double e = ap[i] - t * ab[i];
    d2 += e * e;
  }
  return d2 <= radius * radius;
}

Phantom make_phantom(const PhantomSpec& spec, const Grid& grid) {
  grid.validate();
  if (spec.count == 0) throw PreconditionError("phantom object count must be >= 1");
  for (double v : {spec.size_range[0], spec.size_range[1], spec.contrast_range[0], spec.contrast_range[1]})
    if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError("phantom size and contrast ranges must be positive");
  if (spec.size_range[0] > spec.size_range[1] || spec.contrast_range[0] > spec.contrast_range[1])
    throw PreconditionError("phantom ranges must be ordered [min, max]");
  if (spec.kind == PhantomKind::y_shapes && !(spec.y_radius_fraction > 0.0))
    throw PreconditionError("y_radius_fraction must be positive");

  CounterRng rng(spec.seed, 0x9A47);
  const double s = grid.voxel_size;
  const double gap = 2.0 * s;

  Phantom ph{Volume(grid), {}};
  std::vector<double> reach;  // bounding radius per placed object
  std::size_t attempts = 0;
  while (ph.objects.size() < spec.count) {
    if (attempts++ >= spec.max_attempts)
      throw CapacityError("could only place " + std::to_string(ph.objects.size()) + " of " +
                          std::to_string(spec.count) + " objects in " + std::to_string(spec.max_attempts) +
                          " attempts; request fewer or smaller objects");
    PhantomObject obj;
    obj.id = static_cast<int>(ph.objects.size());
    const double size = uniform(rng, spec.size_range[0], spec.size_range[1]);
    // float-representable so the on-disk phantom round trips exactly
    obj.contrast = static_cast<float>(uniform(rng, spec.contrast_range[0], spec.contrast_range[1]));
    double bound = 0.0;
    if (spec.kind == PhantomKind::balls) {
      obj.radius = 0.5 * size;
      bound = obj.radius;
    } else {
      obj.radius = spec.y_radius_fraction * size;
      bound = size + obj.radius;
    }
    bool fits = true;
    for (int a = 0; a < 3; ++a) {
      const double lo = grid.origin[a] + bound;
      const double hi = grid.origin[a] + s * static_cast<double>(grid.dims[a] - 1) - bound;
      if (lo > hi) {
        fits = false;
        obj.center[a] = 0.0;
      } else {
        obj.center[a] = uniform(rng, lo, hi);
      }
    }
    std::array<Vec3, 3> rot{};
    if (spec.kind == PhantomKind::y_shapes) rot = random_rotation(rng);
    if (!fits) continue;
    bool clear = true;
    for (std::size_t o = 0; o < ph.objects.size() && clear; ++o)
      clear = distance(obj.center, ph.objects[o].center) >= bound + reach[o] + gap;
    if (!clear) continue;

    if (spec.kind == PhantomKind::balls) {
      obj.voxels = nonzero_indices(rasterize_ball({obj.center, size, 1.0}, grid));
    } else {
      for (int k = 0; k < 3; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / 3.0;
        const Vec3 e{std::cos(phi), std::sin(phi), 0.0};
        Vec3 tip{};
        for (int r = 0; r < 3; ++r)
          tip[r] = obj.center[r] + size * (rot[r][0] * e[0] + rot[r][1] * e[1] + rot[r][2] * e[2]);
        obj.tips.push_back(tip);
      }
      obj.voxels = rasterize_y(obj, grid);
    }
    if (obj.voxels.empty()) continue;
    for (std::size_t n : obj.voxels) ph.volume[n] = obj.contrast;
    reach.push_back(bound);
    ph.objects.push_back(std::move(obj));
  }
  return ph;
}

void write_phantom(const Phantom& phantom, const std::filesystem::path& base) {
  using nlohmann::json;
  write_volume(phantom.volume, base);
  json objs = json::array();
  for (const auto& o : phantom.objects) {
    json runs = json::array();
    for (std::size_t n = 0; n < o.voxels.size();) {
      std::size_t len = 1;
      while (n + len < o.voxels.size() && o.voxels[n + len] == o.voxels[n] + len) ++len;
      runs.push_back({o.voxels[n], len});
      n += len;
    }
    json tips = json::array();
    for (const auto& t : o.tips) tips.push_back({t[0], t[1], t[2]});
    objs.push_back({{"id", o.id},
                    {"contrast", o.contrast},
                    {"center", {o.center[0], o.center[1], o.center[2]}},
                    {"radius", o.radius},
                    {"tips", tips},
                    {"runs", runs}});
  }
  const auto& d = phantom.volume.dims();
  json doc{{"dims", {d.nx, d.ny, d.nz}}, {"objects", objs}};
  auto path = std::filesystem::path(header_path(base)).replace_extension();
  path += "_objects.json";
  write_text_atomic(path, doc.dump(1) + "\n");
}

Phantom read_phantom(const std::filesystem::path& base) {
  using nlohmann::json;
  Phantom ph{read_volume(base), {}};
  auto path = std::filesystem::path(header_path(base)).replace_extension();
  path += "_objects.json";
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError("objects: not valid JSON (" + std::string(e.what()) + ")");
  }
  const auto& d = ph.volume.dims();
  if (!doc.contains("dims") || doc["dims"] != json{d.nx, d.ny, d.nz})
    throw FormatError("objects.dims: does not match the phantom volume");
  if (!doc.contains("objects") || !doc["objects"].is_array()) throw FormatError("objects: missing object list");
  try {
    for (const auto& o : doc["objects"]) {
      PhantomObject obj;
      obj.id = o.at("id").get<int>();
      obj.contrast = o.at("contrast").get<double>();
      obj.center = o.at("center").get<Vec3>();
      obj.radius = o.at("radius").get<double>();
      for (const auto& t : o.at("tips")) obj.tips.push_back(t.get<Vec3>());
      for (const auto& r : o.at("runs")) {
        const auto start = r.at(0).get<std::size_t>();
        const auto len = r.at(1).get<std::size_t>();
        if (start + len > d.size()) throw FormatError("objects.runs: run exceeds the volume");
        for (std::size_t n = 0; n < len; ++n) obj.voxels.push_back(start + n);
      }
      ph.objects.push_back(std::move(obj));
    }
  } catch (const json::exception& e) {
    throw FormatError("objects: malformed entry (" + std::string(e.what()) + ")");
  }
  return ph;
}

double incident_counts(const ProjectionStack& clean, double dose_per_pixel) {
  double mean_transmission = 0.0;
  for (double p : clean.data()) mean_transmission += std::exp(-p);
  mean_transmission /= static_cast<double>(clean.size());
  return dose_per_pixel / mean_transmission;
}

ProjectionStack simulate_detection(const ProjectionStack& clean, const NoiseModel& noise) {
  if (!(noise.dose_per_pixel > 0.0) || !std::isfinite(noise.dose_per_pixel))
    throw DomainError("dose_per_pixel must be positive");
  ProjectionStack g = clean;
  const double n0 = incident_counts(clean, noise.dose_per_pixel);
  const double log_n0 = std::log(n0);
  const std::size_t per_image = g.geometry().pixels_per_image();
  for (std::size_t j = 0; j < g.num_images(); ++j) {
    auto img = g.image(j);
    for (std::size_t p = 0; p < per_image; ++p) {
      const double mean = n0 * std::exp(-img[p]);
      long long count = 0;
      if (mean > 0.0) {
        CounterRng rng(noise.seed, j, p);
        std::poisson_distribution<long long> dist(mean);
        count = dist(rng);
      }
      img[p] = log_n0 - std::log(static_cast<double>(count) + 0.5);
    }
  }
  return g;
}

ProjectionStack simulate_data(const Volume& truth, const ForwardModel& model, const NoiseModel& noise) {
  if (!(noise.dose_per_pixel > 0.0) || !std::isfinite(noise.dose_per_pixel))
    throw DomainError("dose_per_pixel must be positive");
  return simulate_detection(model.apply(truth), noise);
}

ProjectionStack simulate_data(const Phantom& phantom, const ForwardModel& model, const NoiseModel& noise) {
  return simulate_data(phantom.volume, model, noise);
}

std::vector<ProjectionStack> simulate_noise_only(const Phantom& phantom, const ForwardModel& model,
                                                 const NoiseModel& noise, std::size_t draws) {
  if (!(noise.dose_per_pixel > 0.0) || !std::isfinite(noise.dose_per_pixel))
    throw DomainError("dose_per_pixel must be positive");
  std::vector<ProjectionStack> out;
  if (draws == 0) return out;
  const ProjectionStack clean = model.apply(phantom.volume);
  out.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    ProjectionStack g = simulate_detection(clean, {noise.dose_per_pixel, derive_key(noise.seed, 0x4E01, d)});
    auto gv = g.data();
    const auto cv = clean.data();
    for (std::size_t n = 0; n < gv.size(); ++n) gv[n] -= cv[n];
    out.push_back(std::move(g));
  }
  return out;
}

} // namespace tvp
