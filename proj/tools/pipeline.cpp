#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <set>
#include <sstream>

#include "tvp/error.hpp"
#include "tvp/io.hpp"
#include "tvp/rng.hpp"

namespace tvp::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Walks one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return require<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(child(key) + ": missing required key");
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(child(key) + ": wrong type");
    }
  }

  Section sub(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, child(key));
  }

  Section require_sub(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(child(key) + ": missing required key");
    return sub(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError(child(item.key()) + ": unknown key");
  }

  [[nodiscard]] std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
  [[nodiscard]] std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void check(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path + ": " + what);
}

void check_increasing(const std::vector<double>& v, const std::string& path) {
  for (std::size_t k = 1; k < v.size(); ++k) check(v[k] > v[k - 1], path, "must be strictly increasing");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

fs::path out_path(const RunConfig& cfg, const std::string& name) { return cfg.out_dir / name; }

void require_input(const fs::path& p, const char* producer) {
  if (!fs::exists(p))
    throw UsageError("missing input " + p.string() + "; run `" + std::string(producer) + "` first");
}

ProjectionStack load_data(const RunConfig& cfg, const ForwardModel& model) {
  const fs::path base = out_path(cfg, files::data);
  require_input(header_path(base), "simulate");
  ProjectionStack g = read_stack(base);
  model.check_stack(g);
  if (g.geometry().angles_deg.size() != model.geometry().angles_deg.size())
    throw UsageError("data stack does not match the configured geometry");
  return g;
}

Phantom load_phantom(const RunConfig& cfg) {
  const fs::path base = out_path(cfg, files::phantom);
  require_input(header_path(base), "phantom");
  Phantom ph = read_phantom(base);
  if (!(ph.volume.grid() == cfg.grid)) throw UsageError("phantom on disk does not match the configured grid");
  return ph;
}

std::vector<double> ideal_grid(const RunConfig& cfg) {
  if (!cfg.ideal_a_grid.empty()) return cfg.ideal_a_grid;
  std::vector<double> g;
  for (int k = 1; k <= 80; ++k) g.push_back(0.025 * k);
  return g;
}

} // namespace

ForwardModel RunConfig::model() const {
  return ForwardModel(grid, TiltGeometry::uniform(views, min_angle_deg, max_angle_deg, grid, tilt_axis), psf_sigma,
                      ray_step);
}

PhantomSpec RunConfig::phantom_spec() const {
  PhantomSpec s;
  s.kind = phantom_kind;
  s.count = phantom_count;
  s.size_range = {phantom_size[0] * grid.voxel_size, phantom_size[1] * grid.voxel_size};
  s.contrast_range = phantom_contrast;
  s.y_radius_fraction = y_radius_fraction;
  s.seed = derive_key(seed, 0x50);
  return s;
}

NoiseModel RunConfig::noise() const { return {dose_per_pixel, derive_key(seed, 0x51)}; }

std::uint64_t RunConfig::translation_seed() const { return derive_key(seed, 0x52); }

SminConfig RunConfig::smin(double a_value) const {
  SminConfig c;
  c.a = a_value;
  c.expected_false_count = mu;
  return c;
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  Section root(j, "");

  {
    Section s = root.require_sub("grid");
    const auto dims = s.require<std::vector<std::size_t>>("dims");
    check(dims.size() == 3, "grid.dims", "expected 3 entries");
    check(dims[0] > 0 && dims[1] > 0 && dims[2] > 0, "grid.dims", "every entry must be positive");
    const double vs = s.get<double>("voxel_size", 1.0);
    check(vs > 0.0 && std::isfinite(vs), "grid.voxel_size", "must be positive");
    c.grid = Grid::centered({dims[0], dims[1], dims[2]}, vs);
    s.finish();
  }
  {
    Section s = root.sub("geometry");
    c.views = s.get<std::size_t>("views", c.views);
    c.min_angle_deg = s.get<double>("min_angle_deg", c.min_angle_deg);
    c.max_angle_deg = s.get<double>("max_angle_deg", c.max_angle_deg);
    const auto axis = s.get<std::string>("tilt_axis", "y");
    check(axis == "x" || axis == "y", "geometry.tilt_axis", "must be \"x\" or \"y\"");
    c.tilt_axis = axis == "x" ? TiltAxis::x : TiltAxis::y;
    c.psf_sigma = s.get<double>("psf_sigma", c.psf_sigma);
    c.ray_step = s.get<double>("ray_step", c.ray_step);
    check(c.views >= 1, "geometry.views", "must be >= 1");
    check(c.min_angle_deg > -90.0 && c.max_angle_deg < 90.0, "geometry", "angles must lie in (-90, 90)");
    check(c.views == 1 ? c.min_angle_deg == c.max_angle_deg : c.min_angle_deg < c.max_angle_deg,
          "geometry.max_angle_deg", "must exceed min_angle_deg");
    check(c.psf_sigma >= 0.0, "geometry.psf_sigma", "must be >= 0");
    check(c.ray_step > 0.0, "geometry.ray_step", "must be positive");
    s.finish();
  }
  {
    Section s = root.sub("noise");
    c.dose_per_pixel = s.get<double>("dose_per_pixel", c.dose_per_pixel);
    check(c.dose_per_pixel > 0.0 && std::isfinite(c.dose_per_pixel), "noise.dose_per_pixel", "must be positive");
    s.finish();
  }
  {
    Section s = root.sub("phantom");
    const auto kind = s.get<std::string>("kind", "balls");
    check(kind == "balls" || kind == "y_shapes", "phantom.kind", "must be \"balls\" or \"y_shapes\"");
    c.phantom_kind = kind == "balls" ? PhantomKind::balls : PhantomKind::y_shapes;
    c.phantom_count = s.get<std::size_t>("count", c.phantom_count);
    c.phantom_size = s.get<std::array<double, 2>>("size_range", c.phantom_size);
    c.phantom_contrast = s.get<std::array<double, 2>>("contrast_range", c.phantom_contrast);
    c.y_radius_fraction = s.get<double>("y_radius_fraction", c.y_radius_fraction);
    check(c.phantom_count >= 1, "phantom.count", "must be >= 1");
    check(c.phantom_size[0] > 0.0 && c.phantom_size[0] <= c.phantom_size[1], "phantom.size_range",
          "must be positive and ordered");
    check(c.phantom_contrast[0] > 0.0 && c.phantom_contrast[0] <= c.phantom_contrast[1], "phantom.contrast_range",
          "must be positive and ordered");
    check(c.y_radius_fraction > 0.0, "phantom.y_radius_fraction", "must be positive");
    s.finish();
  }
  {
    Section s = root.sub("choice");
    c.diameters = s.get<std::vector<double>>("diameters", c.diameters);
    c.a = s.get<double>("a", c.a);
    c.a_grid = s.get<std::vector<double>>("a_grid", c.a_grid);
    c.mu = s.get<double>("mu", c.mu);
    c.translations = s.get<std::size_t>("translations", c.translations);
    check(!c.diameters.empty(), "choice.diameters", "must be nonempty");
    for (double d : c.diameters) check(d > 0.0 && std::isfinite(d), "choice.diameters", "entries must be positive");
    check(c.a >= 0.0 && std::isfinite(c.a), "choice.a", "must be >= 0");
    check(!c.a_grid.empty(), "choice.a_grid", "must be nonempty");
    for (double a : c.a_grid) check(a >= 0.0 && std::isfinite(a), "choice.a_grid", "entries must be >= 0");
    check_increasing(c.a_grid, "choice.a_grid");
    check(c.mu > 0.0 && std::isfinite(c.mu), "choice.mu", "must be positive");
    check(c.translations >= 2, "choice.translations", "must be >= 2");
    s.finish();
  }
  {
    Section s = root.sub("solver");
    c.solver.max_iters = s.get<std::size_t>("max_iters", c.solver.max_iters);
    c.solver.rel_change_tol = s.get<double>("rel_change_tol", c.solver.rel_change_tol);
    c.solver.inner_newton_iters = s.get<std::size_t>("inner_newton_iters", c.solver.inner_newton_iters);
    c.solver.patience = s.get<std::size_t>("patience", c.solver.patience);
    c.solver.nonneg = s.get<bool>("nonneg", c.solver.nonneg);
    c.solver.tv.beta = s.get<double>("beta", c.solver.tv.beta);
    c.lambdas = s.get<std::vector<double>>("lambdas", c.lambdas);
    c.lambda_factors = s.get<std::vector<double>>("lambda_factors", c.lambda_factors);
    check(c.solver.max_iters >= 1, "solver.max_iters", "must be >= 1");
    check(c.solver.rel_change_tol >= 0.0, "solver.rel_change_tol", "must be >= 0");
    check(c.solver.inner_newton_iters >= 1, "solver.inner_newton_iters", "must be >= 1");
    check(c.solver.patience >= 1, "solver.patience", "must be >= 1");
    check(c.solver.tv.beta > 0.0 && std::isfinite(c.solver.tv.beta), "solver.beta", "must be > 0");
    for (double l : c.lambdas) check(l >= 0.0 && std::isfinite(l), "solver.lambdas", "entries must be >= 0");
    for (double f : c.lambda_factors)
      check(f >= 0.0 && std::isfinite(f), "solver.lambda_factors", "entries must be >= 0");
    s.finish();
  }
  {
    Section s = root.sub("analysis");
    c.analysis_a = s.get<double>("a", c.analysis_a);
    const int conn = s.get<int>("connectivity", 6);
    check(conn == 6 || conn == 26, "analysis.connectivity", "must be 6 or 26");
    c.connectivity = parse_connectivity(conn);
    c.ideal_a_grid = s.get<std::vector<double>>("a_grid", c.ideal_a_grid);
    check(c.analysis_a >= 0.0, "analysis.a", "must be >= 0");
    check_increasing(c.ideal_a_grid, "analysis.a_grid");
    s.finish();
  }
  c.seed = root.get<std::uint64_t>("seed", c.seed);
  c.out_dir = root.get<std::string>("output", c.out_dir.string());
  root.finish();
  return c;
}

RunConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(j);
}

json cmd_phantom(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const Phantom ph = make_phantom(cfg.phantom_spec(), cfg.grid);
  write_phantom(ph, out_path(cfg, files::phantom));
  std::size_t voxels = 0;
  double min_contrast = ph.objects.front().contrast;
  for (const auto& o : ph.objects) {
    voxels += o.voxels.size();
    min_contrast = std::min(min_contrast, o.contrast);
  }
  return {{"command", "phantom"},
          {"objects", ph.objects.size()},
          {"object_voxels", voxels},
          {"min_contrast", min_contrast},
          {"output", out_path(cfg, files::phantom).string()}};
}

json cmd_simulate(const RunConfig& cfg) {
  const Phantom ph = load_phantom(cfg);
  const ForwardModel model = cfg.model();
  const ProjectionStack clean = model.apply(ph.volume);
  const ProjectionStack g = simulate_detection(clean, cfg.noise());
  write_stack(g, out_path(cfg, files::data));

  // Realized counts are recovered from g = ln n0 - ln(N + 1/2).
  const double n0 = incident_counts(clean, cfg.dose_per_pixel);
  const auto gv = g.data();
  const auto cv = clean.data();
  double counts = 0.0, mean_clean = 0.0;
  for (std::size_t n = 0; n < gv.size(); ++n) {
    counts += n0 * std::exp(-gv[n]) - 0.5;
    mean_clean += cv[n];
  }
  const double npix = static_cast<double>(gv.size());
  counts /= npix;
  mean_clean /= npix;
  // Signal variance of the clean images over the expected noise variance
  // 1/(n0 exp(-p)) of the log data.
  double sig = 0.0, noise_var = 0.0;
  for (double p : cv) {
    sig += (p - mean_clean) * (p - mean_clean);
    noise_var += 1.0 / (n0 * std::exp(-p));
  }
  const double snr = std::sqrt(sig / noise_var);
  return {{"command", "simulate"},
          {"images", g.num_images()},
          {"detector", {g.geometry().nu, g.geometry().nv}},
          {"incident_counts", n0},
          {"mean_counts_per_pixel", counts},
          {"snr", snr},
          {"output", out_path(cfg, files::data).string()}};
}

ChooseResult cmd_choose(const RunConfig& cfg) {
  const ForwardModel model = cfg.model();
  const ProjectionStack g = load_data(cfg, model);
  const SigmaEstimator estimator(g, model);
  const auto stats = measure_diameters(estimator, cfg.diameters, cfg.translations, cfg.translation_seed());
  const double omega = cfg.grid.omega_voxels();

  ChooseResult out;
  out.report = select_lambda(stats, cfg.smin(cfg.a), omega);
  out.report.translations = cfg.translations;
  out.report.seed = cfg.translation_seed();

  std::string curve = "a,lambda,binding_d\n";
  for (double a : cfg.a_grid) {
    auto rep = select_lambda(stats, cfg.smin(a), omega);
    rep.translations = cfg.translations;
    rep.seed = cfg.translation_seed();
    curve += fmt(a) + ',' + fmt(rep.lambda) + ',' +
             (rep.binding ? fmt(rep.rows[*rep.binding].stats.diameter) : std::string()) + '\n';
    out.by_a.emplace_back(a, std::move(rep));
  }
  write_text_atomic(out_path(cfg, files::lambda_of_a), curve);
  write_text_atomic(out_path(cfg, files::choose_diameters), report_csv(out.report));
  write_text_atomic(out_path(cfg, files::choose_report), report_json(out.report));
  return out;
}

double chosen_lambda(const RunConfig& cfg) {
  const fs::path p = out_path(cfg, files::choose_report);
  require_input(p, "choose");
  const json j = json::parse(read_text(p));
  if (!j.contains("lambda") || !j.at("lambda").is_number()) throw FormatError(p.string() + ": missing `lambda`");
  return j.at("lambda").get<double>();
}

std::vector<ReconstructionEntry> cmd_reconstruct(const RunConfig& cfg, const std::vector<double>& lambdas_in,
                                                 std::size_t jobs) {
  std::vector<double> lambdas = lambdas_in;
  if (lambdas.empty()) lambdas = cfg.lambdas;
  if (lambdas.empty()) {
    const double star = chosen_lambda(cfg);
    for (double f : cfg.lambda_factors) lambdas.push_back(f * star);
  }
  if (lambdas.empty()) throw UsageError("no lambda values to reconstruct");
  for (double l : lambdas)
    if (!(l >= 0.0) || !std::isfinite(l)) throw UsageError("lambda values must be finite and >= 0");

  const ForwardModel model = cfg.model();
  const ProjectionStack g = load_data(cfg, model);
  jobs = std::max<std::size_t>(1, jobs);

  std::vector<ReconstructionEntry> entries(lambdas.size());
  auto run = [&](std::size_t k) {
    SolverConfig sc = cfg.solver;
    sc.tv.lambda = lambdas[k];
    const SolveResult res = solve(g, model, sc);
    char name[32];
    std::snprintf(name, sizeof name, "recon_%02zu", k);
    write_volume(res.reconstruction, out_path(cfg, name));
    write_text_atomic(out_path(cfg, std::string("trace_") + (name + 6) + ".csv"), trace_csv(res));
    entries[k] = {lambdas[k], name, res.iterations_used, res.converged, res.objective_trace.back()};
  };
  for (std::size_t first = 0; first < lambdas.size(); first += jobs) {
    const std::size_t last = std::min(lambdas.size(), first + jobs);
    if (last - first == 1) {
      run(first);
      continue;
    }
    std::vector<std::future<void>> pending;
    for (std::size_t k = first; k < last; ++k) pending.push_back(std::async(std::launch::async, run, k));
    for (auto& f : pending) f.get();
  }

  json list = json::array();
  for (const auto& e : entries)
    list.push_back({{"lambda", e.lambda},
                    {"base", e.base},
                    {"iterations", e.iterations},
                    {"converged", e.converged},
                    {"objective", e.objective}});
  write_text_atomic(out_path(cfg, files::reconstructions), json{{"reconstructions", list}}.dump(2) + "\n");
  return entries;
}

json cmd_analyze(const RunConfig& cfg) {
  const fs::path manifest = out_path(cfg, files::reconstructions);
  require_input(manifest, "reconstruct");
  const json j = json::parse(read_text(manifest));
  if (!j.contains("reconstructions") || !j.at("reconstructions").is_array())
    throw FormatError(manifest.string() + ": missing `reconstructions`");
  if (j.at("reconstructions").empty()) throw UsageError("no reconstructions to analyze");

  const Phantom ph = load_phantom(cfg);
  std::vector<Reconstruction> recs;
  for (const auto& e : j.at("reconstructions"))
    recs.push_back({e.at("lambda").get<double>(), read_volume(out_path(cfg, e.at("base").get<std::string>()))});

  const auto rows = hit_table(recs, ph, cfg.analysis_a, cfg.connectivity);
  const auto curve = ideal_rule_sweep(recs, ph, ideal_grid(cfg), cfg.connectivity);
  write_text_atomic(out_path(cfg, files::hits_csv), hit_table_csv(rows));
  write_text_atomic(out_path(cfg, files::hits_json), hit_table_json(rows, cfg.analysis_a, cfg.connectivity));
  write_text_atomic(out_path(cfg, files::ideal_csv), ideal_curve_csv(curve));
  write_text_atomic(out_path(cfg, files::ideal_json), ideal_curve_json(curve, cfg.connectivity));

  json table = json::array();
  for (std::size_t k = 0; k < rows.size(); ++k)
    table.push_back({{"lambda", rows[k].lambda},
                     {"true_hits", rows[k].true_hits},
                     {"false_hits", rows[k].false_hits},
                     {"a_ideal", curve[k].a_ideal}});
  return {{"command", "analyze"}, {"a", cfg.analysis_a}, {"rows", table}};
}

json cmd_significance(const RunConfig& cfg, const fs::path& feature, std::optional<double> lambda) {
  const ForwardModel model = cfg.model();
  const ProjectionStack g = load_data(cfg, model);
  const Volume f = read_volume(feature);
  model.check_volume(f);
  const double lam = lambda ? *lambda : chosen_lambda(cfg);
  const auto sig = feature_significance(f, lam, g, model, cfg.translations, cfg.translation_seed());
  const json out{{"command", "significance"},
                 {"feature", feature.string()},
                 {"lambda", lam},
                 {"tv", sig.tv},
                 {"sigma", sig.sigma},
                 {"s_lambda", sig.s_lambda},
                 {"tail_probability", sig.tail_probability}};
  write_text_atomic(out_path(cfg, files::significance), out.dump(2) + "\n");
  return out;
}

std::string error_json(const std::string& kind, const std::string& message) {
  return json{{"error", kind}, {"message", message}}.dump();
}

} // namespace tvp::cli
