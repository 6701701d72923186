#include "tvp/param_choice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tvp/error.hpp"
#include "tvp/rng.hpp"
#include "tvp/special.hpp"
#include "tvp/tv.hpp"

namespace tvp {

void LineMinInputs::validate() const {
  if (!std::isfinite(tf_g) || !std::isfinite(tf_norm_sq) || !std::isfinite(r))
    throw DomainError("line minimizer inputs must be finite");
  if (tf_norm_sq < 0.0) throw DomainError("tf_norm_sq must be >= 0");
  if (r < 0.0) throw DomainError("r must be >= 0");
}

double line_minimizer(const LineMinInputs& in) {
  in.validate();
  if (in.tf_norm_sq == 0.0 && in.r == 0.0)
    throw NonUniqueError("Tf = 0 and R(f) = 0: the line minimizer is not unique");
  if (in.tf_g > in.r) return (in.tf_g - in.r) / in.tf_norm_sq;
  if (in.tf_g < -in.r) return (in.tf_g + in.r) / in.tf_norm_sq;
  return 0.0;
}

double line_objective(const LineMinInputs& in, double alpha) noexcept {
  return in.r * std::abs(alpha) + 0.5 * (in.tf_norm_sq * alpha * alpha - 2.0 * in.tf_g * alpha);
}

std::vector<Offset3> sample_translations(const Volume& f, std::size_t count, std::uint64_t seed) {
  const auto box = support_box(f);
  if (!box) throw PreconditionError("cannot translate an all-zero volume");
  std::array<std::uint64_t, 3> span{};
  std::uint64_t total = 1;
  for (int a = 0; a < 3; ++a) {
    span[a] = static_cast<std::uint64_t>(static_cast<std::ptrdiff_t>(f.dims()[a]) - box->extent(a) + 1);
    total *= span[a];
  }
  if (total < count)
    throw CapacityError("support of f admits only " + std::to_string(total) + " placements, " +
                        std::to_string(count) + " distinct translations requested");

  // Floyd's sampling of `count` distinct placement indices out of `total`.
  CounterRng rng(seed, 0x7A5);
  auto below = [&](std::uint64_t n) {  // uniform in [0, n)
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
  };
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = total - count; j < total; ++j) {
    const std::uint64_t t = below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }

  std::vector<Offset3> out;
  out.reserve(count);
  for (std::uint64_t idx : chosen) {
    Offset3 o{};
    std::uint64_t rest = idx;
    for (int a = 0; a < 3; ++a) {
      o[a] = static_cast<std::ptrdiff_t>(rest % span[a]) - box->lo[a];
      rest /= span[a];
    }
    out.push_back(o);
  }
  return out;
}

SigmaEstimator::SigmaEstimator(const ProjectionStack& data, const ForwardModel& model) : model_(model) {
  model_.check_stack(data);
  backprojections_.reserve(model_.num_images());
  for (std::size_t j = 0; j < model_.num_images(); ++j)
    backprojections_.push_back(model_.adjoint_single(data.image(j), j));
}

SigmaEstimate SigmaEstimator::estimate(const Volume& f, std::size_t translations, std::uint64_t seed) const {
  model_.check_volume(f);
  if (translations < 2) throw PreconditionError("sigma estimation needs at least 2 translations");

  SigmaEstimate est;
  est.seed = seed;
  est.num_translations = translations;
  est.translations_used = sample_translations(f, translations, seed);

  struct Entry {
    std::ptrdiff_t x, y, z;
    double value;
  };
  std::vector<Entry> support;
  const auto& d = f.dims();
  for (std::size_t k = 0; k < d.nz; ++k)
    for (std::size_t j = 0; j < d.ny; ++j)
      for (std::size_t i = 0; i < d.nx; ++i)
        if (f(i, j, k) != 0.0)
          support.push_back({static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(j),
                             static_cast<std::ptrdiff_t>(k), f(i, j, k)});

  const double area = model_.pixel_area();
  const auto l = static_cast<double>(translations);
  std::vector<double> values(translations);
  est.per_image_variances.reserve(backprojections_.size());
  double total = 0.0;
  for (const Volume& b : backprojections_) {
    for (std::size_t t = 0; t < translations; ++t) {
      const Offset3& o = est.translations_used[t];
      double acc = 0.0;
      for (const Entry& e : support)
        acc += e.value * b(static_cast<std::size_t>(e.x + o[0]), static_cast<std::size_t>(e.y + o[1]),
                           static_cast<std::size_t>(e.z + o[2]));
      values[t] = area * acc;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= l;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double var = ss / (l - 1.0);
    est.per_image_variances.push_back(var);
    total += var;
  }
  est.sigma = std::sqrt(total);
  return est;
}

SigmaEstimate estimate_sigma(const Volume& f, const ProjectionStack& data, const ForwardModel& model,
                             std::size_t translations, std::uint64_t seed) {
  return SigmaEstimator(data, model).estimate(f, translations, seed);
}

double compute_s_lambda(const Volume& f, double lambda, const SigmaEstimate& sigma) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be finite and >= 0");
  if (!(sigma.sigma > 0.0)) throw DegenerateNoiseError("sigma(f) = 0: s_lambda is undefined");
  return lambda * tv_value(f, {1.0, 0.0}) / sigma.sigma;
}

void SminConfig::validate() const {
  if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("a must be finite and >= 0");
  if (!(expected_false_count > 0.0) || !std::isfinite(expected_false_count))
    throw DomainError("expected_false_count must be positive");
  if (!(omega_volume >= 0.0) || !std::isfinite(omega_volume)) throw DomainError("omega_volume must be >= 0");
  if (dimension < 1) throw DomainError("dimension must be >= 1");
}

double smin_value(double diameter, double tf_norm_sq, double sigma, double linf, double omega_volume,
                  const SminConfig& cfg) {
  cfg.validate();
  if (!(diameter > 0.0)) throw DomainError("diameter must be positive");
  if (!(omega_volume > 0.0)) throw DomainError("omega_volume must be positive");
  if (!(sigma > 0.0)) throw DegenerateNoiseError("sigma(f_d) = 0: s_min is undefined");
  if (!(linf > 0.0)) throw DomainError("||f_d||_inf must be positive");
  const double tail = cfg.expected_false_count * std::pow(diameter, cfg.dimension) / omega_volume;
  if (!(tail < 2.0))
    throw DomainError("mu * d^n / |Omega| = " + std::to_string(tail) + " is outside the domain of erfc^-1");
  return std::numbers::sqrt2 * inv_erfc(tail) - cfg.a * tf_norm_sq / (sigma * linf);
}

double compute_smin(const Volume& f_d, double diameter, const ForwardModel& model, const SigmaEstimate& sigma,
                    const SminConfig& cfg) {
  const ProjectionStack tf = model.apply(f_d);
  const double omega = cfg.omega_volume > 0.0 ? cfg.omega_volume : f_d.grid().omega_voxels();
  return smin_value(diameter, model.stack_inner(tf, tf), sigma.sigma, linf_norm(f_d), omega, cfg);
}

std::vector<DiameterStats> measure_diameters(const SigmaEstimator& estimator, const std::vector<double>& diameters,
                                             std::size_t translations, std::uint64_t seed) {
  if (diameters.empty()) throw PreconditionError("diameter set D must be nonempty");
  const ForwardModel& model = estimator.model();
  const Grid& grid = model.grid();
  const Vec3 center = grid.voxel_center(grid.dims.nx / 2, grid.dims.ny / 2, grid.dims.nz / 2);
  std::vector<DiameterStats> out;
  for (std::size_t n = 0; n < diameters.size(); ++n) {
    const double d = diameters[n];
    if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("diameters must be positive");
    const Volume ball = rasterize_ball({center, d * grid.voxel_size, 1.0}, grid);
    DiameterStats s;
    s.diameter = d;
    s.tv = tv_value(ball, {1.0, 0.0});
    s.sigma = estimator.estimate(ball, translations, derive_key(seed, 0xD1A, n)).sigma;
    const ProjectionStack tf = model.apply(ball);
    s.tf_norm_sq = model.stack_inner(tf, tf);
    s.linf = linf_norm(ball);
    for (double v : ball.data()) s.voxel_count += v != 0.0 ? 1 : 0;
    out.push_back(s);
  }
  return out;
}

ParamChoiceReport select_lambda(const std::vector<DiameterStats>& stats, const SminConfig& cfg,
                                double default_omega_volume) {
  cfg.validate();
  ParamChoiceReport rep;
  rep.cfg = cfg;
  rep.omega_volume = cfg.omega_volume > 0.0 ? cfg.omega_volume : default_omega_volume;
  for (std::size_t n = 0; n < stats.size(); ++n) {
    const auto& s = stats[n];
    DiameterRow row;
    row.stats = s;
    row.s_min = smin_value(s.diameter, s.tf_norm_sq, s.sigma, s.linf, rep.omega_volume, cfg);
    row.lambda_d = row.s_min > 0.0 ? s.sigma * row.s_min / s.tv : 0.0;
    if (row.lambda_d > rep.lambda) {
      rep.lambda = row.lambda_d;
      rep.binding = n;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

ParamChoiceReport choose_lambda(const ProjectionStack& data, const ForwardModel& model,
                                const std::vector<double>& diameters, const SminConfig& cfg,
                                std::size_t translations, std::uint64_t seed) {
  cfg.validate();
  const SigmaEstimator estimator(data, model);
  auto rep = select_lambda(measure_diameters(estimator, diameters, translations, seed), cfg,
                           model.grid().omega_voxels());
  rep.translations = translations;
  rep.seed = seed;
  return rep;
}

std::vector<double> default_diameters() { return {2.0, 3.0, 4.0, 6.0, 8.0, 12.0}; }

FeatureSignificance feature_significance(const Volume& f, double lambda, const ProjectionStack& data,
                                         const ForwardModel& model, std::size_t translations, std::uint64_t seed) {
  const SigmaEstimate sigma = estimate_sigma(f, data, model, translations, seed);
  FeatureSignificance out;
  out.sigma = sigma.sigma;
  out.tv = tv_value(f, {1.0, 0.0});
  out.s_lambda = compute_s_lambda(f, lambda, sigma);
  out.tail_probability = std::erfc(out.s_lambda / std::numbers::sqrt2);
  return out;
}

std::string report_json(const ParamChoiceReport& report) {
  using nlohmann::json;
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"d", r.stats.diameter},
                    {"tv", r.stats.tv},
                    {"sigma", r.stats.sigma},
                    {"tf_norm_sq", r.stats.tf_norm_sq},
                    {"linf", r.stats.linf},
                    {"voxels", r.stats.voxel_count},
                    {"s_min", r.s_min},
                    {"lambda_d", r.lambda_d},
                    {"s_lambda", report.lambda * r.stats.tv / r.stats.sigma}});
  json doc{{"a", report.cfg.a},
           {"mu", report.cfg.expected_false_count},
           {"omega_volume", report.omega_volume},
           {"dimension", report.cfg.dimension},
           {"translations", report.translations},
           {"seed", report.seed},
           {"lambda", report.lambda},
           {"binding_d", report.binding ? json(report.rows[*report.binding].stats.diameter) : json(nullptr)},
           {"no_regularization", report.no_regularization()},
           {"rows", rows}};
  if (report.no_regularization()) doc["warning"] = "rule imposes no regularization: every s_min <= 0";
  return doc.dump(2) + "\n";
}

std::string report_csv(const ParamChoiceReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "d,tv,sigma,tf_norm_sq,linf,s_min,lambda_d,s_lambda\n";
  for (const auto& r : report.rows)
    os << r.stats.diameter << ',' << r.stats.tv << ',' << r.stats.sigma << ',' << r.stats.tf_norm_sq << ','
       << r.stats.linf << ',' << r.s_min << ',' << r.lambda_d << ',' << report.lambda * r.stats.tv / r.stats.sigma
       << '\n';
  return os.str();
}

} // namespace tvp
