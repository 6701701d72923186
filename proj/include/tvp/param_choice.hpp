#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tvp/projector.hpp"
#include "tvp/volume.hpp"

namespace tvp {

// Quantities entering the closed-form minimizer of
//   alpha -> r |alpha| + 1/2 || alpha T f - g ||^2
// along the line spanned by f.
struct LineMinInputs {
  double tf_g = 0.0;        // <Tf, g>
  double tf_norm_sq = 0.0;  // ||Tf||^2
  double r = 0.0;           // R_lambda(f)

  void validate() const;
};

// Soft-threshold solution: zero on the dead zone |tf_g| <= r, otherwise
// (tf_g -+ r) / tf_norm_sq. Throws NonUniqueError when tf_norm_sq == r == 0.
[[nodiscard]] double line_minimizer(const LineMinInputs& in);

// The line objective without its alpha-independent constant 1/2 ||g||^2.
[[nodiscard]] double line_objective(const LineMinInputs& in, double alpha) noexcept;

struct SigmaEstimate {
  double sigma = 0.0;
  std::vector<double> per_image_variances;
  std::size_t num_translations = 0;
  std::vector<Offset3> translations_used;
  std::uint64_t seed = 0;
};

// Estimates sigma(f) = Var[<Tf, G_noise>]^{1/2} from a single data set:
// for l random integer translations f_i of f, the per-image sample variance
// of <T_j f_i, g_j> is summed over images.
//
// <T_j f_i, g_j> = pixel_area * <f_i, T_j^T g_j>, so the per-image
// back-projections T_j^T g_j are computed once and each translation costs only
// a sum over the support of f.
class SigmaEstimator {
public:
  SigmaEstimator(const ProjectionStack& data, const ForwardModel& model);

  [[nodiscard]] SigmaEstimate estimate(const Volume& f, std::size_t translations, std::uint64_t seed) const;

  [[nodiscard]] const ForwardModel& model() const noexcept { return model_; }

private:
  ForwardModel model_;
  std::vector<Volume> backprojections_;
};

[[nodiscard]] SigmaEstimate estimate_sigma(const Volume& f, const ProjectionStack& data, const ForwardModel& model,
                                           std::size_t translations, std::uint64_t seed);

// Uniformly samples `count` distinct integer offsets that keep the support of
// f inside the grid. Throws CapacityError if fewer placements exist.
[[nodiscard]] std::vector<Offset3> sample_translations(const Volume& f, std::size_t count, std::uint64_t seed);

// s_lambda(f) = lambda * TV(f) / sigma(f), TV evaluated with beta = 0.
[[nodiscard]] double compute_s_lambda(const Volume& f, double lambda, const SigmaEstimate& sigma);

struct SminConfig {
  double a = 0.5;                    // amplitude threshold
  double expected_false_count = 1.0; // mu
  double omega_volume = 0.0;         // |Omega| in voxels; 0 means "use the grid"
  int dimension = 3;

  void validate() const;
};

// s_min(f_d) = sqrt(2) erfc^{-1}(mu d^n / |Omega|) - a ||Tf_d||^2 / (sigma ||f_d||_inf).
// `diameter` is in voxel units.
[[nodiscard]] double smin_value(double diameter, double tf_norm_sq, double sigma, double linf, double omega_volume,
                                const SminConfig& cfg);
[[nodiscard]] double compute_smin(const Volume& f_d, double diameter, const ForwardModel& model,
                                  const SigmaEstimate& sigma, const SminConfig& cfg);

// Everything about a test ball that does not depend on the threshold a.
struct DiameterStats {
  double diameter = 0.0;  // voxels
  double tv = 0.0;        // ||f_d||_TV (beta = 0, lambda = 1)
  double sigma = 0.0;
  double tf_norm_sq = 0.0;
  double linf = 0.0;
  std::size_t voxel_count = 0;
};

struct DiameterRow {
  DiameterStats stats;
  double s_min = 0.0;
  double lambda_d = 0.0;  // sigma * max(s_min, 0) / tv
};

struct ParamChoiceReport {
  SminConfig cfg;
  double omega_volume = 0.0;
  std::vector<DiameterRow> rows;
  double lambda = 0.0;
  std::optional<std::size_t> binding;  // row index attaining the maximum
  std::size_t translations = 0;
  std::uint64_t seed = 0;

  // True when every s_min <= 0: the rule imposes no regularization.
  [[nodiscard]] bool no_regularization() const noexcept { return lambda == 0.0; }
};

// Rasterizes a unit ball of each diameter (voxel units) at the grid center and
// measures its a-independent statistics.
[[nodiscard]] std::vector<DiameterStats> measure_diameters(const SigmaEstimator& estimator,
                                                           const std::vector<double>& diameters,
                                                           std::size_t translations, std::uint64_t seed);

// Smallest lambda with s_lambda(f_d) >= s_min(f_d) for every d. Since s_lambda
// is linear in lambda this is max_d sigma_d max(s_min_d, 0) / TV_d.
[[nodiscard]] ParamChoiceReport select_lambda(const std::vector<DiameterStats>& stats, const SminConfig& cfg,
                                              double default_omega_volume);

[[nodiscard]] ParamChoiceReport choose_lambda(const ProjectionStack& data, const ForwardModel& model,
                                              const std::vector<double>& diameters, const SminConfig& cfg,
                                              std::size_t translations, std::uint64_t seed);

[[nodiscard]] std::vector<double> default_diameters();

struct FeatureSignificance {
  double s_lambda = 0.0;
  double tail_probability = 1.0;  // erfc(s_lambda / sqrt 2)
  double sigma = 0.0;
  double tv = 0.0;
};

[[nodiscard]] FeatureSignificance feature_significance(const Volume& f, double lambda, const ProjectionStack& data,
                                                       const ForwardModel& model, std::size_t translations,
                                                       std::uint64_t seed);

[[nodiscard]] std::string report_json(const ParamChoiceReport& report);
// One row per diameter.
[[nodiscard]] std::string report_csv(const ParamChoiceReport& report);

} // namespace tvp
