#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvp/analysis.hpp"
#include "tvp/param_choice.hpp"
#include "tvp/phantom.hpp"
#include "tvp/solver.hpp"

namespace tvp::cli {

// Declarative experiment description. Lengths (phantom sizes, test-ball
// diameters) are in voxels; the voxel size doubles as the attenuation scale.
struct RunConfig {
  Grid grid;
  std::size_t views = 31;
  double min_angle_deg = -60.0;
  double max_angle_deg = 60.0;
  TiltAxis tilt_axis = TiltAxis::y;
  double psf_sigma = 0.0;
  double ray_step = 1.0;

  double dose_per_pixel = 15.7;

  PhantomKind phantom_kind = PhantomKind::balls;
  std::size_t phantom_count = 30;
  std::array<double, 2> phantom_size{4.0, 8.0};
  std::array<double, 2> phantom_contrast{1.0, 2.0};
  double y_radius_fraction = 0.25;

  std::vector<double> diameters = default_diameters();
  double a = 0.5;
  std::vector<double> a_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double mu = 1.0;
  std::size_t translations = 100;

  SolverConfig solver;
  std::vector<double> lambdas;                  // explicit list, wins over factors
  std::vector<double> lambda_factors{1.0};      // multiples of the chosen lambda

  double analysis_a = 0.5;
  Connectivity connectivity = Connectivity::face6;
  std::vector<double> ideal_a_grid;             // empty: 0.025 steps up to 2

  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";

  [[nodiscard]] ForwardModel model() const;
  [[nodiscard]] PhantomSpec phantom_spec() const;
  [[nodiscard]] NoiseModel noise() const;
  [[nodiscard]] std::uint64_t translation_seed() const;
  [[nodiscard]] SminConfig smin(double a_value) const;
};

// Throws ConfigError naming the offending key path (e.g. `grid.dims`).
[[nodiscard]] RunConfig parse_config(const nlohmann::json& j);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

// File names inside the output directory.
namespace files {
inline constexpr const char* phantom = "phantom";
inline constexpr const char* data = "data";
inline constexpr const char* choose_report = "choose_report.json";
inline constexpr const char* choose_diameters = "choose_diameters.csv";
inline constexpr const char* lambda_of_a = "lambda_of_a.csv";
inline constexpr const char* reconstructions = "reconstructions.json";
inline constexpr const char* hits_csv = "hits.csv";
inline constexpr const char* hits_json = "hits.json";
inline constexpr const char* ideal_csv = "ideal_rule.csv";
inline constexpr const char* ideal_json = "ideal_rule.json";
inline constexpr const char* significance = "significance.json";
} // namespace files

struct ChooseResult {
  ParamChoiceReport report;  // at cfg.a
  std::vector<std::pair<double, ParamChoiceReport>> by_a;
};

struct ReconstructionEntry {
  double lambda = 0.0;
  std::string base;  // relative to the output directory
  std::size_t iterations = 0;
  bool converged = false;
  double objective = 0.0;
};

// Each command reads what earlier commands left in cfg.out_dir, writes its
// own outputs atomically and returns a JSON summary.
nlohmann::json cmd_phantom(const RunConfig& cfg);
nlohmann::json cmd_simulate(const RunConfig& cfg);
ChooseResult cmd_choose(const RunConfig& cfg);
std::vector<ReconstructionEntry> cmd_reconstruct(const RunConfig& cfg, const std::vector<double>& lambdas,
                                                 std::size_t jobs);
nlohmann::json cmd_analyze(const RunConfig& cfg);
nlohmann::json cmd_significance(const RunConfig& cfg, const std::filesystem::path& feature,
                                std::optional<double> lambda);

// Lambda read back from choose_report.json.
[[nodiscard]] double chosen_lambda(const RunConfig& cfg);

[[nodiscard]] std::string error_json(const std::string& kind, const std::string& message);

} // namespace tvp::cli
