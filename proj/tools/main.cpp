#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pipeline.hpp"
#include "tvp/error.hpp"

namespace {

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << tvp::cli::error_json(kind, message) << '\n';
  return code;
}

} // namespace

int main(int argc, char** argv) {
  using namespace tvp::cli;
  CLI::App app{"TV-regularized tomography with an error-free parameter choice"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seed", seed, "base seed (overrides the config)");
  app.add_option("--jobs", jobs, "concurrent reconstructions")->check(CLI::PositiveNumber);

  auto* phantom = app.add_subcommand("phantom", "generate the ground-truth phantom");
  auto* simulate = app.add_subcommand("simulate", "simulate a noisy tilt series");
  auto* choose = app.add_subcommand("choose", "choose lambda from the data");
  auto* reconstruct = app.add_subcommand("reconstruct", "TV reconstructions for one or more lambdas");
  std::vector<double> lambdas;
  reconstruct->add_option("--lambda", lambdas, "lambda values (default: config list or factors of the chosen one)");
  auto* analyze = app.add_subcommand("analyze", "hit tables and the ideal threshold curve");
  auto* significance = app.add_subcommand("significance", "significance of a feature volume");
  std::string feature;
  std::optional<double> sig_lambda;
  significance->add_option("--feature", feature, "feature volume base path")->required();
  significance->add_option("--lambda", sig_lambda, "lambda (default: the chosen one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed) cfg.seed = *seed;

    nlohmann::json summary;
    if (phantom->parsed()) {
      summary = cmd_phantom(cfg);
    } else if (simulate->parsed()) {
      summary = cmd_simulate(cfg);
    } else if (choose->parsed()) {
      const auto res = cmd_choose(cfg);
      summary = {{"command", "choose"}, {"a", cfg.a}, {"lambda", res.report.lambda}};
      if (res.report.binding) summary["binding_d"] = res.report.rows[*res.report.binding].stats.diameter;
      if (res.report.no_regularization()) summary["warning"] = "rule imposes no regularization";
    } else if (reconstruct->parsed()) {
      const auto entries = cmd_reconstruct(cfg, lambdas, jobs);
      nlohmann::json list = nlohmann::json::array();
      for (const auto& e : entries)
        list.push_back({{"lambda", e.lambda}, {"base", e.base}, {"iterations", e.iterations}, {"converged", e.converged}});
      summary = {{"command", "reconstruct"}, {"reconstructions", list}};
    } else if (analyze->parsed()) {
      summary = cmd_analyze(cfg);
    } else if (significance->parsed()) {
      summary = cmd_significance(cfg, feature, sig_lambda);
    }
    std::cout << summary.dump(2) << '\n';
    return 0;
  } catch (const tvp::UsageError& e) {
    return fail(e.kind(), e.what(), 2);
  } catch (const tvp::Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
