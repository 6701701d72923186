#pragma once

#include <string>
#include <vector>

#include "tvp/projector.hpp"
#include "tvp/tv.hpp"
#include "tvp/volume.hpp"

namespace tvp {

struct SolverConfig {
  std::size_t max_iters = 500;
  double rel_change_tol = 1e-5;  // 0 runs all max_iters
  std::size_t inner_newton_iters = 10;
  // Consecutive iterations below rel_change_tol required to stop.
  std::size_t patience = 10;
  bool nonneg = false;
  TvConfig tv{};
  // Also run the pure gradient line search each iteration and record its value
  // (the 2-D search then starts from that point). Diagnostic, doubles the inner cost.
  bool record_line_search = false;

  void validate() const;
};

struct SolveResult {
  Volume reconstruction;
  // trace[0] is the objective at f = 0, trace[k] after accepted iteration k.
  std::vector<double> objective_trace;
  // Objective reached by the best pure-gradient step of each accepted
  // iteration, aligned with objective_trace[1..]. Only filled when
  // record_line_search is set.
  std::vector<double> line_search_trace;
  std::size_t iterations_used = 0;
  bool converged = false;
};

// R_lambda(f) + 1/2 ||Tf - g||^2 with the pixel-area weighted data norm.
[[nodiscard]] double objective(const Volume& f, const ProjectionStack& g, const ForwardModel& model,
                               const TvConfig& tv);

// Minimizes the objective from f = 0 by searching, at every iteration, the
// plane through f_k spanned by the gradient and the previous update.
[[nodiscard]] SolveResult solve(const ProjectionStack& g, const ForwardModel& model, const SolverConfig& cfg);

// Columns: iteration, objective.
[[nodiscard]] std::string trace_csv(const SolveResult& result);

} // namespace tvp
