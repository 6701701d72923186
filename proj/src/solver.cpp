#include "tvp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "tvp/error.hpp"

namespace tvp {

namespace {

double stack_norm_sq(const ProjectionStack& a) { return dot(a, a); }

// a + t * b, in place
void add_scaled(std::span<double> a, double t, std::span<const double> b) {
  for (std::size_t n = 0; n < a.size(); ++n) a[n] += t * b[n];
}

// Objective restricted to the plane f + c1 d1 + c2 d2. The data part is an
// exact quadratic in c built from A d1 and A d2.
class PlaneObjective {
public:
  PlaneObjective(const Volume& f, const Volume& d1, const Volume& d2, const ProjectionStack& residual,
                 const ProjectionStack& a1, const ProjectionStack& a2, double area, const TvConfig& tv)
      : use_tv_(tv.lambda > 0.0) {
    if (use_tv_) plane_.emplace(f, d1, d2, tv);
    c0_ = 0.5 * area * stack_norm_sq(residual);
    b_ = {area * dot(residual, a1), area * dot(residual, a2)};
    g_ = {area * dot(a1, a1), area * dot(a1, a2), area * dot(a2, a2)};
  }

  struct Eval {
    double value;
    std::array<double, 2> grad;
    std::array<double, 3> hess;
  };

  [[nodiscard]] Eval operator()(const std::array<double, 2>& c) const {
    PlaneTv t;
    if (use_tv_) t = (*plane_)(c);
    Eval e;
    e.value = t.value + c0_ + b_[0] * c[0] + b_[1] * c[1] +
              0.5 * (g_[0] * c[0] * c[0] + 2.0 * g_[1] * c[0] * c[1] + g_[2] * c[1] * c[1]);
    e.grad = {t.grad[0] + b_[0] + g_[0] * c[0] + g_[1] * c[1], t.grad[1] + b_[1] + g_[1] * c[0] + g_[2] * c[1]};
    e.hess = {t.hess[0] + g_[0], t.hess[1] + g_[1], t.hess[2] + g_[2]};
    return e;
  }

private:
  bool use_tv_;
  std::optional<TvPlane> plane_;
  double c0_ = 0.0;
  std::array<double, 2> b_{};
  std::array<double, 3> g_{};
};

struct InnerResult {
  std::array<double, 2> c{};
  double value = 0.0;
};

// Damped Newton with Armijo backtracking. With `dims` == 1 the second
// coefficient is held at its starting value.
InnerResult newton(const PlaneObjective& obj, std::array<double, 2> c, int dims, std::size_t iters) {
  auto e = obj(c);
  for (std::size_t it = 0; it < iters; ++it) {
    std::array<double, 2> step{};
    bool newton_dir = false;
    if (dims == 2) {
      const double det = e.hess[0] * e.hess[2] - e.hess[1] * e.hess[1];
      if (e.hess[0] > 0.0 && det > 1e-12 * e.hess[0] * e.hess[2]) {
        step = {(-e.hess[2] * e.grad[0] + e.hess[1] * e.grad[1]) / det,
                (e.hess[1] * e.grad[0] - e.hess[0] * e.grad[1]) / det};
        newton_dir = true;
      }
    }
    if (!newton_dir) {
      if (!(e.hess[0] > 0.0)) break;
      step = {-e.grad[0] / e.hess[0], 0.0};
    }
    const double slope = e.grad[0] * step[0] + e.grad[1] * step[1];
    if (!(slope < 0.0)) break;
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
      const std::array<double, 2> cand{c[0] + t * step[0], c[1] + t * step[1]};
      const auto ec = obj(cand);
      if (std::isfinite(ec.value) && ec.value <= e.value + 1e-4 * t * slope) {
        c = cand;
        e = ec;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double moved = t * std::hypot(step[0], step[1]);
    if (moved <= 1e-12 * std::max(1e-300, std::hypot(c[0], c[1]))) break;
  }
  return {c, e.value};
}

} // namespace

void SolverConfig::validate() const {
  if (max_iters < 1) throw PreconditionError("solver.max_iters must be >= 1");
  if (!(rel_change_tol >= 0.0)) throw PreconditionError("solver.rel_change_tol must be >= 0");
  if (inner_newton_iters < 1) throw PreconditionError("solver.inner_newton_iters must be >= 1");
  if (patience < 1) throw PreconditionError("solver.patience must be >= 1");
  tv.validate();
  if (!(tv.beta > 0.0)) throw PreconditionError("the solver requires beta > 0");
}

double objective(const Volume& f, const ProjectionStack& g, const ForwardModel& model, const TvConfig& tv) {
  model.check_volume(f);
  model.check_stack(g);
  ProjectionStack r = model.apply(f);
  add_scaled(r.data(), -1.0, g.data());
  return tv_value(f, tv) + 0.5 * model.pixel_area() * stack_norm_sq(r);
}

SolveResult solve(const ProjectionStack& g, const ForwardModel& model, const SolverConfig& cfg) {
  cfg.validate();
  model.check_stack(g);
  const double area = model.pixel_area();
  const bool use_tv = cfg.tv.lambda > 0.0;

  Volume f(model.grid());
  ProjectionStack af(g.geometry());   // A f
  ProjectionStack residual = g;       // A f - g
  for (double& v : residual.data()) v = -v;

  auto objective_now = [&](const Volume& x, const ProjectionStack& res) {
    return (use_tv ? tv_value(x, cfg.tv) : 0.0) + 0.5 * area * stack_norm_sq(res);
  };

  SolveResult out;
  double phi = objective_now(f, residual);
  if (!std::isfinite(phi)) throw NumericalError("objective is not finite at iteration 0");
  out.objective_trace.push_back(phi);

  Volume prev_step(model.grid());
  ProjectionStack prev_image(g.geometry());
  bool have_prev = false;
  std::size_t quiet = 0;

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    Volume grad = model.adjoint(residual);
    for (double& v : grad.data()) v *= area;
    if (use_tv) add_scaled(grad.data(), 1.0, tv_gradient(f, cfg.tv).data());
    grad.require_finite("objective gradient");

    double gnorm = 0.0;
    for (double v : grad.data()) gnorm = std::max(gnorm, std::abs(v));
    if (gnorm == 0.0) {
      out.converged = true;
      break;
    }
    Volume d1 = scaled(grad, -1.0);
    const ProjectionStack a1 = model.apply(d1);

    const PlaneObjective plane(f, d1, prev_step, residual, a1, prev_image, area, cfg.tv);
    std::array<double, 2> start{0.0, 0.0};
    double line_value = std::numeric_limits<double>::quiet_NaN();
    if (cfg.record_line_search || !have_prev) {
      const auto line = newton(plane, start, 1, cfg.inner_newton_iters);
      start = line.c;
      line_value = line.value;
    }
    InnerResult best = have_prev ? newton(plane, start, 2, cfg.inner_newton_iters) : InnerResult{start, line_value};

    Volume f_new = f;
    add_scaled(f_new.data(), best.c[0], d1.data());
    add_scaled(f_new.data(), best.c[1], prev_step.data());
    ProjectionStack af_new = af;
    add_scaled(af_new.data(), best.c[0], a1.data());
    add_scaled(af_new.data(), best.c[1], prev_image.data());
    if (cfg.nonneg) {
      bool clipped = false;
      for (double& v : f_new.data())
        if (v < 0.0) {
          v = 0.0;
          clipped = true;
        }
      if (clipped) af_new = model.apply(f_new);
    }
    ProjectionStack res_new = af_new;
    add_scaled(res_new.data(), -1.0, g.data());
    const double phi_new = objective_now(f_new, res_new);
    if (!std::isfinite(phi_new))
      throw NumericalError("objective is not finite at iteration " + std::to_string(it));

    if (!(phi_new <= phi)) {
      // Rejected: retry from a pure gradient step, or stop if that was one.
      if (!have_prev) {
        out.converged = true;
        break;
      }
      have_prev = false;
      prev_step = Volume(model.grid());
      prev_image = ProjectionStack(g.geometry());
      continue;
    }

    for (std::size_t n = 0; n < f.size(); ++n) prev_step[n] = f_new[n] - f[n];
    {
      auto pi = prev_image.data();
      const auto an = af_new.data();
      const auto ao = af.data();
      for (std::size_t n = 0; n < pi.size(); ++n) pi[n] = an[n] - ao[n];
    }
    have_prev = true;
    f = std::move(f_new);
    af = std::move(af_new);
    residual = std::move(res_new);

    const double rel = (phi - phi_new) / std::max(std::abs(phi), std::numeric_limits<double>::min());
    phi = phi_new;
    out.objective_trace.push_back(phi);
    if (cfg.record_line_search) out.line_search_trace.push_back(line_value);
    out.iterations_used = it;

    quiet = rel < cfg.rel_change_tol ? quiet + 1 : 0;
    if (quiet >= cfg.patience) {
      out.converged = true;
      break;
    }
  }
  f.require_finite("reconstruction");
  out.reconstruction = std::move(f);
  return out;
}

std::string trace_csv(const SolveResult& result) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,objective\n";
  for (std::size_t k = 0; k < result.objective_trace.size(); ++k) os << k << ',' << result.objective_trace[k] << '\n';
  return os.str();
}

} // namespace tvp
