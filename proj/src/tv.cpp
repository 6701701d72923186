#include "tvp/tv.hpp"

#include <cmath>
#include <vector>

#include "tvp/error.hpp"

namespace tvp {

namespace {

// Zero-extended copy with a two-voxel border so every point of I-bar has all
// six neighbors in memory.
struct Padded {
  long nx, ny, nz;  // interior dims
  long sx, sy, sz;  // strides
  std::vector<double> v;

  explicit Padded(const Dims& d)
      : nx(static_cast<long>(d.nx)), ny(static_cast<long>(d.ny)), nz(static_cast<long>(d.nz)), sx(1),
        sy(nx + 4), sz((nx + 4) * (ny + 4)), v(static_cast<std::size_t>((nx + 4) * (ny + 4) * (nz + 4)), 0.0) {}

  Padded(const Volume& f) : Padded(f.dims()) {
    for (long z = 0; z < nz; ++z)
      for (long y = 0; y < ny; ++y)
        for (long x = 0; x < nx; ++x)
          v[at(x, y, z)] = f(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z));
  }

  [[nodiscard]] std::size_t at(long x, long y, long z) const noexcept {
    return static_cast<std::size_t>((x + 2) + sy * (y + 2) + sz * (z + 2));
  }
};

// Visits every point of I-bar with its padded linear index.
template <class Fn>
void for_each_ibar(const Padded& p, Fn&& fn) {
  for (long z = -1; z <= p.nz; ++z) {
    const int oz = (z < 0 || z >= p.nz) ? 1 : 0;
    for (long y = -1; y <= p.ny; ++y) {
      const int oy = oz + ((y < 0 || y >= p.ny) ? 1 : 0);
      if (oy > 1) continue;
      for (long x = -1; x <= p.nx; ++x) {
        const int ox = oy + ((x < 0 || x >= p.nx) ? 1 : 0);
        if (ox > 1) continue;
        fn(p.at(x, y, z));
      }
    }
  }
}

// Six one-sided differences at padded index i: D1+, D1-, D2+, D2-, D3+, D3-.
inline void differences(const Padded& p, std::size_t i, double* out) noexcept {
  const double* v = p.v.data();
  const double c = v[i];
  out[0] = v[i + p.sx] - c;
  out[1] = c - v[i - p.sx];
  out[2] = v[i + p.sy] - c;
  out[3] = c - v[i - p.sy];
  out[4] = v[i + p.sz] - c;
  out[5] = c - v[i - p.sz];
}

} // namespace

void TvConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("tv.lambda must be finite and >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("tv.beta must be finite and >= 0");
}

double tv_value(const Volume& f, const TvConfig& cfg) {
  cfg.validate();
  const Padded p(f);
  const double b2 = cfg.beta * cfg.beta;
  double total = 0.0;
  double d[6];
  for_each_ibar(p, [&](std::size_t i) {
    differences(p, i, d);
    const double q = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3] + d[4] * d[4] + d[5] * d[5];
    total += std::sqrt(b2 + 0.5 * q);
  });
  return cfg.lambda * total;
}

Volume tv_gradient(const Volume& f, const TvConfig& cfg) {
  cfg.validate();
  if (!(cfg.beta > 0.0)) throw PreconditionError("tv_gradient requires beta > 0");
  const Padded p(f);
  const double b2 = cfg.beta * cfg.beta;
  // half_inv[i] = 1 / (2 phi_i) on I-bar
  std::vector<double> half_inv(p.v.size(), 0.0);
  double d[6];
  for_each_ibar(p, [&](std::size_t i) {
    differences(p, i, d);
    const double q = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3] + d[4] * d[4] + d[5] * d[5];
    half_inv[i] = 0.5 / std::sqrt(b2 + 0.5 * q);
  });

  Volume g(f.grid());
  const double* v = p.v.data();
  const long strides[3] = {p.sx, p.sy, p.sz};
  for (long z = 0; z < p.nz; ++z)
    for (long y = 0; y < p.ny; ++y)
      for (long x = 0; x < p.nx; ++x) {
        const std::size_t i = p.at(x, y, z);
        double acc = 0.0;
        for (long s : strides) {
          const std::size_t lo = i - static_cast<std::size_t>(s);
          const std::size_t hi = i + static_cast<std::size_t>(s);
          acc += (v[i] - v[lo]) * (half_inv[lo] + half_inv[i]);
          acc -= (v[hi] - v[i]) * (half_inv[i] + half_inv[hi]);
        }
        g(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)) = cfg.lambda * acc;
      }
  return g;
}

struct TvPlane::Impl {
  Padded p0, p1, p2;
  TvConfig cfg;
};

TvPlane::TvPlane(const Volume& f, const Volume& d1, const Volume& d2, const TvConfig& cfg) {
  cfg.validate();
  if (f.dims() != d1.dims() || f.dims() != d2.dims()) throw ShapeError("TvPlane: dims differ");
  impl_ = std::make_unique<Impl>(Impl{Padded(f), Padded(d1), Padded(d2), cfg});
}

TvPlane::~TvPlane() = default;

PlaneTv TvPlane::operator()(const std::array<double, 2>& c) const {
  const Padded& p0 = impl_->p0;
  const Padded& p1 = impl_->p1;
  const Padded& p2 = impl_->p2;
  const double b2 = impl_->cfg.beta * impl_->cfg.beta;
  PlaneTv out;
  double e0[6], e1[6], e2[6];
  for_each_ibar(p0, [&](std::size_t i) {
    differences(p0, i, e0);
    differences(p1, i, e1);
    differences(p2, i, e2);
    double q = 0.0, u1 = 0.0, u2 = 0.0, m11 = 0.0, m12 = 0.0, m22 = 0.0;
    for (int k = 0; k < 6; ++k) {
      const double e = e0[k] + c[0] * e1[k] + c[1] * e2[k];
      q += e * e;
      u1 += e * e1[k];
      u2 += e * e2[k];
      m11 += e1[k] * e1[k];
      m12 += e1[k] * e2[k];
      m22 += e2[k] * e2[k];
    }
    const double phi = std::sqrt(b2 + 0.5 * q);
    out.value += phi;
    if (phi == 0.0) return;
    // phi^2 - beta^2 = q/2 has gradient u and Hessian m, so
    // phi' = u/(2 phi) and phi'' = m/(2 phi) - u u^T/(4 phi^3).
    const double inv = 1.0 / phi;
    const double inv3 = 0.5 * inv * inv * inv;
    out.grad[0] += u1 * inv;
    out.grad[1] += u2 * inv;
    out.hess[0] += m11 * inv - u1 * u1 * inv3;
    out.hess[1] += m12 * inv - u1 * u2 * inv3;
    out.hess[2] += m22 * inv - u2 * u2 * inv3;
  });
  const double lambda = impl_->cfg.lambda;
  out.value *= lambda;
  for (double& g : out.grad) g *= 0.5 * lambda;
  for (double& h : out.hess) h *= 0.5 * lambda;
  return out;
}

} // namespace tvp
