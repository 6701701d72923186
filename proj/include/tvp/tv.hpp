#pragma once

#include <array>
#include <memory>

#include "tvp/volume.hpp"

namespace tvp {

// R(f) = lambda * sum over I-bar of sqrt(beta^2 + 1/2 sum_l (D_l^+ f)^2 + (D_l^- f)^2)
// where f is extended by zero outside the grid and I-bar is the grid dilated by
// one voxel in the 6-neighborhood. Differences are taken in voxel units.
struct TvConfig {
  double lambda = 1.0;
  double beta = 3e-4;

  void validate() const;
};

[[nodiscard]] double tv_value(const Volume& f, const TvConfig& cfg);

// Gradient of tv_value with respect to the voxel values. Requires beta > 0.
[[nodiscard]] Volume tv_gradient(const Volume& f, const TvConfig& cfg);

// R restricted to the plane f + c[0] d1 + c[1] d2: value, gradient and Hessian
// in the two coefficients. hess = {h11, h12, h22}. The derivatives require
// beta > 0; with beta = 0 they are skipped at points where R is not smooth.
struct PlaneTv {
  double value = 0.0;
  std::array<double, 2> grad{};
  std::array<double, 3> hess{};
};

class TvPlane {
public:
  TvPlane(const Volume& f, const Volume& d1, const Volume& d2, const TvConfig& cfg);
  ~TvPlane();
  TvPlane(const TvPlane&) = delete;
  TvPlane& operator=(const TvPlane&) = delete;

  [[nodiscard]] PlaneTv operator()(const std::array<double, 2>& c) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace tvp
