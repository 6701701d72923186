#pragma once

#include <span>
#include <vector>

#include "tvp/volume.hpp"

namespace tvp {

// Parallel-beam tilt-series projector followed by a Gaussian PSF.
//
// Each detector pixel owns one ray. Rays are sampled every `step` voxels with
// trilinear interpolation, and every sample carries weight step*voxel_size
// (the path length it represents). The adjoint scatters with the same weights,
// so it is the exact transpose of the discretized operator.
//
// Two inner products appear on the data side:
//   * the plain coefficient sum used by the dot test, sum_p (Af)_p g_p, and
//   * the pixel-area weighted one, pixel_area * sum_p (Af)_p g_p, which is what
//     `inner` returns and what the objective and the noise statistics use.
class ForwardModel {
public:
  ForwardModel(Grid grid, TiltGeometry geometry, double psf_sigma = 0.0, double step = 1.0);

  [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
  [[nodiscard]] const TiltGeometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] double psf_sigma() const noexcept { return psf_sigma_; }
  [[nodiscard]] double step() const noexcept { return step_; }
  [[nodiscard]] std::size_t num_images() const noexcept { return geometry_.num_images(); }
  [[nodiscard]] double pixel_area() const noexcept { return geometry_.pixel_area(); }

  [[nodiscard]] ProjectionStack apply(const Volume& f) const;
  [[nodiscard]] std::vector<double> apply_single(const Volume& f, std::size_t j) const;

  // Transpose of `apply` with respect to the plain coefficient sums.
  [[nodiscard]] Volume adjoint(const ProjectionStack& g) const;
  [[nodiscard]] Volume adjoint_single(std::span<const double> image, std::size_t j) const;

  // <Tf, g> = pixel_area * sum_p (Tf)_p g_p.
  [[nodiscard]] double inner(const Volume& f, const ProjectionStack& g) const;
  [[nodiscard]] double inner_single(const Volume& f, const ProjectionStack& g, std::size_t j) const;
  // Pixel-area weighted inner product of two stacks.
  [[nodiscard]] double stack_inner(const ProjectionStack& a, const ProjectionStack& b) const;

  // Applies the PSF to one image in place. Identity when psf_sigma == 0. The
  // kernel is symmetric with zero padding, so this map is its own transpose.
  void blur(std::span<double> image) const;

  void check_volume(const Volume& f) const;
  void check_stack(const ProjectionStack& g) const;

private:
  struct Ray {
    Vec3 start;  // continuous voxel index at t = 0
    Vec3 delta;  // index increment per sample
  };

  [[nodiscard]] Ray ray(std::size_t j, std::size_t iu, std::size_t iv) const;

  template <class Visit>
  void trace(const Ray& r, Visit&& visit) const;

  void project_image(const Volume& f, std::size_t j, std::span<double> out) const;
  void backproject_image(std::span<const double> image, std::size_t j, Volume& out) const;

  Grid grid_;
  TiltGeometry geometry_;
  double psf_sigma_;
  double step_;
  std::vector<double> kernel_;  // one-sided Gaussian taps, kernel_[0] is the center
};

} // namespace tvp
