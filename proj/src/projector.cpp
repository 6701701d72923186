#include "tvp/projector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tvp/error.hpp"

namespace tvp {

ForwardModel::ForwardModel(Grid grid, TiltGeometry geometry, double psf_sigma, double step)
    : grid_(grid), geometry_(std::move(geometry)), psf_sigma_(psf_sigma), step_(step) {
  grid_.validate();
  geometry_.validate();
  if (!(psf_sigma_ >= 0.0) || !std::isfinite(psf_sigma_)) throw DomainError("psf_sigma must be >= 0");
  if (!(step_ > 0.0) || !std::isfinite(step_)) throw DomainError("ray step must be positive");
  if (psf_sigma_ > 0.0) {
    const auto radius = static_cast<std::size_t>(std::ceil(4.0 * psf_sigma_));
    kernel_.resize(radius + 1);
    double total = 0.0;
    for (std::size_t i = 0; i <= radius; ++i) {
      const double x = static_cast<double>(i);
      kernel_[i] = std::exp(-x * x / (2.0 * psf_sigma_ * psf_sigma_));
      total += i == 0 ? kernel_[i] : 2.0 * kernel_[i];
    }
    for (double& w : kernel_) w /= total;
  }
}

void ForwardModel::check_volume(const Volume& f) const {
  if (f.dims() != grid_.dims)
    throw ShapeError("volume dims (" + std::to_string(f.dims().nx) + "," + std::to_string(f.dims().ny) + "," +
                     std::to_string(f.dims().nz) + ") do not match the forward model grid");
}

void ForwardModel::check_stack(const ProjectionStack& g) const {
  const auto& o = g.geometry();
  if (o.num_images() != geometry_.num_images() || o.nu != geometry_.nu || o.nv != geometry_.nv)
    throw ShapeError("projection stack geometry does not match the forward model");
}

ForwardModel::Ray ForwardModel::ray(std::size_t j, std::size_t iu, std::size_t iv) const {
  const double theta = geometry_.angles_deg[j] * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Vec3 dir, eu, ev;
  if (geometry_.axis == TiltAxis::y) {
    dir = {s, 0.0, c};
    eu = {c, 0.0, -s};
    ev = {0.0, 1.0, 0.0};
  } else {
    dir = {0.0, -s, c};
    eu = {0.0, c, s};
    ev = {1.0, 0.0, 0.0};
  }
  const double p = geometry_.pixel_size;
  const double u = (static_cast<double>(iu) - 0.5 * static_cast<double>(geometry_.nu - 1)) * p;
  const double v = (static_cast<double>(iv) - 0.5 * static_cast<double>(geometry_.nv - 1)) * p;
  Ray r;
  for (int a = 0; a < 3; ++a) {
    r.start[a] = (u * eu[a] + v * ev[a] - grid_.origin[a]) / grid_.voxel_size;
    r.delta[a] = step_ * dir[a];
  }
  // A ray parallel to an axis plane through voxel centers: snap the rounding
  // noise so that trace() sees the exact zero weight.
  for (int a = 0; a < 3; ++a)
    if (r.delta[a] == 0.0 && std::abs(r.start[a] - std::round(r.start[a])) < 1e-9) r.start[a] = std::round(r.start[a]);
  return r;
}

namespace {

// floor() for the clipped sample range (c >= -2), without a libm call.
inline long floor_index(double c) noexcept {
  long t = static_cast<long>(c + 2.0) - 2;
  if (static_cast<double>(t) > c) --t;
  return t;
}

} // namespace

// Calls visit(linear_index, weight) for every (sample, corner) pair with
// nonzero trilinear weight; weights exclude the path-length factor.
template <class Visit>
void ForwardModel::trace(const Ray& r, Visit&& visit) const {
  const auto& d = grid_.dims;
  const double n[3] = {static_cast<double>(d.nx), static_cast<double>(d.ny), static_cast<double>(d.nz)};
  double klo = -1e300, khi = 1e300;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(r.delta[a]) < 1e-14) {
      if (r.start[a] <= -1.0 || r.start[a] >= n[a]) return;
      continue;
    }
    double t0 = (-1.0 - r.start[a]) / r.delta[a];
    double t1 = (n[a] - r.start[a]) / r.delta[a];
    if (t0 > t1) std::swap(t0, t1);
    klo = std::max(klo, t0);
    khi = std::min(khi, t1);
  }
  if (klo > khi) return;
  const auto k0 = static_cast<long>(std::ceil(klo));
  const auto k1 = static_cast<long>(std::floor(khi));
  const long nx = static_cast<long>(d.nx), ny = static_cast<long>(d.ny), nz = static_cast<long>(d.nz);
  const long sy = nx, sz = nx * ny;
  for (long k = k0; k <= k1; ++k) {
    const double kd = static_cast<double>(k);
    const double cx = r.start[0] + kd * r.delta[0];
    const double cy = r.start[1] + kd * r.delta[1];
    const double cz = r.start[2] + kd * r.delta[2];
    const long ix = floor_index(cx), iy = floor_index(cy), iz = floor_index(cz);
    const double fx = static_cast<double>(ix), fy = static_cast<double>(iy), fz = static_cast<double>(iz);
    const double wx1 = cx - fx, wy1 = cy - fy, wz1 = cz - fz;
    if (ix >= 0 && iy >= 0 && iz >= 0 && ix + 1 < nx && iy + 1 < ny && iz + 1 < nz) {
      const std::size_t i0 = static_cast<std::size_t>(ix + sy * iy + sz * iz);
      const double wx0 = 1.0 - wx1, wy0 = 1.0 - wy1, wz0 = 1.0 - wz1;
      const auto ssy = static_cast<std::size_t>(sy), ssz = static_cast<std::size_t>(sz);
      if (wy1 == 0.0) {
        visit(i0, wz0 * wx0);
        visit(i0 + 1, wz0 * wx1);
        visit(i0 + ssz, wz1 * wx0);
        visit(i0 + ssz + 1, wz1 * wx1);
        continue;
      }
      if (wx1 == 0.0) {
        visit(i0, wz0 * wy0);
        visit(i0 + ssy, wz0 * wy1);
        visit(i0 + ssz, wz1 * wy0);
        visit(i0 + ssz + ssy, wz1 * wy1);
        continue;
      }
      visit(i0, wz0 * wy0 * wx0);
      visit(i0 + 1, wz0 * wy0 * wx1);
      visit(i0 + ssy, wz0 * wy1 * wx0);
      visit(i0 + ssy + 1, wz0 * wy1 * wx1);
      visit(i0 + ssz, wz1 * wy0 * wx0);
      visit(i0 + ssz + 1, wz1 * wy0 * wx1);
      visit(i0 + ssz + ssy, wz1 * wy1 * wx0);
      visit(i0 + ssz + ssy + 1, wz1 * wy1 * wx1);
      continue;
    }
    const double wx[2] = {1.0 - wx1, wx1};
    const double wy[2] = {1.0 - wy1, wy1};
    const double wz[2] = {1.0 - wz1, wz1};
    for (int c = 0; c < 2; ++c) {
      const long z = iz + c;
      if (z < 0 || z >= nz || wz[c] == 0.0) continue;
      for (int b = 0; b < 2; ++b) {
        const long y = iy + b;
        if (y < 0 || y >= ny || wy[b] == 0.0) continue;
        const double wzy = wz[c] * wy[b];
        for (int a = 0; a < 2; ++a) {
          const long x = ix + a;
          if (x < 0 || x >= nx || wx[a] == 0.0) continue;
          visit(static_cast<std::size_t>(x + sy * y + sz * z), wzy * wx[a]);
        }
      }
    }
  }
}

void ForwardModel::project_image(const Volume& f, std::size_t j, std::span<double> out) const {
  const double length = step_ * grid_.voxel_size;
  const auto values = f.data();
  for (std::size_t iv = 0; iv < geometry_.nv; ++iv)
    for (std::size_t iu = 0; iu < geometry_.nu; ++iu) {
      double acc = 0.0;
      trace(ray(j, iu, iv), [&](std::size_t idx, double w) { acc += w * values[idx]; });
      out[iu + geometry_.nu * iv] = acc * length;
    }
  blur(out);
}

void ForwardModel::backproject_image(std::span<const double> image, std::size_t j, Volume& out) const {
  const double length = step_ * grid_.voxel_size;
  std::vector<double> blurred(image.begin(), image.end());
  blur(blurred);
  auto values = out.data();
  for (std::size_t iv = 0; iv < geometry_.nv; ++iv)
    for (std::size_t iu = 0; iu < geometry_.nu; ++iu) {
      const double g = blurred[iu + geometry_.nu * iv] * length;
      if (g == 0.0) continue;
      trace(ray(j, iu, iv), [&](std::size_t idx, double w) { values[idx] += w * g; });
    }
}

void ForwardModel::blur(std::span<double> image) const {
  if (kernel_.empty()) return;
  const auto nu = static_cast<long>(geometry_.nu);
  const auto nv = static_cast<long>(geometry_.nv);
  const auto radius = static_cast<long>(kernel_.size()) - 1;
  std::vector<double> tmp(image.size(), 0.0);
  // along u
  for (long v = 0; v < nv; ++v)
    for (long u = 0; u < nu; ++u) {
      double acc = 0.0;
      for (long t = -radius; t <= radius; ++t) {
        const long uu = u + t;
        if (uu < 0 || uu >= nu) continue;
        acc += kernel_[static_cast<std::size_t>(std::abs(t))] * image[static_cast<std::size_t>(uu + nu * v)];
      }
      tmp[static_cast<std::size_t>(u + nu * v)] = acc;
    }
  // along v
  for (long v = 0; v < nv; ++v)
    for (long u = 0; u < nu; ++u) {
      double acc = 0.0;
      for (long t = -radius; t <= radius; ++t) {
        const long vv = v + t;
        if (vv < 0 || vv >= nv) continue;
        acc += kernel_[static_cast<std::size_t>(std::abs(t))] * tmp[static_cast<std::size_t>(u + nu * vv)];
      }
      image[static_cast<std::size_t>(u + nu * v)] = acc;
    }
}

ProjectionStack ForwardModel::apply(const Volume& f) const {
  check_volume(f);
  ProjectionStack out(geometry_);
  for (std::size_t j = 0; j < num_images(); ++j) project_image(f, j, out.image(j));
  return out;
}

std::vector<double> ForwardModel::apply_single(const Volume& f, std::size_t j) const {
  check_volume(f);
  if (j >= num_images()) throw OutOfBoundsError("image index " + std::to_string(j) + " out of range");
  std::vector<double> out(geometry_.pixels_per_image(), 0.0);
  project_image(f, j, out);
  return out;
}

Volume ForwardModel::adjoint(const ProjectionStack& g) const {
  check_stack(g);
  Volume out(grid_);
  // Images are accumulated in index order, so the result does not depend on
  // any scheduling.
  for (std::size_t j = 0; j < num_images(); ++j) backproject_image(g.image(j), j, out);
  return out;
}

Volume ForwardModel::adjoint_single(std::span<const double> image, std::size_t j) const {
  if (j >= num_images()) throw OutOfBoundsError("image index " + std::to_string(j) + " out of range");
  if (image.size() != geometry_.pixels_per_image()) throw ShapeError("image size does not match the detector");
  Volume out(grid_);
  backproject_image(image, j, out);
  return out;
}

double ForwardModel::inner(const Volume& f, const ProjectionStack& g) const {
  check_stack(g);
  return stack_inner(apply(f), g);
}

double ForwardModel::inner_single(const Volume& f, const ProjectionStack& g, std::size_t j) const {
  check_stack(g);
  const auto tf = apply_single(f, j);
  const auto gj = g.image(j);
  double s = 0.0;
  for (std::size_t n = 0; n < tf.size(); ++n) s += tf[n] * gj[n];
  return pixel_area() * s;
}

double ForwardModel::stack_inner(const ProjectionStack& a, const ProjectionStack& b) const {
  check_stack(a);
  check_stack(b);
  return pixel_area() * dot(a, b);
}

} // namespace tvp
