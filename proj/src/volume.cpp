#include "tvp/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tvp/error.hpp"

namespace tvp {

Grid Grid::centered(Dims dims, double voxel_size) {
  Grid g;
  g.dims = dims;
  g.voxel_size = voxel_size;
  for (int a = 0; a < 3; ++a)
    g.origin[a] = -0.5 * voxel_size * static_cast<double>(dims[a] - 1);
  return g;
}

Vec3 Grid::voxel_center(std::size_t i, std::size_t j, std::size_t k) const noexcept {
  return {origin[0] + voxel_size * static_cast<double>(i), origin[1] + voxel_size * static_cast<double>(j),
          origin[2] + voxel_size * static_cast<double>(k)};
}

void Grid::validate() const {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
    throw FormatError("dims: every voxel count must be positive, got (" + std::to_string(dims.nx) + "," +
                      std::to_string(dims.ny) + "," + std::to_string(dims.nz) + ")");
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size))
    throw FormatError("voxel_size: must be positive and finite");
  for (double o : origin)
    if (!std::isfinite(o)) throw FormatError("origin: must be finite");
}

Volume::Volume(Grid grid) : grid_(grid) {
  grid_.validate();
  data_.assign(grid_.dims.size(), 0.0);
}

Volume::Volume(Grid grid, std::vector<double> data) : grid_(grid), data_(std::move(data)) {
  grid_.validate();
  if (data_.size() != grid_.dims.size())
    throw ShapeError("volume data length " + std::to_string(data_.size()) + " does not match dims product " +
                     std::to_string(grid_.dims.size()));
  require_finite("volume data");
}

bool Volume::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Volume::require_finite(const char* what) const {
  if (!all_finite()) throw NumericalError(std::string(what) + ": non-finite value");
}

std::optional<Box> support_box(const Volume& vol) {
  const auto& d = vol.dims();
  Box box{{static_cast<std::ptrdiff_t>(d.nx), static_cast<std::ptrdiff_t>(d.ny), static_cast<std::ptrdiff_t>(d.nz)},
          {-1, -1, -1}};
  bool any = false;
  for (std::size_t k = 0; k < d.nz; ++k)
    for (std::size_t j = 0; j < d.ny; ++j)
      for (std::size_t i = 0; i < d.nx; ++i) {
        if (vol(i, j, k) == 0.0) continue;
        any = true;
        const Offset3 p{static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(j),
                        static_cast<std::ptrdiff_t>(k)};
        for (int a = 0; a < 3; ++a) {
          box.lo[a] = std::min(box.lo[a], p[a]);
          box.hi[a] = std::max(box.hi[a], p[a]);
        }
      }
  if (!any) return std::nullopt;
  return box;
}

double linf_norm(const Volume& vol) noexcept {
  double m = 0.0;
  for (double v : vol.data()) m = std::max(m, std::abs(v));
  return m;
}

double sum(const Volume& vol) noexcept {
  double s = 0.0;
  for (double v : vol.data()) s += v;
  return s;
}

double dot(const Volume& a, const Volume& b) {
  if (a.dims() != b.dims()) throw ShapeError("dot: volume dims differ");
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s;
}

Volume scaled(const Volume& vol, double factor) {
  Volume out(vol.grid());
  for (std::size_t n = 0; n < vol.size(); ++n) out[n] = factor * vol[n];
  return out;
}

Volume axpy(const Volume& a, double factor, const Volume& b) {
  if (a.dims() != b.dims()) throw ShapeError("axpy: volume dims differ");
  Volume out(a.grid());
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = a[n] + factor * b[n];
  return out;
}

TiltGeometry TiltGeometry::uniform(std::size_t count, double first_deg, double last_deg, const Grid& grid,
                                   TiltAxis axis) {
  TiltGeometry g;
  g.axis = axis;
  g.angles_deg.resize(count);
  for (std::size_t j = 0; j < count; ++j)
    g.angles_deg[j] = count == 1 ? first_deg
                                 : first_deg + (last_deg - first_deg) * static_cast<double>(j) /
                                                   static_cast<double>(count - 1);
  g.nu = axis == TiltAxis::y ? grid.dims.nx : grid.dims.ny;
  g.nv = axis == TiltAxis::y ? grid.dims.ny : grid.dims.nx;
  g.pixel_size = grid.voxel_size;
  g.validate();
  return g;
}

void TiltGeometry::validate() const {
  if (angles_deg.empty()) throw FormatError("angles_deg: at least one tilt angle is required");
  for (std::size_t j = 0; j < angles_deg.size(); ++j) {
    const double a = angles_deg[j];
    if (!std::isfinite(a) || a <= -90.0 || a >= 90.0)
      throw FormatError("angles_deg[" + std::to_string(j) + "]: must lie in (-90, 90)");
    if (j > 0 && !(a > angles_deg[j - 1]))
      throw FormatError("angles_deg[" + std::to_string(j) + "]: angles must be strictly increasing");
  }
  if (nu == 0 || nv == 0) throw FormatError("detector_dims: must be positive");
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size))
    throw FormatError("detector_pixel_size: must be positive and finite");
}

ProjectionStack::ProjectionStack(TiltGeometry geometry) : geometry_(std::move(geometry)) {
  geometry_.validate();
  data_.assign(geometry_.num_images() * geometry_.pixels_per_image(), 0.0);
}

ProjectionStack::ProjectionStack(TiltGeometry geometry, std::vector<double> data)
    : geometry_(std::move(geometry)), data_(std::move(data)) {
  geometry_.validate();
  if (data_.size() != geometry_.num_images() * geometry_.pixels_per_image())
    throw ShapeError("stack data length " + std::to_string(data_.size()) + " does not match m*nu*nv");
  if (!all_finite()) throw NumericalError("stack data: non-finite value");
}

std::span<const double> ProjectionStack::image(std::size_t j) const {
  if (j >= num_images()) throw OutOfBoundsError("image index " + std::to_string(j) + " out of range");
  const auto n = geometry_.pixels_per_image();
  return std::span<const double>(data_).subspan(j * n, n);
}

std::span<double> ProjectionStack::image(std::size_t j) {
  if (j >= num_images()) throw OutOfBoundsError("image index " + std::to_string(j) + " out of range");
  const auto n = geometry_.pixels_per_image();
  return std::span<double>(data_).subspan(j * n, n);
}

bool ProjectionStack::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(const ProjectionStack& a, const ProjectionStack& b) {
  if (a.size() != b.size()) throw ShapeError("dot: stack sizes differ");
  double s = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t n = 0; n < da.size(); ++n) s += da[n] * db[n];
  return s;
}

Volume rasterize_ball(const BallSpec& spec, const Grid& grid) {
  grid.validate();
  if (!(spec.diameter > 0.0) || !std::isfinite(spec.diameter))
    throw DomainError("ball diameter must be positive and finite");
  const double r = 0.5 * spec.diameter;
  const double h = 0.5 * grid.voxel_size;
  for (int a = 0; a < 3; ++a) {
    const double lo = grid.origin[a] - h;
    const double hi = grid.origin[a] + grid.voxel_size * static_cast<double>(grid.dims[a] - 1) + h;
    if (spec.center[a] - r < lo - 1e-12 || spec.center[a] + r > hi + 1e-12)
      throw OutOfBoundsError("ball of diameter " + std::to_string(spec.diameter) + " does not fit inside the grid");
  }

  Volume out(grid);
  // Measured in voxel units; centers exactly on the sphere count as inside
  // even when rounding puts them a few ulps outside.
  const double rv = r / grid.voxel_size;
  const double r2 = rv * rv + 1e-9;
  // Only scan the bounding box of the ball.
  std::array<std::size_t, 3> lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    const double fl = std::floor((spec.center[a] - r - grid.origin[a]) / grid.voxel_size);
    const double ce = std::ceil((spec.center[a] + r - grid.origin[a]) / grid.voxel_size);
    lo[a] = static_cast<std::size_t>(std::max(0.0, fl));
    hi[a] = static_cast<std::size_t>(std::min(static_cast<double>(grid.dims[a] - 1), std::max(0.0, ce)));
  }
  for (std::size_t k = lo[2]; k <= hi[2]; ++k)
    for (std::size_t j = lo[1]; j <= hi[1]; ++j)
      for (std::size_t i = lo[0]; i <= hi[0]; ++i) {
        const Vec3 c = grid.voxel_center(i, j, k);
        const double dx = (c[0] - spec.center[0]) / grid.voxel_size;
        const double dy = (c[1] - spec.center[1]) / grid.voxel_size;
        const double dz = (c[2] - spec.center[2]) / grid.voxel_size;
        if (dx * dx + dy * dy + dz * dz <= r2) out(i, j, k) = spec.value;
      }
  return out;
}

Volume translate(const Volume& vol, const Offset3& offset) {
  const auto& d = vol.dims();
  Volume out(vol.grid());
  const auto box = support_box(vol);
  if (!box) return out;
  for (int a = 0; a < 3; ++a) {
    const auto n = static_cast<std::ptrdiff_t>(d[a]);
    if (box->lo[a] + offset[a] < 0 || box->hi[a] + offset[a] >= n)
      throw OutOfBoundsError("translate: support would leave the grid along axis " + std::to_string(a));
  }
  for (std::ptrdiff_t k = box->lo[2]; k <= box->hi[2]; ++k)
    for (std::ptrdiff_t j = box->lo[1]; j <= box->hi[1]; ++j)
      for (std::ptrdiff_t i = box->lo[0]; i <= box->hi[0]; ++i)
        out(static_cast<std::size_t>(i + offset[0]), static_cast<std::size_t>(j + offset[1]),
            static_cast<std::size_t>(k + offset[2])) =
            vol(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k));
  return out;
}

} // namespace tvp
