#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace tvp {

using Vec3 = std::array<double, 3>;
using Offset3 = std::array<std::ptrdiff_t, 3>;

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  [[nodiscard]] std::size_t size() const noexcept { return nx * ny * nz; }
  [[nodiscard]] std::size_t operator[](int axis) const noexcept {
    return axis == 0 ? nx : (axis == 1 ? ny : nz);
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Sampling lattice of a volume. Voxel (i,j,k) has its center at
// origin + voxel_size * (i,j,k).
struct Grid {
  Dims dims;
  double voxel_size = 1.0;
  Vec3 origin{0.0, 0.0, 0.0};

  // Grid whose center sits at the physical origin, which is also the tilt
  // center used by the forward model.
  static Grid centered(Dims dims, double voxel_size = 1.0);

  [[nodiscard]] Vec3 voxel_center(std::size_t i, std::size_t j, std::size_t k) const noexcept;
  // |Omega| measured in voxels.
  [[nodiscard]] double omega_voxels() const noexcept { return static_cast<double>(dims.size()); }

  void validate() const;
  friend bool operator==(const Grid&, const Grid&) = default;
};

// Dense scalar field on a Grid, x-fastest layout. Values outside the grid are
// taken to be zero by every operator in the library.
class Volume {
public:
  Volume() = default;
  explicit Volume(Grid grid);
  Volume(Grid grid, std::vector<double> data);

  [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
  [[nodiscard]] const Dims& dims() const noexcept { return grid_.dims; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + grid_.dims.nx * (j + grid_.dims.ny * k);
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept { return data_[index(i, j, k)]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[index(i, j, k)];
  }
  double& operator[](std::size_t n) noexcept { return data_[n]; }
  double operator[](std::size_t n) const noexcept { return data_[n]; }

  [[nodiscard]] bool all_finite() const noexcept;
  // Throws NumericalError naming `what` if any value is NaN/Inf.
  void require_finite(const char* what) const;

private:
  Grid grid_;
  std::vector<double> data_;
};

// Inclusive voxel bounding box.
struct Box {
  Offset3 lo{};
  Offset3 hi{};
  [[nodiscard]] std::ptrdiff_t extent(int axis) const noexcept { return hi[axis] - lo[axis] + 1; }
};

[[nodiscard]] std::optional<Box> support_box(const Volume& vol);

[[nodiscard]] double linf_norm(const Volume& vol) noexcept;
[[nodiscard]] double sum(const Volume& vol) noexcept;
[[nodiscard]] double dot(const Volume& a, const Volume& b);
[[nodiscard]] Volume scaled(const Volume& vol, double factor);
// a + factor * b
[[nodiscard]] Volume axpy(const Volume& a, double factor, const Volume& b);

enum class TiltAxis { x, y };

// Single-axis tilt series. Detector u runs perpendicular to the tilt axis and
// v along it.
struct TiltGeometry {
  std::vector<double> angles_deg;
  TiltAxis axis = TiltAxis::y;
  std::size_t nu = 0;
  std::size_t nv = 0;
  double pixel_size = 1.0;

  [[nodiscard]] std::size_t num_images() const noexcept { return angles_deg.size(); }
  [[nodiscard]] std::size_t pixels_per_image() const noexcept { return nu * nv; }
  [[nodiscard]] double pixel_area() const noexcept { return pixel_size * pixel_size; }

  // `count` evenly spaced angles from first to last inclusive. The detector is
  // sized to match the volume footprint perpendicular to the beam at 0 deg.
  static TiltGeometry uniform(std::size_t count, double first_deg, double last_deg, const Grid& grid,
                              TiltAxis axis = TiltAxis::y);

  void validate() const;
  friend bool operator==(const TiltGeometry&, const TiltGeometry&) = default;
};

// Tilt-series images g = g_1 + ... + g_m, image j stored contiguously
// (u fastest).
class ProjectionStack {
public:
  ProjectionStack() = default;
  explicit ProjectionStack(TiltGeometry geometry);
  ProjectionStack(TiltGeometry geometry, std::vector<double> data);

  [[nodiscard]] const TiltGeometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] std::size_t num_images() const noexcept { return geometry_.num_images(); }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> image(std::size_t j) const;
  [[nodiscard]] std::span<double> image(std::size_t j);

  [[nodiscard]] bool all_finite() const noexcept;

private:
  TiltGeometry geometry_;
  std::vector<double> data_;
};

[[nodiscard]] double dot(const ProjectionStack& a, const ProjectionStack& b);

struct BallSpec {
  Vec3 center{0.0, 0.0, 0.0};
  double diameter = 1.0;
  double value = 1.0;
};

// Characteristic function (times spec.value) of a ball: every voxel whose
// center lies within diameter/2 of spec.center.
[[nodiscard]] Volume rasterize_ball(const BallSpec& spec, const Grid& grid);

// Integer shift; voxels shifted in from outside are zero. The shifted support
// must stay inside the grid.
[[nodiscard]] Volume translate(const Volume& vol, const Offset3& offset);

} // namespace tvp
