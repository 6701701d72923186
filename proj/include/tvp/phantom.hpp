#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tvp/projector.hpp"
#include "tvp/volume.hpp"

namespace tvp {

enum class PhantomKind { balls, y_shapes };

// One ground-truth object. For balls `tips` is empty and `radius` is the ball
// radius; for Y shapes the object is the union of the capsules
// [center, tips[k]] with radius `radius`.
struct PhantomObject {
  int id = 0;
  double contrast = 1.0;
  Vec3 center{};
  double radius = 0.0;
  std::vector<Vec3> tips;
  std::vector<std::size_t> voxels;  // sorted linear indices
};

struct Phantom {
  Volume volume;
  std::vector<PhantomObject> objects;
};

struct PhantomSpec {
  PhantomKind kind = PhantomKind::balls;
  std::size_t count = 30;
  // Ball diameter, or Y arm length (center to tip), in physical units.
  std::array<double, 2> size_range{4.0, 8.0};
  std::array<double, 2> contrast_range{1.0, 2.0};
  // Capsule radius of a Y shape as a fraction of its arm length.
  double y_radius_fraction = 0.25;
  std::uint64_t seed = 0;
  std::size_t max_attempts = 10000;
};

// Places `count` non-touching objects by rejection sampling. Deterministic for
// a fixed seed.
[[nodiscard]] Phantom make_phantom(const PhantomSpec& spec, const Grid& grid);

[[nodiscard]] bool capsule_contains(const Vec3& a, const Vec3& b, double radius, const Vec3& p) noexcept;

// Writes `<base>.raw/.json` for the volume and `<base>_objects.json` holding
// the object list with run-length encoded masks ([start, length] runs of
// linear voxel indices).
void write_phantom(const Phantom& phantom, const std::filesystem::path& base);
[[nodiscard]] Phantom read_phantom(const std::filesystem::path& base);

struct NoiseModel {
  double dose_per_pixel = 15.7;
  std::uint64_t seed = 0;
};

// Beer-Lambert detection: pixel counts N ~ Poisson(n0 exp(-p)) with p the
// clean projection and n0 chosen so the stack mean count equals the dose;
// returns -ln((N + 1/2) / n0), whose mean matches p to O(1/n0^2).
[[nodiscard]] ProjectionStack simulate_detection(const ProjectionStack& clean, const NoiseModel& noise);
[[nodiscard]] ProjectionStack simulate_data(const Volume& truth, const ForwardModel& model, const NoiseModel& noise);
[[nodiscard]] ProjectionStack simulate_data(const Phantom& phantom, const ForwardModel& model,
                                            const NoiseModel& noise);

// Independent noise realizations g_data - T f_true, draw d keyed by (seed, d).
[[nodiscard]] std::vector<ProjectionStack> simulate_noise_only(const Phantom& phantom, const ForwardModel& model,
                                                               const NoiseModel& noise, std::size_t draws);

// Expected mean detector count of a simulated stack.
[[nodiscard]] double incident_counts(const ProjectionStack& clean, double dose_per_pixel);

} // namespace tvp
