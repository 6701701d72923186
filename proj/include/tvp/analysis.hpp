#pragma once

#include <string>
#include <vector>

#include "tvp/phantom.hpp"
#include "tvp/volume.hpp"

namespace tvp {

enum class Connectivity { face6 = 6, full26 = 26 };

[[nodiscard]] Connectivity parse_connectivity(int n);

struct ComponentSet {
  double threshold = 0.0;
  Connectivity connectivity = Connectivity::face6;
  Dims dims{};
  // Each component holds sorted linear indices; components are ordered by
  // their smallest index.
  std::vector<std::vector<std::size_t>> components;
};

// Connected components of {x : f(x) > a}.
[[nodiscard]] ComponentSet connected_components(const Volume& f, double a,
                                                Connectivity connectivity = Connectivity::face6);

enum class HitKind { true_hit, false_hit };

struct HitAnalysis {
  // Objects touched by at least one component.
  std::size_t true_hits = 0;
  // Components touching no object.
  std::size_t false_hits = 0;
  std::vector<bool> object_hit;
  std::vector<HitKind> component_kind;
  // Indices into the phantom object list touched by each component.
  std::vector<std::vector<std::size_t>> component_objects;
};

[[nodiscard]] HitAnalysis classify_hits(const ComponentSet& components, const Phantom& phantom);

struct Reconstruction {
  double lambda = 0.0;
  Volume volume;
};

struct IdealPoint {
  double lambda = 0.0;
  double a_ideal = 0.0;
  // False hits at a_ideal; nonzero only when no grid value clears them.
  std::size_t false_hits = 0;
};

// Per reconstruction, the smallest grid threshold with no false hits.
[[nodiscard]] std::vector<IdealPoint> ideal_rule_sweep(const std::vector<Reconstruction>& recs,
                                                       const Phantom& phantom, const std::vector<double>& a_grid,
                                                       Connectivity connectivity = Connectivity::face6);

struct HitRow {
  double lambda = 0.0;
  std::size_t true_hits = 0;
  std::size_t false_hits = 0;
  std::size_t components = 0;
};

[[nodiscard]] std::vector<HitRow> hit_table(const std::vector<Reconstruction>& recs, const Phantom& phantom,
                                            double a, Connectivity connectivity = Connectivity::face6);

[[nodiscard]] std::string hit_table_csv(const std::vector<HitRow>& rows);
[[nodiscard]] std::string hit_table_json(const std::vector<HitRow>& rows, double a, Connectivity connectivity);
[[nodiscard]] std::string ideal_curve_csv(const std::vector<IdealPoint>& curve);
[[nodiscard]] std::string ideal_curve_json(const std::vector<IdealPoint>& curve, Connectivity connectivity);

} // namespace tvp
