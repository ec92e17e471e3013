#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ilab/graph.hpp"

namespace ilab {

using Treatment = std::vector<std::uint8_t>;

enum class ExposureKind { binary_any, symmetric_count, general_pattern };

// Which level counts as "exposed" in estimands such as TTE.
// full_neighborhood: every neighbor treated (level d_i for counts, the all-ones
// pattern for general). single_treated: exactly one treated neighbor (level 1).
// Binary exposure always uses level 1.
enum class ExposedLevel { full_neighborhood, single_treated };

struct ExposureModel {
  ExposureKind kind = ExposureKind::binary_any;
  ExposedLevel exposed = ExposedLevel::full_neighborhood;
};

inline constexpr int kMaxPatternDegree = 20;

// Treatment/exposure pair of one unit.
struct Cell {
  int z = 0;
  int e = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Index of a cell within a unit's 2*K row: z*K + e.
inline int cell_index(Cell c, int levels) { return c.z * levels + c.e; }

using ExposureAssignment = std::vector<Cell>;

ExposureKind parse_exposure_kind(std::string_view s);
std::string to_string(ExposureKind k);
ExposedLevel parse_exposed_level(std::string_view s);
std::string to_string(ExposedLevel k);

ExposureAssignment expose(const ExposureModel& model, const InterferenceGraph& g, const Treatment& z);

// Exposure level of unit i only.
int unit_exposure(const ExposureModel& model, const InterferenceGraph& g, const Treatment& z, int i);

// K_i. Throws std::domain_error for general_pattern with d_i > 20.
int level_count(const ExposureModel& model, const InterferenceGraph& g, int i);
std::vector<int> level_counts(const ExposureModel& model, const InterferenceGraph& g);

// Number of treated neighbors encoded by a level (the level itself for
// counts and binary, the popcount of the pattern for general).
double exposure_magnitude(ExposureKind kind, int level);

// The model's exposed level for unit i, or -1 when the unit has none
// (single_treated convention on an isolated unit under count/pattern models).
int exposed_level(const ExposureModel& model, const InterferenceGraph& g, int i);

// Whether some treatment vector realizes `c` for unit i.
bool cell_reachable(const ExposureModel& model, const InterferenceGraph& g, int i, Cell c);

// Cell with a symbolic exposure level: e >= 0 is literal, kExposed resolves
// per unit to exposed_level().
inline constexpr int kExposed = -1;
struct CellSpec {
  int z = 0;
  int e = 0;
  friend bool operator==(const CellSpec&, const CellSpec&) = default;
};

// Contrast between cells tau1 and tau0 (theta = mean_i Y_i(tau1) - Y_i(tau0)).
struct Contrast {
  CellSpec tau1;
  CellSpec tau0;
};

enum class Estimand { DTE, TTE, gamma1, gamma2 };
Estimand parse_estimand(std::string_view s);
std::string to_string(Estimand e);
Contrast contrast_for(Estimand e);

// Contrast cells resolved per unit.
struct UnitContrast {
  std::vector<Cell> tau1;
  std::vector<Cell> tau0;
  int size() const { return static_cast<int>(tau1.size()); }
  UnitContrast subset(const std::vector<int>& units) const;
};

// Resolves a spec for unit i; throws std::domain_error if the level does not
// exist for that unit.
Cell resolve_cell(const ExposureModel& model, const InterferenceGraph& g, int i, CellSpec spec);
UnitContrast resolve(const Contrast& c, const ExposureModel& model, const InterferenceGraph& g);

// Units for which both contrast cells exist and are reachable by some treatment vector.
std::vector<int> contrast_population(const Contrast& c, const ExposureModel& model,
                                     const InterferenceGraph& g);

}  // namespace ilab
