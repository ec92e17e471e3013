#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ilab/design.hpp"
#include "ilab/exposure.hpp"
#include "ilab/graph.hpp"

namespace ilab {

// One row of 2*K_i values per unit, indexed by cell_index(c, K_i).
class CellTable {
 public:
  CellTable() = default;
  explicit CellTable(std::vector<int> levels, double fill = 0.0);

  int units() const { return static_cast<int>(levels_.size()); }
  int levels(int i) const { return levels_[i]; }
  const std::vector<int>& level_counts() const { return levels_; }
  double operator()(int i, Cell c) const { return values_[offset_[i] + cell_index(c, levels_[i])]; }
  double& at(int i, Cell c) { return values_[offset_[i] + cell_index(c, levels_[i])]; }
  std::span<const double> row(int i) const {
    return {values_.data() + offset_[i], static_cast<std::size_t>(2 * levels_[i])};
  }
  std::span<double> row(int i) {
    return {values_.data() + offset_[i], static_cast<std::size_t>(2 * levels_[i])};
  }
  CellTable subset(const std::vector<int>& units) const;

 private:
  std::vector<int> levels_;
  std::vector<std::size_t> offset_;
  std::vector<double> values_;
};

enum class Provenance { analytic, enumerated, monte_carlo };

struct ZeroCell {
  int unit;
  Cell cell;
};

class PropensityTable : public CellTable {
 public:
  PropensityTable() = default;
  PropensityTable(std::vector<int> levels, Provenance prov, long samples = 0)
      : CellTable(std::move(levels)), provenance(prov), samples(samples) {}

  Provenance provenance = Provenance::analytic;
  long samples = 0;
  // Monte Carlo standard errors (empty for exact tables).
  CellTable se;
  // Reachable cells never observed in Monte Carlo.
  std::vector<ZeroCell> zero_cells;
  std::vector<std::string> warnings;

  double standard_error(int i, Cell c) const { return se.units() ? se(i, c) : 0.0; }
  std::string provenance_text() const;
  PropensityTable subset(const std::vector<int>& units) const;
};

// pi_ij((z,e),(z',e')) for i != j, stored densely.
class JointPropensityTable {
 public:
  JointPropensityTable() = default;
  explicit JointPropensityTable(std::vector<int> levels);

  int units() const { return static_cast<int>(levels_.size()); }
  bool empty() const { return values_.empty(); }
  // Throws std::invalid_argument when i == j.
  double operator()(int i, Cell a, int j, Cell b) const;
  void add(int i, int ci, int j, int cj, double p) {
    values_[pair_offset_[static_cast<std::size_t>(i) * levels_.size() + j] +
            static_cast<std::size_t>(ci) * (2 * levels_[j]) + cj] += p;
  }
  JointPropensityTable subset(const std::vector<int>& units) const;

 private:
  std::vector<int> levels_;
  std::vector<std::size_t> pair_offset_;
  std::vector<double> values_;
};

class NoAnalyticFormula : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// {CRD, Bernoulli} x {binary, symmetric} and cluster x binary.
bool has_analytic_propensity(const Design& d, const ExposureModel& model);

PropensityTable analytic_propensity(const Design& d, const InterferenceGraph& g,
                                    const ExposureModel& model);

struct EnumeratedPropensity {
  PropensityTable marginal;
  JointPropensityTable joint;
};

// Exact marginals (and joints when requested) by summing over the support.
EnumeratedPropensity enumerated_propensity(const Design& d, const InterferenceGraph& g,
                                           const ExposureModel& model, bool with_joint = true,
                                           double cap = kDefaultSupportCap);

PropensityTable mc_propensity(const Design& d, const InterferenceGraph& g, const ExposureModel& model,
                              long samples, std::uint64_t seed);

// Analytic when covered, else enumerated when the support fits the cap, else
// Monte Carlo with mc_samples draws.
PropensityTable best_available_propensity(const Design& d, const InterferenceGraph& g,
                                          const ExposureModel& model, long mc_samples,
                                          std::uint64_t seed, double cap = kDefaultSupportCap);

// Monte Carlo joint propensities (for variance formulas at larger n).
JointPropensityTable mc_joint_propensity(const Design& d, const InterferenceGraph& g,
                                         const ExposureModel& model, long samples, std::uint64_t seed);

enum class WeightDenominator { by_treatment, by_cell };

// by_treatment: alpha_i(z,e) = E[ I(Z_i=z,E_i=e) / sum_j I(Z_j=z) ].
// by_cell:      beta_i(z,e)  = E[ I(Z_i=z,E_i=e) / sum_j I(Z_j=z,E_j=e) ].
// Terms with a zero numerator contribute zero. Closed forms are used for
// by_treatment under CRD and (restricted) Bernoulli with binary or symmetric
// exposure; every other case is enumerated.
CellTable weighted_exposure_probs(const Design& d, const InterferenceGraph& g,
                                  const ExposureModel& model, WeightDenominator kind,
                                  double cap = kDefaultSupportCap);
bool has_closed_form_weights(const Design& d, const ExposureModel& model, WeightDenominator kind);

// CSV columns: unit,z,e,pi,provenance,se
void write_propensity_csv(const PropensityTable& pi, std::ostream& out);

}  // namespace ilab
