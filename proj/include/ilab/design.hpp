#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ilab/exposure.hpp"
#include "ilab/graph.hpp"
#include "ilab/rng.hpp"

namespace ilab {

struct SupportPoint {
  Treatment z;
  double probability = 0.0;
};

// Minimum number of units that must land in a cell for a re-randomized draw
// to be accepted.
struct CellQuota {
  CellSpec cell;
  int min_count = 1;
};

inline constexpr double kDefaultSupportCap = 1048576.0;  // 2^20
inline constexpr long kDefaultMaxTries = 100000;

class SupportTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

class RerandomizationFailure : public std::runtime_error {
 public:
  RerandomizationFailure(const std::string& msg, long tries) : std::runtime_error(msg), tries(tries) {}
  long tries;
};

// Distribution over treatment vectors. Immutable; copies share nested state.
class Design {
 public:
  enum class Kind { crd, bernoulli, restricted_bernoulli, cluster, independent_set, rerandomized, discrete };

  static Design crd(int n, int n_treated);
  static Design bernoulli(int n, double p);
  static Design restricted_bernoulli(int n, double p);
  // cluster_of[i] in [0, K); K is the number of distinct labels.
  static Design cluster(std::vector<int> cluster_of, int clusters_treated);
  static Design independent_set(std::shared_ptr<const InterferenceGraph> g, int egos_treated,
                                double mix_p = 1.0);
  static Design rerandomized(const Design& base, std::shared_ptr<const InterferenceGraph> g,
                             ExposureModel model, std::vector<CellQuota> quotas,
                             long max_tries = kDefaultMaxTries);
  // Explicit finite distribution (policies, degenerate designs).
  static Design discrete(int n, std::vector<SupportPoint> support);
  static Design point_mass(Treatment z);

  Kind kind() const { return kind_; }
  int units() const { return n_; }
  int n_treated() const { return n_treated_; }
  int n_control() const { return n_ - n_treated_; }
  double p() const { return p_; }
  const std::vector<int>& cluster_of() const { return cluster_of_; }
  int clusters() const { return clusters_; }
  int clusters_treated() const { return clusters_treated_; }
  int egos_treated() const { return egos_treated_; }
  double mix_p() const { return mix_p_; }
  const Design& base() const { return *base_; }
  const std::vector<CellQuota>& quotas() const { return quotas_; }
  long max_tries() const { return max_tries_; }
  const ExposureModel& quota_model() const { return model_; }
  const InterferenceGraph& graph() const { return *graph_; }
  const std::vector<SupportPoint>& explicit_support() const { return support_; }

  std::string describe() const;

 private:
  Kind kind_ = Kind::crd;
  int n_ = 0;
  int n_treated_ = 0;
  double p_ = 0.0;
  std::vector<int> cluster_of_;
  int clusters_ = 0;
  int clusters_treated_ = 0;
  int egos_treated_ = 0;
  double mix_p_ = 1.0;
  std::shared_ptr<const Design> base_;
  std::shared_ptr<const InterferenceGraph> graph_;
  ExposureModel model_;
  std::vector<CellQuota> quotas_;
  long max_tries_ = kDefaultMaxTries;
  std::vector<SupportPoint> support_;
};

Treatment sample(const Design& d, Engine& eng);

// Upper bound on the number of support points (before merging duplicates).
double support_size_bound(const Design& d);

// Exact support with positive probabilities summing to 1; duplicates merged,
// sorted lexicographically. Throws SupportTooLarge above `cap`.
std::vector<SupportPoint> enumerate_support(const Design& d, double cap = kDefaultSupportCap);

struct EgoSplit {
  std::vector<int> egos;
  std::vector<int> alters;
};

// Greedy maximal independent set: each step picks a uniformly random remaining
// unit with probability mix_p, otherwise a remaining unit of smallest degree
// in the remaining graph (ties uniform); the pick and its neighbors are removed.
EgoSplit greedy_independent_set(const InterferenceGraph& g, Engine& eng, double mix_p);
EgoSplit greedy_independent_set(const InterferenceGraph& g, std::uint64_t seed, double mix_p);

struct EgoSetProbability {
  std::vector<int> egos;
  double probability;
};
// Exact distribution of the greedy ego set (small graphs only).
std::vector<EgoSetProbability> ego_set_distribution(const InterferenceGraph& g, double mix_p);

// Balanced BFS-grown partition into K clusters; sizes differ by at most one.
std::vector<int> greedy_partition(const InterferenceGraph& g, int K, std::uint64_t seed);

// Partition text: one "unit cluster" pair per line.
std::vector<int> read_partition(std::istream& in, int n);
std::vector<int> read_partition_file(const std::string& path, int n);
void write_partition(const std::vector<int>& cluster_of, std::ostream& out);

// Independent-set draw together with the realized ego set.
struct EgoDraw {
  Treatment z;
  std::vector<std::uint8_t> ego;
};
struct EgoSupportPoint {
  EgoDraw draw;
  double probability = 0.0;
};

// Same stream consumption as sample() for an independent-set design.
EgoDraw sample_with_egos(const Design& d, Engine& eng);
// Exact (ego set, treatment) distribution; small graphs only.
std::vector<EgoSupportPoint> enumerate_ego_support(const Design& d, double cap = kDefaultSupportCap);

// P(i is an ego and Z_i = 1) and P(i is an ego and Z_i = 0).
struct EgoPropensity {
  std::vector<double> treated;
  std::vector<double> control;
  bool exact = true;
  long samples = 0;
};
// Exact for n <= kMaxExactEgoUnits, otherwise averaged over `samples` greedy
// ego sets (conditional treatment probabilities are used in closed form).
inline constexpr int kMaxExactEgoUnits = 20;
EgoPropensity ego_propensity(const Design& d, long samples, std::uint64_t seed);

struct PositivityEntry {
  int unit;
  CellSpec required;
  double pi;  // NaN when the cell does not exist for the unit
  bool ok;
};
struct PositivityReport {
  bool all_ok = true;
  std::vector<PositivityEntry> entries;
  std::vector<int> failing_units() const;
};

class PropensityTable;

PositivityReport positivity_check(const PropensityTable& pi, const InterferenceGraph& g,
                                  const ExposureModel& model, const std::vector<CellSpec>& required,
                                  const std::vector<int>& units = {});

// Computes propensities (analytic, else enumerated, else Monte Carlo with
// `mc_samples` draws) and checks them.
PositivityReport positivity_check(const Design& d, const InterferenceGraph& g,
                                  const ExposureModel& model, const std::vector<CellSpec>& required,
                                  long mc_samples = 100000, std::uint64_t seed = 1);

}  // namespace ilab
