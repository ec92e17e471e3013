#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ilab/design.hpp"
#include "ilab/exposure.hpp"
#include "ilab/graph.hpp"
#include "ilab/outcomes.hpp"
#include "ilab/propensity.hpp"

namespace ilab {

struct BiasReport {
  double analytic_value = 0.0;
  std::optional<double> oracle_value;
  std::vector<std::pair<std::string, double>> terms;
  std::vector<std::string> notes;

  double term(const std::string& name) const;
};

// E[naive] - DTE (or TTE) from the weighted exposure probabilities
// alpha_i(z,e) = E[I(Z_i=z,E_i=e) / #{j: Z_j=z}], split into the A, B and C
// terms. An empty arm contributes zero to both the formula and the oracle.
// The oracle (exact enumeration of E[naive]) is attached when with_oracle is
// set and the support fits the cap.
BiasReport bias_naive_general(const PotentialOutcomeTable& t, const Design& d, const InterferenceGraph& g,
                              const ExposureModel& model, Estimand target, bool with_oracle = true,
                              double cap = kDefaultSupportCap);

// -gamma * 2m / (n (n-1)).
double bias_linear(const InterferenceGraph& g, double gamma);

// Binary exposure, Y_i = alpha_i + beta_i z + gamma_i e + theta_i z e.
// CRD(n_t) and Bernoulli(p) as printed.
double bias_binary(const Design& d, const InterferenceGraph& g, const std::vector<double>& gamma,
                   const std::vector<double>& theta);

// Exact E[naive | both arms nonempty] - DTE under Bernoulli(p), computed
// from binomial sums over the arm sizes.
double bias_binary_bernoulli_exact(double p, const InterferenceGraph& g, const std::vector<double>& gamma,
                                   const std::vector<double>& theta);

struct ClusterCovariances {
  std::vector<double> c;  // Cov(Z_k, Z_k / n_t)
  std::vector<double> d;  // Cov(1 - Z_k, (1 - Z_k) / n_c)
  bool exact = true;
  long samples = 0;
};

ClusterCovariances cluster_covariances(const Design& cluster, long mc_budget, std::uint64_t seed,
                                       double cap = kDefaultSupportCap);

// Y_i = alpha_i + beta_i z_i + gamma * (treated neighbors), read from a
// symmetric linear additive table. Reports the printed cluster expression
// and the enumerated E[naive] - DTE when the cluster support is enumerable.
BiasReport bias_cluster_linear(const Design& cluster, const InterferenceGraph& g,
                               const PotentialOutcomeTable& t, long mc_budget, std::uint64_t seed = 1,
                               double cap = kDefaultSupportCap);

// Variance of the HT estimator of the contrast from marginal and joint
// propensities.
double var_ht(const PotentialOutcomeTable& t, const UnitContrast& uc, const CellTable& pi,
              const JointPropensityTable& pij);

// Pieces of the naive-estimator variance under CRD and the linear model
// Y_i = alpha + eps_i + beta z_i + gamma sum_j g_ij z_j. S2 = sum_ij g_ij z_i z_j,
// S1 = sum_i d_i z_i.
double crd_var_pair_sum(const InterferenceGraph& g, int n_t);
double crd_var_degree_sum(const InterferenceGraph& g, int n_t);
double crd_cov_pair_degree(const InterferenceGraph& g, int n_t);

struct LinearVarianceReport {
  double value = 0.0;      // sigma2 (1/n_t + 1/n_c) + gamma^2 (c1 m + c2 m^2 + c3 sum d^2 + c4 sum_{i!=j} d_i d_j)
  double assembled = 0.0;  // same total assembled from the three pieces above
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
};

// Throws std::invalid_argument for n <= 3 or n_t outside (0, n).
LinearVarianceReport var_naive_linear_crd(const InterferenceGraph& g, int n_t, double gamma, double sigma2);

enum class MomentSource { enumerate, monte_carlo };

struct BinaryVarianceReport {
  double value = 0.0;          // corrected assembly
  double printed_value = 0.0;  // the printed block expression with the same moments
  std::optional<double> oracle_value;  // enumerated Var(naive)
  bool exact_moments = true;
};

// Additive binary model (C == 0, beta_i constant) under CRD. Moments come
// from support enumeration or Monte Carlo.
BinaryVarianceReport var_naive_binary(const InterferenceGraph& g, const Design& crd, const PotentialOutcomeTable& t,
                                      MomentSource source, long mc_samples = 0, std::uint64_t seed = 1,
                                      double cap = kDefaultSupportCap);

}  // namespace ilab
