#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ilab/design.hpp"
#include "ilab/exposure.hpp"
#include "ilab/graph.hpp"

namespace ilab {

// Table of Science in decomposed form:
// Y_i(z,e) = alpha_i + beta_i z + B_i(e) + z C_i(e), with B_i(0) = C_i(0) = 0.
class PotentialOutcomeTable {
 public:
  PotentialOutcomeTable() = default;
  // B[i] and C[i] have K_i entries each; throws std::invalid_argument if the
  // sizes disagree or B[i][0], C[i][0] are not exactly zero.
  PotentialOutcomeTable(std::vector<double> alpha, std::vector<double> beta,
                        std::vector<std::vector<double>> B, std::vector<std::vector<double>> C);

  int units() const { return static_cast<int>(alpha_.size()); }
  int levels(int i) const { return static_cast<int>(B_[i].size()); }
  double alpha(int i) const { return alpha_[i]; }
  double beta(int i) const { return beta_[i]; }
  double B(int i, int e) const { return B_[i][e]; }
  double C(int i, int e) const { return C_[i][e]; }
  const std::vector<double>& B_levels(int i) const { return B_[i]; }
  const std::vector<double>& C_levels(int i) const { return C_[i]; }

  bool has_covariates() const { return !x_.empty(); }
  double x(int i) const { return x_[i]; }
  double y(int i) const { return y_[i]; }
  void set_covariates(std::vector<double> x, std::vector<double> y);

  // Every potential outcome shifted by c (alpha_i += c).
  PotentialOutcomeTable shifted(double c) const;
  PotentialOutcomeTable subset(const std::vector<int>& units) const;

 private:
  std::vector<double> alpha_, beta_;
  std::vector<std::vector<double>> B_, C_;
  std::vector<double> x_, y_;
};

// Throws std::out_of_range for a level outside [0, K_i).
double potential_outcome(const PotentialOutcomeTable& t, int i, int z, int e);
inline double potential_outcome(const PotentialOutcomeTable& t, int i, Cell c) {
  return potential_outcome(t, i, c.z, c.e);
}

std::vector<double> realize(const PotentialOutcomeTable& t, const ExposureAssignment& a);

// Rows of raw potential outcomes, laid out by cell_index: [Y(0,0..K-1), Y(1,0..K-1)].
PotentialOutcomeTable decompose(const std::vector<std::vector<double>>& raw);
std::vector<std::vector<double>> reconstruct(const PotentialOutcomeTable& t);

// mean_i Y_i(tau1_i) - Y_i(tau0_i)
double contrast_value(const PotentialOutcomeTable& t, const UnitContrast& uc);
// Throws std::domain_error when a unit lacks the estimand's exposed level.
double true_estimand(const PotentialOutcomeTable& t, const ExposureModel& model,
                     const InterferenceGraph& g, Estimand which);

enum class StructuralModel { unrestricted, additive, constant_effects, linear, constant_additive, sharp_null };
StructuralModel parse_structural_model(std::string_view s);

// Projects a table onto a structural model. linear uses the level-1 slope
// (B_i(e) = B_i(1) * magnitude(e)); constant_effects averages every parameter
// over the units that have the level; sharp_null sets beta_i = beta.
PotentialOutcomeTable restrict_table(const PotentialOutcomeTable& t, StructuralModel m,
                                     ExposureKind kind, double beta = 0.0);
bool satisfies(const PotentialOutcomeTable& t, StructuralModel m, ExposureKind kind,
               double beta = 0.0, double tol = 1e-12);

// B_i(e) = gamma_i * magnitude(e), C_i(e) = theta_i * magnitude(e).
PotentialOutcomeTable linear_table(const ExposureModel& model, const InterferenceGraph& g,
                                   const std::vector<double>& alpha, const std::vector<double>& beta,
                                   const std::vector<double>& gamma, const std::vector<double>& theta);
PotentialOutcomeTable linear_table(const ExposureModel& model, const InterferenceGraph& g,
                                   double alpha, double beta, double gamma, double theta);

enum class OutcomeGenerator { uncorrelated, correlated };
OutcomeGenerator parse_outcome_generator(std::string_view s);
std::string to_string(OutcomeGenerator g);

// Per-unit (alpha, beta, gamma, delta) drawn from the simulation-study
// distributions; gamma and delta enter linearly in the exposure magnitude
// (B(1) = gamma, C(1) = delta under binary exposure).
PotentialOutcomeTable generate_params(OutcomeGenerator spec, const InterferenceGraph& g,
                                      const ExposureModel& model, std::uint64_t seed);

enum class MarginalForm { theta_phi, theta_phi_psi };

struct MarginalOptions {
  double cap = kDefaultSupportCap;
  long mc_samples = 0;  // used when the support is not enumerable
  std::uint64_t seed = 1;
};

struct MarginalResult {
  double value = 0.0;
  double se = 0.0;  // zero when exact
  bool exact = true;
  // Units with a zero-probability conditioning arm (theta_phi only).
  std::vector<int> undefined_units;
  bool defined() const { return undefined_units.empty(); }
};

// theta(phi) = (1/n) sum_i E_phi(Y_i | Z_i = 1) - E_phi(Y_i | Z_i = 0)
// theta(phi; psi) = (1/n) sum_i E_phi Y_i - E_psi Y_i
MarginalResult marginal_estimand(const PotentialOutcomeTable& t, const InterferenceGraph& g,
                                 const ExposureModel& model, const Design& phi, const Design* psi,
                                 MarginalForm form, const MarginalOptions& opt = {});

// Columnar text:
//   # unit alpha beta K B_1..B_{K-1} C_1..C_{K-1} [x y]
//   table <n> covariates <0|1>
//   one line per unit
void write_table(const PotentialOutcomeTable& t, std::ostream& out);
PotentialOutcomeTable read_table(std::istream& in);
PotentialOutcomeTable read_table_file(const std::string& path);

}  // namespace ilab
