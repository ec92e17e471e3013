#pragma once

#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ilab/design.hpp"
#include "ilab/exposure.hpp"
#include "ilab/propensity.hpp"

namespace ilab {

struct EstimateDiagnostics {
  int n_treated = 0;  // units with z = 1
  int n_control = 0;
  int n_tau1 = 0;  // units realized in tau1 / tau0
  int n_tau0 = 0;
  double min_weight = std::numeric_limits<double>::quiet_NaN();
  double max_weight = std::numeric_limits<double>::quiet_NaN();
  bool rank_deficient = false;  // GREG design matrix singular; min-norm fit used
  std::string reason;  // why the estimate is undefined
};

struct Estimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
  EstimateDiagnostics diag;
};

// A required propensity is 0 or 1.
class PositivityError : public std::domain_error {
 public:
  PositivityError(const std::string& msg, int unit, Cell cell)
      : std::domain_error(msg), unit(unit), cell(cell) {}
  int unit;
  Cell cell;
};

using Observed = std::span<const double>;

// Assignment entry for a unit outside the analysis sample (for example an
// alter under the independent-set design). Such units contribute no outcome
// but still count in the population size.
inline constexpr Cell kUnobserved{-1, -1};
inline bool observed(Cell c) { return c.z >= 0; }

Estimate naive_dim(Observed obs, const ExposureAssignment& a);
Estimate cell_dim(Observed obs, const ExposureAssignment& a, const UnitContrast& uc);

Estimate horvitz_thompson(Observed obs, const ExposureAssignment& a, const CellTable& pi,
                          const UnitContrast& uc);
Estimate hajek(Observed obs, const ExposureAssignment& a, const CellTable& pi, const UnitContrast& uc);

// Arm means corrected by lambda * (HT total of aux - population total of aux).
Estimate generalized_difference(Observed obs, const ExposureAssignment& a, const CellTable& pi,
                                const UnitContrast& uc, std::span<const double> aux1,
                                std::span<const double> aux0, double lambda1, double lambda2);

struct GregOptions {
  ExposureKind kind = ExposureKind::binary_any;
  // Regressors beyond the intercept: z, magnitude(e), z * magnitude(e).
  bool intercept_only = false;
  // Optional per-unit covariate rows appended to the regressors.
  std::vector<std::vector<double>> covariates;
};

// Weighted least squares (weights 1/pi(Z_i,E_i)) followed by the
// inverse-propensity residual correction in each arm.
Estimate greg(Observed obs, const ExposureAssignment& a, const CellTable& pi, const UnitContrast& uc,
              const GregOptions& opt = {});

Estimate shrunk_ht(Observed obs, const ExposureAssignment& a, const CellTable& pi,
                   const UnitContrast& uc, double k);

struct ModelDependentWeights {
  CellTable w;  // w_i(z,e)
  bool feasible = true;
  std::vector<int> infeasible_units;
};

// Minimum-norm per-unit solution of
//   sum_e w_i(1,e) pi_i(1,e) = 1/n,  w_i(0,e) pi_i(0,e) + w_i(1,e) pi_i(1,e) = 0,
// which is unbiased for DTE under additivity.
ModelDependentWeights model_dependent_weights(const CellTable& pi);

// sum_i w_i(Z_i, E_i) Y_i
Estimate cell_weight_estimate(Observed obs, const ExposureAssignment& a, const CellTable& w);

// w_i(z) for a full treatment vector z with its exposure assignment.
using WeightFunction = std::function<double(int unit, const Treatment& z, const ExposureAssignment& a)>;

WeightFunction ht_weights(const CellTable& pi, const UnitContrast& uc);
WeightFunction cell_weights(const CellTable& w);

struct WeightViolation {
  int family = 0;  // 1: tau1 cell, 2: tau0 cell, 3: any other cell
  int unit = -1;
  Cell cell;
  double value = 0.0;
  double expected = 0.0;
};

struct WeightCheck {
  bool pass = true;
  long equations = 0;
  WeightViolation first;  // meaningful when !pass
};

// Checks sum_{z in Omega_i(c)} w_i(z) p(z) = 1/n, -1/n or 0 for every unit
// and cell, in unit order and family order within a unit.
WeightCheck verify_unbiased_weights(const WeightFunction& w, const Design& d, const InterferenceGraph& g,
                                    const ExposureModel& model, const UnitContrast& uc,
                                    double tol = 1e-10, double cap = kDefaultSupportCap);

enum class EstimatorKind { naive, dom, ht, hajek, gd, greg, model_dep, shrunk_ht };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::naive;
  double k = 0.0;  // shrinkage for shrunk_ht
  std::string name() const;
};

// "naive", "dom", "ht", "hajek", "gd", "greg", "model_dep", "shrunk_ht(k)".
EstimatorSpec parse_estimator(const std::string& s);

// Estimators that need propensities for the contrast cells.
bool needs_propensity(EstimatorKind k);

}  // namespace ilab
