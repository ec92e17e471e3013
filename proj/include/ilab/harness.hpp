#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ilab/design.hpp"
#include "ilab/estimator.hpp"
#include "ilab/exposure.hpp"
#include "ilab/graph.hpp"
#include "ilab/outcomes.hpp"
#include "ilab/propensity.hpp"

namespace ilab {

// ---- configuration ------------------------------------------------------

struct GraphSpec {
  std::string file;  // edge-list file; used when non-empty
  std::string named;  // empty, path, cycle, star, complete, two_triangles
  std::optional<GraphModel> model;
  int n = 0;
  std::uint64_t seed = 1;
};

struct LinearOutcomeSpec {
  double alpha = 0.0, beta = 1.0, gamma = 0.0, theta = 0.0;
};

struct OutcomeSpec {
  std::string file;  // table file; used when non-empty
  std::optional<OutcomeGenerator> generator;
  std::optional<LinearOutcomeSpec> linear;
  std::uint64_t seed = 1;
  double shift = 0.0;  // added to every potential outcome
};

struct DesignSpec {
  std::string type;  // crd, bernoulli, restricted_bernoulli, cluster, independent_set, rerandomized, point_mass
  int n_treated = 0;
  double fraction = 0.0;  // crd: n_treated = round(fraction * n) when n_treated is 0
  double p = 0.5;
  int clusters = 0;
  int clusters_treated = 0;
  std::string partition_file;
  std::uint64_t partition_seed = 1;
  int egos_treated = 0;
  double mix_p = 1.0;
  // Independent-set designs analyse the realized egos only unless disabled.
  bool ego_analysis = true;
  std::shared_ptr<DesignSpec> base;
  std::vector<CellQuota> quotas;
  long max_tries = kDefaultMaxTries;
  Treatment z;
};

struct StrategySpec {
  std::string id;  // defaults to the design description
  DesignSpec design;
  std::vector<std::string> estimators;
};

struct MarginalSpec {
  MarginalForm form = MarginalForm::theta_phi;
  DesignSpec phi;
  std::optional<DesignSpec> psi;
};

enum class Population { all, exposable };
enum class RunMode { monte_carlo, exact };

struct GdOptions {
  std::string aux = "one";  // "one" or "covariate"
  double lambda1 = -1.0;
  double lambda2 = -1.0;
};

struct ExperimentConfig {
  GraphSpec graph;
  ExposureModel exposure;
  OutcomeSpec outcomes;
  Estimand estimand = Estimand::DTE;
  std::optional<MarginalSpec> marginal;  // replaces `estimand` when present
  Population population = Population::all;
  std::vector<StrategySpec> strategies;
  long replicates = 1000;
  std::uint64_t seed = 1;
  RunMode mode = RunMode::monte_carlo;
  long propensity_samples = 200000;
  long marginal_samples = 200000;
  double support_cap = kDefaultSupportCap;
  GdOptions gd;
};

// JSON configuration; schema in README.md. Throws std::invalid_argument
// naming the offending key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

std::shared_ptr<const InterferenceGraph> build_graph(const GraphSpec& spec);
PotentialOutcomeTable build_table(const OutcomeSpec& spec, const InterferenceGraph& g, const ExposureModel& model);
Design build_design(const DesignSpec& spec, std::shared_ptr<const InterferenceGraph> g, const ExposureModel& model);
// Single config sections given as JSON text (same schema as inside a config).
DesignSpec parse_design_spec(const std::string& json_text);
OutcomeSpec parse_outcome_spec(const std::string& json_text);
ExposureModel parse_exposure_spec(const std::string& json_text);
Population parse_population(const std::string& s);
RunMode parse_run_mode(const std::string& s);

// ---- estimator evaluation ---------------------------------------------

// Everything an estimator needs beyond one realized draw, restricted to the
// analysis population.
struct EstimatorContext {
  ExposureModel model;
  UnitContrast contrast;        // empty for marginal estimands
  const CellTable* pi = nullptr;  // contrast propensities
  const CellTable* model_dep = nullptr;
  std::vector<std::vector<double>> covariates;
  std::vector<double> gd_aux;
  GdOptions gd;
};

Estimate evaluate(const EstimatorSpec& spec, Observed obs, const ExposureAssignment& a, const EstimatorContext& ctx);

// Empty when the estimator can run in this context, else the reason it cannot.
std::string feasibility(const EstimatorSpec& spec, const EstimatorContext& ctx, bool marginal, Estimand estimand);

struct ExactMoments {
  double expectation = 0.0;  // conditional on a defined estimate
  double variance = 0.0;
  double undefined_mass = 0.0;
  std::size_t support_points = 0;
};

// Sum over the design support of p(z) * estimate(z). The context refers to
// all n units (no population restriction).
ExactMoments exact_expectation(const Design& d, const InterferenceGraph& g, const ExposureModel& model,
                               const PotentialOutcomeTable& t, const EstimatorSpec& est,
                               const EstimatorContext& ctx, double cap = kDefaultSupportCap);

// Builds a full-population context with exact (analytic or enumerated)
// propensities for the contrast, for use with exact_expectation.
struct OwnedContext {
  CellTable pi;
  CellTable model_dep;
  EstimatorContext ctx;
};
std::unique_ptr<OwnedContext> make_exact_context(const Design& d, const InterferenceGraph& g,
                                                 const ExposureModel& model, const PotentialOutcomeTable& t,
                                                 const UnitContrast& uc, double cap = kDefaultSupportCap);

// ---- experiments -------------------------------------------------------

struct StrategyResult {
  std::string strategy;
  std::string design;
  std::string estimator;
  std::string estimand;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double bias_se = 0.0;
  double var = 0.0;
  double mse = 0.0;
  double undef_rate = 0.0;
  long replicates = 0;
  std::uint64_t seed = 0;
  bool exact = false;
};

struct SkippedStrategy {
  std::string strategy;
  std::string estimator;
  std::string reason;
};

struct RunResult {
  std::vector<StrategyResult> results;
  std::vector<SkippedStrategy> skipped;
  std::vector<std::string> diagnostics;
  int population_size = 0;
};

RunResult run(const ExperimentConfig& config);

// Columns: strategy,design,estimator,estimand,bias,bias_se,var,mse,undef_rate,replicates,seed
void emit_csv(const RunResult& r, std::ostream& out);
void emit_json(const RunResult& r, std::ostream& out);
std::vector<StrategyResult> read_results_csv(std::istream& in);

}  // namespace ilab
