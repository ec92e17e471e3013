#include "ilab/estimator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "ilab/combinatorics.hpp"

namespace ilab {

namespace {

void check_sizes(Observed obs, const ExposureAssignment& a) {
  if (obs.size() != a.size()) throw std::invalid_argument("observed outcomes and assignment differ in length");
}

void check_sizes(Observed obs, const ExposureAssignment& a, const UnitContrast& uc) {
  check_sizes(obs, a);
  if (static_cast<std::size_t>(uc.size()) != a.size()) {
    throw std::invalid_argument("contrast and assignment differ in length");
  }
}

std::string cell_text(Cell c) {
  return "(" + std::to_string(c.z) + "," + std::to_string(c.e) + ")";
}

// pi_i(c), rejecting values outside (0,1).
double required_pi(const CellTable& pi, int i, Cell c) {
  const double p = pi(i, c);
  if (!(p > 0.0 && p < 1.0)) {
    std::ostringstream os;
    os << "positivity violated: unit " << i << " has pi" << cell_text(c) << " = " << p;
    throw PositivityError(os.str(), i, c);
  }
  return p;
}

Estimate undefined(EstimateDiagnostics d, std::string why) {
  Estimate e;
  d.reason = std::move(why);
  e.diag = std::move(d);
  return e;
}

void count_cells(const ExposureAssignment& a, const UnitContrast* uc, EstimateDiagnostics& d) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!observed(a[i])) continue;
    if (a[i].z) ++d.n_treated;
    else ++d.n_control;
    if (uc) {
      if (a[i] == uc->tau1[i]) ++d.n_tau1;
      if (a[i] == uc->tau0[i]) ++d.n_tau0;
    }
  }
}

// HT arm totals sum_{i in tau} Y_i / pi_i(tau) and weight ranges.
struct ArmTotals {
  double y1 = 0.0, y0 = 0.0, w1 = 0.0, w0 = 0.0;
};

ArmTotals ht_totals(Observed obs, const ExposureAssignment& a, const CellTable& pi, const UnitContrast& uc,
                    EstimateDiagnostics& d) {
  ArmTotals t;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const int i = static_cast<int>(k);
    const double p1 = required_pi(pi, i, uc.tau1[i]);
    const double p0 = required_pi(pi, i, uc.tau0[i]);
    if (a[i] == uc.tau1[i]) {
      t.y1 += obs[i] / p1;
      t.w1 += 1.0 / p1;
      lo = std::min(lo, 1.0 / p1);
      hi = std::max(hi, 1.0 / p1);
    } else if (a[i] == uc.tau0[i]) {
      t.y0 += obs[i] / p0;
      t.w0 += 1.0 / p0;
      lo = std::min(lo, 1.0 / p0);
      hi = std::max(hi, 1.0 / p0);
    }
  }
  if (lo <= hi) {
    d.min_weight = lo;
    d.max_weight = hi;
  }
  return t;
}

}  // namespace

Estimate naive_dim(Observed obs, const ExposureAssignment& a) {
  check_sizes(obs, a);
  Estimate e;
  double s1 = 0.0, s0 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (observed(a[i])) (a[i].z ? s1 : s0) += obs[i];
  }
  count_cells(a, nullptr, e.diag);
  if (e.diag.n_treated == 0 || e.diag.n_control == 0) return undefined(e.diag, "empty treatment arm");
  e.value = s1 / e.diag.n_treated - s0 / e.diag.n_control;
  e.defined = true;
  return e;
}

Estimate cell_dim(Observed obs, const ExposureAssignment& a, const UnitContrast& uc) {
  check_sizes(obs, a, uc);
  Estimate e;
  double s1 = 0.0, s0 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == uc.tau1[i]) s1 += obs[i];
    else if (a[i] == uc.tau0[i]) s0 += obs[i];
  }
  count_cells(a, &uc, e.diag);
  if (e.diag.n_tau1 == 0 || e.diag.n_tau0 == 0) return undefined(e.diag, "empty contrast cell");
  e.value = s1 / e.diag.n_tau1 - s0 / e.diag.n_tau0;
  e.defined = true;
  return e;
}

Estimate horvitz_thompson(Observed obs, const ExposureAssignment& a, const CellTable& pi,
                          const UnitContrast& uc) {
  check_sizes(obs, a, uc);
  Estimate e;
  count_cells(a, &uc, e.diag);
  const ArmTotals t = ht_totals(obs, a, pi, uc, e.diag);
  e.value = (t.y1 - t.y0) / static_cast<double>(a.size());
  e.defined = true;
  return e;
}

Estimate hajek(Observed obs, const ExposureAssignment& a, const CellTable& pi, const UnitContrast& uc) {
  check_sizes(obs, a, uc);
  Estimate e;
  count_cells(a, &uc, e.diag);
  const ArmTotals t = ht_totals(obs, a, pi, uc, e.diag);
  if (e.diag.n_tau1 == 0 || e.diag.n_tau0 == 0) return undefined(e.diag, "empty contrast cell");
  e.value = t.y1 / t.w1 - t.y0 / t.w0;
  e.defined = true;
  return e;
}

Estimate generalized_difference(Observed obs, const ExposureAssignment& a, const CellTable& pi,
                                const UnitContrast& uc, std::span<const double> aux1,
                                std::span<const double> aux0, double lambda1, double lambda2) {
  check_sizes(obs, a, uc);
  if (aux1.size() != a.size() || aux0.size() != a.size()) {
    throw std::invalid_argument("generalized_difference: auxiliary length differs from unit count");
  }
  Estimate e;
  count_cells(a, &uc, e.diag);
  const ArmTotals t = ht_totals(obs, a, pi, uc, e.diag);
  double ht_a = 0.0, ht_b = 0.0, tot_a = 0.0, tot_b = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const int i = static_cast<int>(k);
    tot_a += aux1[i];
    tot_b += aux0[i];
    if (a[i] == uc.tau1[i]) ht_a += aux1[i] / pi(i, uc.tau1[i]);
    else if (a[i] == uc.tau0[i]) ht_b += aux0[i] / pi(i, uc.tau0[i]);
  }
  const double n = static_cast<double>(a.size());
  const double m1 = (t.y1 + lambda1 * (ht_a - tot_a)) / n;
  const double m0 = (t.y0 + lambda2 * (ht_b - tot_b)) / n;
  e.value = m1 - m0;
  e.defined = true;
  return e;
}

Estimate greg(Observed obs, const ExposureAssignment& a, const CellTable& pi, const UnitContrast& uc,
              const GregOptions& opt) {
  check_sizes(obs, a, uc);
  const int n = static_cast<int>(a.size());
  const std::size_t ncov = opt.covariates.empty() ? 0 : opt.covariates.front().size();
  if (!opt.covariates.empty() && static_cast<int>(opt.covariates.size()) != n) {
    throw std::invalid_argument("greg: covariate rows differ from unit count");
  }
  const int p = 1 + (opt.intercept_only ? 0 : 3) + static_cast<int>(ncov);
  auto features = [&](int i, Cell c, Eigen::Ref<Eigen::VectorXd> x) {
    int k = 0;
    x[k++] = 1.0;
    if (!opt.intercept_only) {
      const double m = exposure_magnitude(opt.kind, c.e);
      x[k++] = c.z;
      x[k++] = m;
      x[k++] = c.z * m;
    }
    for (std::size_t j = 0; j < ncov; ++j) x[k++] = opt.covariates[i][j];
  };

  Estimate e;
  count_cells(a, &uc, e.diag);
  ht_totals(obs, a, pi, uc, e.diag);

  Eigen::MatrixXd XtWX = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd XtWy = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd x(p);
  for (int i = 0; i < n; ++i) {
    if (!observed(a[i])) continue;
    const double pr = pi(i, a[i]);
    if (!(pr > 0.0)) {
      throw PositivityError("greg: realized cell of unit " + std::to_string(i) + " has zero propensity", i,
                            a[i]);
    }
    const double w = 1.0 / pr;
    features(i, a[i], x);
    XtWX.noalias() += w * x * x.transpose();
    XtWy.noalias() += w * obs[i] * x;
  }
  Eigen::VectorXd coef;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(XtWX);
  if (lu.rank() < p) {
    e.diag.rank_deficient = true;
    coef = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(XtWX).solve(XtWy);
  } else {
    coef = lu.solve(XtWy);
  }

  double pred = 0.0, corr1 = 0.0, corr0 = 0.0;
  Eigen::VectorXd x1(p), x0(p);
  for (int i = 0; i < n; ++i) {
    features(i, uc.tau1[i], x1);
    features(i, uc.tau0[i], x0);
    const double y1 = x1.dot(coef), y0 = x0.dot(coef);
    pred += y1 - y0;
    if (a[i] == uc.tau1[i]) corr1 += (obs[i] - y1) / pi(i, uc.tau1[i]);
    else if (a[i] == uc.tau0[i]) corr0 += (obs[i] - y0) / pi(i, uc.tau0[i]);
  }
  e.value = (pred + corr1 - corr0) / n;
  e.defined = true;
  return e;
}

Estimate shrunk_ht(Observed obs, const ExposureAssignment& a, const CellTable& pi, const UnitContrast& uc,
                   double k) {
  if (!(k >= 0.0 && k <= 1.0)) throw std::invalid_argument("shrunk_ht: k must lie in [0,1]");
  Estimate e = horvitz_thompson(obs, a, pi, uc);
  e.value *= 1.0 - k;
  return e;
}

ModelDependentWeights model_dependent_weights(const CellTable& pi) {
  const int n = pi.units();
  ModelDependentWeights out{CellTable(pi.level_counts()), true, {}};
  for (int i = 0; i < n; ++i) {
    const int K = pi.levels(i);
    // Unknowns ordered by cell_index: w(0,0..K-1), w(1,0..K-1).
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(K + 1, 2 * K);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(K + 1);
    for (int e = 0; e < K; ++e) {
      A(0, K + e) = pi(i, {1, e});
      A(1 + e, e) = pi(i, {0, e});
      A(1 + e, K + e) = pi(i, {1, e});
    }
    b(0) = 1.0 / n;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    Eigen::VectorXd w = cod.solve(b);
    if ((A * w - b).norm() > 1e-10 * std::max(1.0, b.norm()) || !w.allFinite()) {
      out.feasible = false;
      out.infeasible_units.push_back(i);
      w.setZero();
    }
    auto row = out.w.row(i);
    for (int c = 0; c < 2 * K; ++c) row[c] = w[c];
  }
  return out;
}

Estimate cell_weight_estimate(Observed obs, const ExposureAssignment& a, const CellTable& w) {
  check_sizes(obs, a);
  Estimate e;
  count_cells(a, nullptr, e.diag);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (observed(a[i])) s += w(static_cast<int>(i), a[i]) * obs[i];
  }
  e.value = s;
  e.defined = true;
  return e;
}

WeightFunction ht_weights(const CellTable& pi, const UnitContrast& uc) {
  const double n = static_cast<double>(pi.units());
  return [pi, uc, n](int i, const Treatment&, const ExposureAssignment& a) {
    if (a[i] == uc.tau1[i]) return 1.0 / (n * pi(i, uc.tau1[i]));
    if (a[i] == uc.tau0[i]) return -1.0 / (n * pi(i, uc.tau0[i]));
    return 0.0;
  };
}

WeightFunction cell_weights(const CellTable& w) {
  return [w](int i, const Treatment&, const ExposureAssignment& a) { return w(i, a[i]); };
}

WeightCheck verify_unbiased_weights(const WeightFunction& w, const Design& d, const InterferenceGraph& g,
                                    const ExposureModel& model, const UnitContrast& uc, double tol,
                                    double cap) {
  const int n = g.size();
  const auto levels = level_counts(model, g);
  CellTable sums(levels);
  for (const auto& pt : enumerate_support(d, cap)) {
    const auto a = expose(model, g, pt.z);
    for (int i = 0; i < n; ++i) sums.at(i, a[i]) += w(i, pt.z, a) * pt.probability;
  }
  WeightCheck chk;
  auto test = [&](int family, int i, Cell c, double expected) {
    ++chk.equations;
    const double v = sums(i, c);
    if (chk.pass && !(std::abs(v - expected) <= tol)) {
      chk.pass = false;
      chk.first = {family, i, c, v, expected};
    }
  };
  for (int i = 0; i < n; ++i) {
    test(1, i, uc.tau1[i], 1.0 / n);
    test(2, i, uc.tau0[i], -1.0 / n);
    for (int z = 0; z < 2; ++z) {
      for (int e = 0; e < levels[i]; ++e) {
        const Cell c{z, e};
        if (c == uc.tau1[i] || c == uc.tau0[i]) continue;
        test(3, i, c, 0.0);
      }
    }
  }
  return chk;
}

std::string EstimatorSpec::name() const {
  switch (kind) {
    case EstimatorKind::naive: return "naive";
    case EstimatorKind::dom: return "dom";
    case EstimatorKind::ht: return "ht";
    case EstimatorKind::hajek: return "hajek";
    case EstimatorKind::gd: return "gd";
    case EstimatorKind::greg: return "greg";
    case EstimatorKind::model_dep: return "model_dep";
    case EstimatorKind::shrunk_ht: {
      std::ostringstream os;
      os << "shrunk_ht(" << k << ")";
      return os.str();
    }
  }
  return "?";
}

EstimatorSpec parse_estimator(const std::string& s) {
  if (s == "naive") return {EstimatorKind::naive};
  if (s == "dom") return {EstimatorKind::dom};
  if (s == "ht") return {EstimatorKind::ht};
  if (s == "hajek" || s == "ratio") return {EstimatorKind::hajek};
  if (s == "gd") return {EstimatorKind::gd};
  if (s == "greg") return {EstimatorKind::greg};
  if (s == "model_dep") return {EstimatorKind::model_dep};
  const std::string prefix = "shrunk_ht(";
  if (s.rfind(prefix, 0) == 0 && s.back() == ')') {
    const std::string arg = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    std::size_t used = 0;
    double k = 0.0;
    try {
      k = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != arg.size() || !(k >= 0.0 && k <= 1.0)) {
      throw std::invalid_argument("shrunk_ht: k must be a number in [0,1], got '" + arg + "'");
    }
    return {EstimatorKind::shrunk_ht, k};
  }
  throw std::invalid_argument("unknown estimator: " + s);
}

bool needs_propensity(EstimatorKind k) {
  return k != EstimatorKind::naive && k != EstimatorKind::dom;
}

}  // namespace ilab
