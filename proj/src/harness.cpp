#include "ilab/harness.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <json.hpp>
#include <limits>
#include <ostream>
#include <sstream>

#include "ilab/combinatorics.hpp"
#include "ilab/rng.hpp"

namespace ilab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell_text(Cell c) { return "(" + std::to_string(c.z) + "," + std::to_string(c.e) + ")"; }

std::vector<std::vector<double>> covariate_rows(const PotentialOutcomeTable& t) {
  std::vector<std::vector<double>> rows;
  if (!t.has_covariates()) return rows;
  rows.reserve(static_cast<std::size_t>(t.units()));
  for (int i = 0; i < t.units(); ++i) rows.push_back({t.x(i), t.y(i)});
  return rows;
}

std::vector<double> gd_aux_values(const PotentialOutcomeTable& t, const GdOptions& gd) {
  std::vector<double> aux(static_cast<std::size_t>(t.units()), 1.0);
  if (gd.aux == "covariate") {
    if (!t.has_covariates()) throw std::invalid_argument("gd.aux = covariate needs a table with covariates");
    for (int i = 0; i < t.units(); ++i) aux[i] = t.x(i);
  }
  return aux;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<int>& units) {
  std::vector<T> out;
  out.reserve(units.size());
  for (int i : units) out.push_back(v[i]);
  return out;
}

// Observed outcomes and assignment of the analysis population for one draw.
struct Realized {
  std::vector<double> y;
  ExposureAssignment a;
};

Realized realize_draw(const PotentialOutcomeTable& t, const InterferenceGraph& g, const ExposureModel& model,
                      const Treatment& z, const std::vector<std::uint8_t>* ego, const std::vector<int>& units) {
  const auto a_full = expose(model, g, z);
  const auto y_full = realize(t, a_full);
  Realized r;
  r.y.reserve(units.size());
  r.a.reserve(units.size());
  for (int i : units) {
    r.y.push_back(y_full[i]);
    r.a.push_back(ego && !(*ego)[i] ? kUnobserved : a_full[i]);
  }
  return r;
}

struct WeightedValue {
  double p;
  double v;
};

ExactMoments moments_of(const std::vector<WeightedValue>& vals, double undefined_mass, std::size_t points) {
  ExactMoments m;
  m.undefined_mass = undefined_mass;
  m.support_points = points;
  double mass = 0.0, s = 0.0;
  for (const auto& w : vals) {
    mass += w.p;
    s += w.p * w.v;
  }
  if (mass <= 0.0) {
    m.expectation = kNaN;
    m.variance = kNaN;
    return m;
  }
  m.expectation = s / mass;
  double v = 0.0;
  for (const auto& w : vals) v += w.p * (w.v - m.expectation) * (w.v - m.expectation);
  m.variance = v / mass;
  return m;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Estimate evaluate(const EstimatorSpec& spec, Observed obs, const ExposureAssignment& a, const EstimatorContext& ctx) {
  switch (spec.kind) {
    case EstimatorKind::naive: return naive_dim(obs, a);
    case EstimatorKind::dom: return cell_dim(obs, a, ctx.contrast);
    case EstimatorKind::ht: return horvitz_thompson(obs, a, *ctx.pi, ctx.contrast);
    case EstimatorKind::hajek: return hajek(obs, a, *ctx.pi, ctx.contrast);
    case EstimatorKind::gd:
      return generalized_difference(obs, a, *ctx.pi, ctx.contrast, ctx.gd_aux, ctx.gd_aux, ctx.gd.lambda1,
                                    ctx.gd.lambda2);
    case EstimatorKind::greg: {
      GregOptions opt;
      opt.kind = ctx.model.kind;
      opt.covariates = ctx.covariates;
      return greg(obs, a, *ctx.pi, ctx.contrast, opt);
    }
    case EstimatorKind::model_dep: return cell_weight_estimate(obs, a, *ctx.model_dep);
    case EstimatorKind::shrunk_ht: return shrunk_ht(obs, a, *ctx.pi, ctx.contrast, spec.k);
  }
  throw std::logic_error("unhandled estimator");
}

std::string feasibility(const EstimatorSpec& spec, const EstimatorContext& ctx, bool marginal, Estimand estimand) {
  if (marginal) {
    return spec.kind == EstimatorKind::naive ? "" : "marginal estimands are evaluated with the naive estimator only";
  }
  if (spec.kind == EstimatorKind::model_dep && estimand != Estimand::DTE) {
    return "model-dependent weights target DTE only";
  }
  if (!needs_propensity(spec.kind)) return "";
  if (!ctx.pi) return "no propensities available";
  for (int i = 0; i < ctx.contrast.size(); ++i) {
    for (Cell c : {ctx.contrast.tau1[i], ctx.contrast.tau0[i]}) {
      const double p = (*ctx.pi)(i, c);
      if (!(p > 0.0 && p < 1.0)) {
        return "positivity fails: unit " + std::to_string(i) + " has pi" + cell_text(c) + " = " + format_double(p);
      }
    }
  }
  if (spec.kind == EstimatorKind::model_dep && !ctx.model_dep) return "model-dependent weights infeasible";
  return "";
}

ExactMoments exact_expectation(const Design& d, const InterferenceGraph& g, const ExposureModel& model,
                               const PotentialOutcomeTable& t, const EstimatorSpec& est,
                               const EstimatorContext& ctx, double cap) {
  std::vector<int> all(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) all[i] = i;
  std::vector<WeightedValue> vals;
  double undefined = 0.0;
  const auto support = enumerate_support(d, cap);
  for (const auto& pt : support) {
    const auto r = realize_draw(t, g, model, pt.z, nullptr, all);
    const Estimate e = evaluate(est, r.y, r.a, ctx);
    if (e.defined) vals.push_back({pt.probability, e.value});
    else undefined += pt.probability;
  }
  return moments_of(vals, undefined, support.size());
}

std::unique_ptr<OwnedContext> make_exact_context(const Design& d, const InterferenceGraph& g,
                                                 const ExposureModel& model, const PotentialOutcomeTable& t,
                                                 const UnitContrast& uc, double cap) {
  auto out = std::make_unique<OwnedContext>();
  out->pi = has_analytic_propensity(d, model) ? static_cast<CellTable>(analytic_propensity(d, g, model))
                                              : static_cast<CellTable>(
                                                    enumerated_propensity(d, g, model, false, cap).marginal);
  auto mdw = model_dependent_weights(out->pi);
  out->model_dep = std::move(mdw.w);
  out->ctx.model = model;
  out->ctx.contrast = uc;
  out->ctx.pi = &out->pi;
  out->ctx.model_dep = mdw.feasible ? &out->model_dep : nullptr;
  out->ctx.covariates = covariate_rows(t);
  out->ctx.gd_aux.assign(static_cast<std::size_t>(t.units()), 1.0);
  return out;
}

RunResult run(const ExperimentConfig& cfg) {
  RunResult out;
  const auto g = build_graph(cfg.graph);
  const ExposureModel& model = cfg.exposure;
  const PotentialOutcomeTable table = build_table(cfg.outcomes, *g, model);
  const bool marginal = cfg.marginal.has_value();
  const int n = g->size();

  std::vector<int> units;
  if (cfg.population == Population::exposable && !marginal) {
    units = contrast_population(contrast_for(cfg.estimand), model, *g);
  } else {
    for (int i = 0; i < n; ++i) units.push_back(i);
  }
  if (cfg.population == Population::exposable && marginal) {
    out.diagnostics.push_back("population 'exposable' ignored for marginal estimands");
  }
  if (units.empty()) throw std::invalid_argument("analysis population is empty");
  out.population_size = static_cast<int>(units.size());
  if (static_cast<int>(units.size()) < n) {
    out.diagnostics.push_back("analysis population: " + std::to_string(units.size()) + " of " + std::to_string(n) +
                              " units (others cannot reach both contrast cells)");
  }

  const PotentialOutcomeTable t_pop = table.subset(units);
  UnitContrast uc;
  double truth = 0.0;
  std::string estimand_name;
  if (marginal) {
    const auto& ms = *cfg.marginal;
    const Design phi = build_design(ms.phi, g, model);
    std::optional<Design> psi;
    if (ms.psi) psi = build_design(*ms.psi, g, model);
    MarginalOptions mo{cfg.support_cap, cfg.marginal_samples, cfg.seed};
    const auto mr = marginal_estimand(table, *g, model, phi, psi ? &*psi : nullptr, ms.form, mo);
    if (!mr.defined()) throw std::domain_error("marginal estimand undefined: a unit has a zero-probability arm");
    truth = mr.value;
    estimand_name = ms.form == MarginalForm::theta_phi ? "theta(" + phi.describe() + ")"
                                                       : "theta(" + phi.describe() + ";" + psi->describe() + ")";
    if (!mr.exact) out.diagnostics.push_back("marginal estimand by Monte Carlo, se " + format_double(mr.se));
  } else {
    const Contrast c = contrast_for(cfg.estimand);
    for (int i : units) {
      try {
        uc.tau1.push_back(resolve_cell(model, *g, i, c.tau1));
        uc.tau0.push_back(resolve_cell(model, *g, i, c.tau0));
      } catch (const std::domain_error& e) {
        throw std::domain_error(std::string(e.what()) + " (use population \"exposable\" to drop such units)");
      }
    }
    truth = contrast_value(t_pop, uc);
    estimand_name = to_string(cfg.estimand);
  }

  const auto covariates = pick(covariate_rows(table), table.has_covariates() ? units : std::vector<int>{});
  const auto aux = pick(gd_aux_values(table, cfg.gd), units);

  for (const auto& st : cfg.strategies) {
    const Design design = build_design(st.design, g, model);
    const std::string sid = st.id.empty() ? design.describe() : st.id;
    std::vector<EstimatorSpec> specs;
    for (const auto& e : st.estimators) specs.push_back(parse_estimator(e));

    const bool ego = design.kind() == Design::Kind::independent_set && st.design.ego_analysis && !marginal &&
                     cfg.estimand == Estimand::DTE;
    if (design.kind() == Design::Kind::independent_set && st.design.ego_analysis && !ego) {
      out.diagnostics.push_back(sid + ": ego-only analysis applies to DTE; using all units");
    }

    bool need_pi = false;
    for (const auto& s : specs) need_pi = need_pi || (needs_propensity(s.kind) && !marginal);

    CellTable pi, mdw;
    EstimatorContext ctx;
    ctx.model = model;
    ctx.contrast = uc;
    ctx.covariates = covariates;
    ctx.gd_aux = aux;
    ctx.gd = cfg.gd;
    std::string pi_error;
    if (need_pi) {
      try {
        if (ego) {
          const auto ep = ego_propensity(design, cfg.propensity_samples, cfg.seed);
          pi = CellTable(pick(level_counts(model, *g), units));
          for (std::size_t k = 0; k < units.size(); ++k) {
            pi.at(static_cast<int>(k), {1, 0}) = ep.treated[units[k]];
            pi.at(static_cast<int>(k), {0, 0}) = ep.control[units[k]];
          }
          if (!ep.exact) {
            out.diagnostics.push_back(sid + ": ego propensities from " + std::to_string(ep.samples) +
                                      " Monte Carlo ego sets");
          }
        } else {
          const auto full = best_available_propensity(design, *g, model, cfg.propensity_samples, cfg.seed,
                                                      cfg.support_cap);
          if (full.provenance == Provenance::monte_carlo) {
            out.diagnostics.push_back(sid + ": propensities " + full.provenance_text());
          }
          for (const auto& w : full.warnings) out.diagnostics.push_back(sid + ": " + w);
          pi = full.subset(units);
        }
        ctx.pi = &pi;
        bool want_md = false;
        for (const auto& s : specs) want_md = want_md || s.kind == EstimatorKind::model_dep;
        if (want_md) {
          auto md = model_dependent_weights(pi);
          mdw = std::move(md.w);
          if (md.feasible) ctx.model_dep = &mdw;
        }
      } catch (const std::exception& e) {
        pi_error = e.what();
      }
    }

    std::vector<EstimatorSpec> active;
    for (const auto& s : specs) {
      std::string reason;
      if (needs_propensity(s.kind) && !marginal && !pi_error.empty()) reason = "propensities unavailable: " + pi_error;
      else reason = feasibility(s, ctx, marginal, cfg.estimand);
      if (!reason.empty()) out.skipped.push_back({sid, s.name(), reason});
      else active.push_back(s);
    }
    if (active.empty()) continue;

    auto make_result = [&](const EstimatorSpec& s) {
      StrategyResult r;
      r.strategy = sid;
      r.design = design.describe();
      r.estimator = s.name();
      r.estimand = estimand_name;
      r.truth = truth;
      r.seed = cfg.seed;
      return r;
    };

    if (cfg.mode == RunMode::exact) {
      std::vector<std::vector<WeightedValue>> vals(active.size());
      std::vector<double> undefined(active.size(), 0.0);
      std::size_t points = 0;
      auto visit = [&](const Treatment& z, const std::vector<std::uint8_t>* egos, double p) {
        ++points;
        const auto r = realize_draw(table, *g, model, z, egos, units);
        for (std::size_t k = 0; k < active.size(); ++k) {
          const Estimate e = evaluate(active[k], r.y, r.a, ctx);
          if (e.defined) vals[k].push_back({p, e.value});
          else undefined[k] += p;
        }
      };
      try {
        if (ego) {
          for (const auto& pt : enumerate_ego_support(design, cfg.support_cap)) visit(pt.draw.z, &pt.draw.ego, pt.probability);
        } else {
          for (const auto& pt : enumerate_support(design, cfg.support_cap)) visit(pt.z, nullptr, pt.probability);
        }
      } catch (const SupportTooLarge& e) {
        for (const auto& s : active) out.skipped.push_back({sid, s.name(), e.what()});
        continue;
      }
      for (std::size_t k = 0; k < active.size(); ++k) {
        const auto m = moments_of(vals[k], undefined[k], points);
        StrategyResult r = make_result(active[k]);
        r.exact = true;
        r.mean = m.expectation;
        r.bias = m.expectation - truth;
        r.bias_se = 0.0;
        r.var = m.variance;
        r.mse = r.bias * r.bias + r.var;
        r.undef_rate = m.undefined_mass;
        r.replicates = static_cast<long>(points);
        out.results.push_back(r);
      }
      continue;
    }

    const long R = cfg.replicates;
    const std::uint64_t stream = stream_id(design.describe());
    std::vector<double> values(active.size() * static_cast<std::size_t>(R), kNaN);
    std::vector<std::string> errors(static_cast<std::size_t>(R));
    parallel_for(static_cast<std::size_t>(R), [&](std::size_t r) {
      try {
        Engine eng = make_engine(cfg.seed, stream, r);
        Realized rz;
        if (ego) {
          const EgoDraw dr = sample_with_egos(design, eng);
          rz = realize_draw(table, *g, model, dr.z, &dr.ego, units);
        } else {
          rz = realize_draw(table, *g, model, sample(design, eng), nullptr, units);
        }
        for (std::size_t k = 0; k < active.size(); ++k) {
          const Estimate e = evaluate(active[k], rz.y, rz.a, ctx);
          if (e.defined) values[k * R + r] = e.value;
        }
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    });
    for (std::size_t r = 0; r < errors.size(); ++r) {
      if (!errors[r].empty()) throw std::runtime_error(sid + ", replicate " + std::to_string(r) + ": " + errors[r]);
    }
    for (std::size_t k = 0; k < active.size(); ++k) {
      std::vector<double> ok;
      for (long r = 0; r < R; ++r) {
        const double v = values[k * R + r];
        if (!std::isnan(v)) ok.push_back(v);
      }
      StrategyResult res = make_result(active[k]);
      res.replicates = R;
      res.undef_rate = static_cast<double>(R - static_cast<long>(ok.size())) / static_cast<double>(R);
      if (ok.empty()) {
        res.mean = res.bias = res.bias_se = res.var = res.mse = kNaN;
      } else {
        const double N = static_cast<double>(ok.size());
        res.mean = pairwise_sum(ok) / N;
        std::vector<double> sq(ok.size());
        for (std::size_t i = 0; i < ok.size(); ++i) sq[i] = (ok[i] - res.mean) * (ok[i] - res.mean);
        res.var = pairwise_sum(sq) / N;
        res.bias = res.mean - truth;
        res.bias_se = ok.size() > 1 ? std::sqrt(res.var * N / (N - 1.0) / N) : 0.0;
        res.mse = res.bias * res.bias + res.var;
      }
      out.results.push_back(res);
    }
  }
  return out;
}

void emit_csv(const RunResult& r, std::ostream& out) {
  out << "strategy,design,estimator,estimand,bias,bias_se,var,mse,undef_rate,replicates,seed\n";
  for (const auto& s : r.results) {
    out << csv_field(s.strategy) << ',' << csv_field(s.design) << ',' << csv_field(s.estimator) << ','
        << csv_field(s.estimand) << ',' << format_double(s.bias) << ',' << format_double(s.bias_se) << ','
        << format_double(s.var) << ',' << format_double(s.mse) << ',' << format_double(s.undef_rate) << ','
        << s.replicates << ',' << s.seed << '\n';
  }
}

void emit_json(const RunResult& r, std::ostream& out) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : r.results) {
    arr.push_back({{"strategy", s.strategy},
                   {"design", s.design},
                   {"estimator", s.estimator},
                   {"estimand", s.estimand},
                   {"bias", num(s.bias)},
                   {"bias_se", num(s.bias_se)},
                   {"var", num(s.var)},
                   {"mse", num(s.mse)},
                   {"undef_rate", num(s.undef_rate)},
                   {"replicates", s.replicates},
                   {"seed", s.seed}});
  }
  out << arr.dump(2) << '\n';
}

std::vector<StrategyResult> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("results csv: missing header");
  std::vector<StrategyResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) throw std::invalid_argument("results csv: expected 11 fields, got " + std::to_string(f.size()));
    StrategyResult s;
    s.strategy = f[0];
    s.design = f[1];
    s.estimator = f[2];
    s.estimand = f[3];
    s.bias = std::stod(f[4]);
    s.bias_se = std::stod(f[5]);
    s.var = std::stod(f[6]);
    s.mse = std::stod(f[7]);
    s.undef_rate = std::stod(f[8]);
    s.replicates = std::stol(f[9]);
    s.seed = std::stoull(f[10]);
    out.push_back(s);
  }
  return out;
}

}  // namespace ilab
