#include <cmath>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <set>
#include <sstream>

#include "ilab/harness.hpp"

namespace ilab {

namespace {

using json = nlohmann::json;

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw std::invalid_argument(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
T get(const json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(where + "." + key + ": wrong type");
  }
}

template <typename T>
T require_key(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(where + ": missing key '" + key + "'");
  return get<T>(j, where, key, T{});
}

GraphSpec parse_graph(const json& j) {
  const std::string w = "graph";
  allow_keys(j, w, {"file", "named", "model", "n", "seed", "p", "min_degree", "attractiveness",
                    "neighborhood_size", "rewire_p"});
  GraphSpec g;
  g.file = get<std::string>(j, w, "file", "");
  g.named = get<std::string>(j, w, "named", "");
  g.n = get<int>(j, w, "n", 0);
  g.seed = get<std::uint64_t>(j, w, "seed", 1);
  if (j.contains("model")) {
    const auto m = get<std::string>(j, w, "model", "");
    if (m == "erdos_renyi") {
      g.model = ErdosRenyi{require_key<double>(j, w, "p")};
    } else if (m == "barabasi_albert") {
      BarabasiAlbert ba;
      ba.min_degree = get<int>(j, w, "min_degree", ba.min_degree);
      ba.attractiveness = get<double>(j, w, "attractiveness", ba.attractiveness);
      g.model = ba;
    } else if (m == "small_world") {
      SmallWorld sw;
      sw.neighborhood_size = get<int>(j, w, "neighborhood_size", sw.neighborhood_size);
      sw.rewire_p = get<double>(j, w, "rewire_p", sw.rewire_p);
      g.model = sw;
    } else {
      throw std::invalid_argument("graph.model: unknown model '" + m + "'");
    }
  }
  const int sources = !g.file.empty() + !g.named.empty() + g.model.has_value();
  if (sources != 1) throw std::invalid_argument("graph: give exactly one of file, named, model");
  return g;
}

ExposureModel parse_exposure(const json& j) {
  ExposureModel m;
  if (j.is_string()) {
    m.kind = parse_exposure_kind(j.get<std::string>());
    return m;
  }
  allow_keys(j, "exposure", {"kind", "exposed"});
  m.kind = parse_exposure_kind(require_key<std::string>(j, "exposure", "kind"));
  if (j.contains("exposed")) m.exposed = parse_exposed_level(get<std::string>(j, "exposure", "exposed", ""));
  return m;
}

OutcomeSpec parse_outcomes(const json& j) {
  const std::string w = "outcomes";
  allow_keys(j, w, {"file", "generator", "linear", "seed", "shift"});
  OutcomeSpec o;
  o.file = get<std::string>(j, w, "file", "");
  if (j.contains("generator")) o.generator = parse_outcome_generator(get<std::string>(j, w, "generator", ""));
  if (j.contains("linear")) {
    const auto& l = j.at("linear");
    allow_keys(l, "outcomes.linear", {"alpha", "beta", "gamma", "theta"});
    LinearOutcomeSpec s;
    s.alpha = get<double>(l, "outcomes.linear", "alpha", s.alpha);
    s.beta = get<double>(l, "outcomes.linear", "beta", s.beta);
    s.gamma = get<double>(l, "outcomes.linear", "gamma", s.gamma);
    s.theta = get<double>(l, "outcomes.linear", "theta", s.theta);
    o.linear = s;
  }
  o.seed = get<std::uint64_t>(j, w, "seed", 1);
  o.shift = get<double>(j, w, "shift", 0.0);
  const int sources = !o.file.empty() + o.generator.has_value() + o.linear.has_value();
  if (sources != 1) throw std::invalid_argument("outcomes: give exactly one of file, generator, linear");
  return o;
}

DesignSpec parse_design(const json& j, const std::string& w) {
  allow_keys(j, w, {"type", "n_treated", "fraction", "p", "clusters", "clusters_treated", "partition_file",
                    "partition_seed", "egos_treated", "mix_p", "ego_analysis", "base", "quotas", "max_tries", "z"});
  DesignSpec d;
  d.type = require_key<std::string>(j, w, "type");
  d.n_treated = get<int>(j, w, "n_treated", 0);
  d.fraction = get<double>(j, w, "fraction", 0.0);
  d.p = get<double>(j, w, "p", 0.5);
  d.clusters = get<int>(j, w, "clusters", 0);
  d.clusters_treated = get<int>(j, w, "clusters_treated", 0);
  d.partition_file = get<std::string>(j, w, "partition_file", "");
  d.partition_seed = get<std::uint64_t>(j, w, "partition_seed", 1);
  d.egos_treated = get<int>(j, w, "egos_treated", 0);
  d.mix_p = get<double>(j, w, "mix_p", 1.0);
  d.ego_analysis = get<bool>(j, w, "ego_analysis", true);
  d.max_tries = get<long>(j, w, "max_tries", kDefaultMaxTries);
  if (j.contains("base")) d.base = std::make_shared<DesignSpec>(parse_design(j.at("base"), w + ".base"));
  if (j.contains("quotas")) {
    for (const auto& q : j.at("quotas")) {
      allow_keys(q, w + ".quotas", {"z", "e", "min"});
      CellQuota cq;
      cq.cell.z = require_key<int>(q, w + ".quotas", "z");
      const auto& e = q.at("e");
      cq.cell.e = e.is_string() && e.get<std::string>() == "exposed" ? kExposed : e.get<int>();
      cq.min_count = get<int>(q, w + ".quotas", "min", 1);
      d.quotas.push_back(cq);
    }
  }
  if (j.contains("z")) {
    for (const auto& v : j.at("z")) d.z.push_back(static_cast<std::uint8_t>(v.get<int>() != 0));
  }
  return d;
}

}  // namespace

DesignSpec parse_design_spec(const std::string& text) { return parse_design(json::parse(text), "design"); }
OutcomeSpec parse_outcome_spec(const std::string& text) { return parse_outcomes(json::parse(text)); }
ExposureModel parse_exposure_spec(const std::string& text) { return parse_exposure(json::parse(text)); }

Population parse_population(const std::string& s) {
  if (s == "all") return Population::all;
  if (s == "exposable") return Population::exposable;
  throw std::invalid_argument("unknown population: " + s);
}

RunMode parse_run_mode(const std::string& s) {
  if (s == "monte_carlo" || s == "mc") return RunMode::monte_carlo;
  if (s == "exact" || s == "exact_enumeration") return RunMode::exact;
  throw std::invalid_argument("unknown mode: " + s);
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  const std::string w = "config";
  allow_keys(j, w, {"graph", "exposure", "outcomes", "estimand", "population", "strategies", "replicates", "seed",
                    "mode", "propensity_samples", "marginal_samples", "support_cap", "gd"});
  ExperimentConfig c;
  if (!j.contains("graph")) throw std::invalid_argument("config: missing key 'graph'");
  c.graph = parse_graph(j.at("graph"));
  if (j.contains("exposure")) c.exposure = parse_exposure(j.at("exposure"));
  if (!j.contains("outcomes")) throw std::invalid_argument("config: missing key 'outcomes'");
  c.outcomes = parse_outcomes(j.at("outcomes"));
  if (j.contains("estimand")) {
    const auto& e = j.at("estimand");
    if (e.is_string()) {
      c.estimand = parse_estimand(e.get<std::string>());
    } else {
      allow_keys(e, "estimand", {"marginal"});
      const auto& m = e.at("marginal");
      allow_keys(m, "estimand.marginal", {"form", "phi", "psi"});
      MarginalSpec ms;
      const auto form = get<std::string>(m, "estimand.marginal", "form", "theta_phi");
      if (form == "theta_phi") ms.form = MarginalForm::theta_phi;
      else if (form == "theta_phi_psi") ms.form = MarginalForm::theta_phi_psi;
      else throw std::invalid_argument("estimand.marginal.form: unknown form '" + form + "'");
      if (!m.contains("phi")) throw std::invalid_argument("estimand.marginal: missing key 'phi'");
      ms.phi = parse_design(m.at("phi"), "estimand.marginal.phi");
      if (m.contains("psi")) ms.psi = parse_design(m.at("psi"), "estimand.marginal.psi");
      if (ms.form == MarginalForm::theta_phi_psi && !ms.psi) {
        throw std::invalid_argument("estimand.marginal: theta_phi_psi needs 'psi'");
      }
      c.marginal = ms;
    }
  }
  c.population = parse_population(get<std::string>(j, w, "population", "all"));
  if (!j.contains("strategies") || !j.at("strategies").is_array() || j.at("strategies").empty()) {
    throw std::invalid_argument("config: 'strategies' must be a non-empty array");
  }
  int idx = 0;
  for (const auto& s : j.at("strategies")) {
    const std::string sw = "strategies[" + std::to_string(idx++) + "]";
    allow_keys(s, sw, {"id", "design", "estimators"});
    StrategySpec st;
    st.id = get<std::string>(s, sw, "id", "");
    if (!s.contains("design")) throw std::invalid_argument(sw + ": missing key 'design'");
    st.design = parse_design(s.at("design"), sw + ".design");
    st.estimators = require_key<std::vector<std::string>>(s, sw, "estimators");
    if (st.estimators.empty()) throw std::invalid_argument(sw + ": 'estimators' is empty");
    for (const auto& e : st.estimators) parse_estimator(e);
    c.strategies.push_back(std::move(st));
  }
  c.replicates = get<long>(j, w, "replicates", c.replicates);
  c.seed = get<std::uint64_t>(j, w, "seed", c.seed);
  c.mode = parse_run_mode(get<std::string>(j, w, "mode", "monte_carlo"));
  c.propensity_samples = get<long>(j, w, "propensity_samples", c.propensity_samples);
  c.marginal_samples = get<long>(j, w, "marginal_samples", c.marginal_samples);
  c.support_cap = get<double>(j, w, "support_cap", c.support_cap);
  if (j.contains("gd")) {
    const auto& g = j.at("gd");
    allow_keys(g, "gd", {"aux", "lambda1", "lambda2"});
    c.gd.aux = get<std::string>(g, "gd", "aux", c.gd.aux);
    if (c.gd.aux != "one" && c.gd.aux != "covariate") {
      throw std::invalid_argument("gd.aux: expected 'one' or 'covariate'");
    }
    c.gd.lambda1 = get<double>(g, "gd", "lambda1", c.gd.lambda1);
    c.gd.lambda2 = get<double>(g, "gd", "lambda2", c.gd.lambda2);
  }
  if (c.mode == RunMode::monte_carlo && c.replicates < 1) {
    throw std::invalid_argument("config.replicates: must be at least 1 in monte_carlo mode");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::shared_ptr<const InterferenceGraph> build_graph(const GraphSpec& spec) {
  if (!spec.file.empty()) return std::make_shared<InterferenceGraph>(read_edge_list_file(spec.file));
  if (spec.model) {
    if (spec.n < 1) throw std::invalid_argument("graph.n: must be positive for generated graphs");
    return std::make_shared<InterferenceGraph>(generate_graph(*spec.model, spec.n, spec.seed));
  }
  const auto& s = spec.named;
  if (s == "two_triangles") return std::make_shared<InterferenceGraph>(two_triangles());
  if (spec.n < 1) throw std::invalid_argument("graph.n: must be positive for named graphs");
  if (s == "empty") return std::make_shared<InterferenceGraph>(empty_graph(spec.n));
  if (s == "path") return std::make_shared<InterferenceGraph>(path_graph(spec.n));
  if (s == "cycle") return std::make_shared<InterferenceGraph>(cycle_graph(spec.n));
  if (s == "star") return std::make_shared<InterferenceGraph>(star_graph(spec.n));
  if (s == "complete") return std::make_shared<InterferenceGraph>(complete_graph(spec.n));
  throw std::invalid_argument("graph.named: unknown graph '" + s + "'");
}

PotentialOutcomeTable build_table(const OutcomeSpec& spec, const InterferenceGraph& g, const ExposureModel& model) {
  PotentialOutcomeTable t;
  if (!spec.file.empty()) {
    t = read_table_file(spec.file);
    if (t.units() != g.size()) throw std::invalid_argument("outcome table size differs from the graph");
    for (int i = 0; i < g.size(); ++i) {
      if (t.levels(i) != level_count(model, g, i)) {
        throw std::invalid_argument("outcome table levels of unit " + std::to_string(i) +
                                    " do not match the exposure model");
      }
    }
  } else if (spec.generator) {
    t = generate_params(*spec.generator, g, model, spec.seed);
  } else {
    const auto& l = *spec.linear;
    t = linear_table(model, g, l.alpha, l.beta, l.gamma, l.theta);
  }
  return spec.shift != 0.0 ? t.shifted(spec.shift) : t;
}

Design build_design(const DesignSpec& s, std::shared_ptr<const InterferenceGraph> g, const ExposureModel& model) {
  const int n = g->size();
  if (s.type == "crd") {
    int nt = s.n_treated;
    if (nt == 0 && s.fraction > 0.0) nt = static_cast<int>(std::lround(s.fraction * n));
    return Design::crd(n, nt);
  }
  if (s.type == "bernoulli") return Design::bernoulli(n, s.p);
  if (s.type == "restricted_bernoulli") return Design::restricted_bernoulli(n, s.p);
  if (s.type == "cluster") {
    std::vector<int> part = !s.partition_file.empty() ? read_partition_file(s.partition_file, n)
                                                      : greedy_partition(*g, s.clusters, s.partition_seed);
    return Design::cluster(std::move(part), s.clusters_treated);
  }
  if (s.type == "independent_set") return Design::independent_set(g, s.egos_treated, s.mix_p);
  if (s.type == "rerandomized") {
    if (!s.base) throw std::invalid_argument("rerandomized design needs a 'base' design");
    return Design::rerandomized(build_design(*s.base, g, model), g, model, s.quotas, s.max_tries);
  }
  if (s.type == "point_mass") {
    if (static_cast<int>(s.z.size()) != n) throw std::invalid_argument("point_mass: z must have n entries");
    return Design::point_mass(s.z);
  }
  throw std::invalid_argument("unknown design type: " + s.type);
}

}  // namespace ilab
