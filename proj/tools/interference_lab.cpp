#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "ilab/analytic.hpp"
#include "ilab/harness.hpp"

using namespace ilab;
using json = nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Inline JSON when the argument starts with '{' or '"', else a file path.
std::string json_arg(const std::string& arg) {
  const auto p = arg.find_first_not_of(" \t\n");
  if (p != std::string::npos && (arg[p] == '{' || arg[p] == '"')) return arg;
  return slurp(arg);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_row(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& cols) {
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k].first;
  out << "\n";
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k].second;
  out << "\n";
}

std::vector<double> per_unit(const json& j, const char* key, int n, double fallback) {
  if (!j.contains(key)) return std::vector<double>(n, fallback);
  const auto& v = j.at(key);
  if (v.is_number()) return std::vector<double>(n, v.get<double>());
  auto out = v.get<std::vector<double>>();
  if (static_cast<int>(out.size()) != n) throw std::invalid_argument(std::string(key) + ": expected " + std::to_string(n) + " values");
  return out;
}

struct AnalyticInputs {
  std::shared_ptr<const InterferenceGraph> g;
  json params;
  ExposureModel model;
};

Design design_from(const AnalyticInputs& in) {
  if (!in.params.contains("design")) throw std::invalid_argument("params: missing key 'design'");
  return build_design(parse_design_spec(in.params.at("design").dump()), in.g, in.model);
}

PotentialOutcomeTable table_from(const AnalyticInputs& in) {
  if (!in.params.contains("outcomes")) throw std::invalid_argument("params: missing key 'outcomes'");
  return build_table(parse_outcome_spec(in.params.at("outcomes").dump()), *in.g, in.model);
}

Estimand estimand_from(const json& p) {
  return parse_estimand(p.value("estimand", std::string("DTE")));
}

void run_analytic(const std::string& formula, const AnalyticInputs& in, std::ostream& out) {
  const auto& p = in.params;
  const auto& g = *in.g;
  if (formula == "bias_naive_general") {
    auto t = table_from(in);
    auto r = bias_naive_general(t, design_from(in), g, in.model, estimand_from(p), p.value("with_oracle", true),
                                p.value("support_cap", kDefaultSupportCap));
    write_row(out, {{"formula", formula},
                    {"value", fmt(r.analytic_value)},
                    {"oracle", r.oracle_value ? fmt(*r.oracle_value) : ""},
                    {"A", fmt(r.term("A"))},
                    {"B", fmt(r.term("B"))},
                    {"C", fmt(r.term("C"))}});
  } else if (formula == "bias_linear") {
    write_row(out, {{"formula", formula}, {"value", fmt(bias_linear(g, p.value("gamma", 0.0)))}});
  } else if (formula == "bias_binary") {
    const auto d = design_from(in);
    const auto gamma = per_unit(p, "gamma", g.size(), 0.0);
    const auto theta = per_unit(p, "theta", g.size(), 0.0);
    std::vector<std::pair<std::string, std::string>> cols;
    cols.emplace_back("formula", formula);
    cols.emplace_back("value", fmt(bias_binary(d, g, gamma, theta)));
    if (d.kind() == Design::Kind::bernoulli) {
      cols.emplace_back("exact", fmt(bias_binary_bernoulli_exact(d.p(), g, gamma, theta)));
    }
    write_row(out, cols);
  } else if (formula == "bias_cluster_linear") {
    auto t = table_from(in);
    auto r = bias_cluster_linear(design_from(in), g, t, p.value("mc_budget", 100000L), p.value("seed", std::uint64_t{1}),
                                 p.value("support_cap", kDefaultSupportCap));
    write_row(out, {{"formula", formula},
                    {"value", fmt(r.analytic_value)},
                    {"oracle", r.oracle_value ? fmt(*r.oracle_value) : ""},
                    {"gamma", fmt(r.term("gamma"))},
                    {"beta", fmt(r.term("beta"))},
                    {"alpha", fmt(r.term("alpha"))}});
  } else if (formula == "var_ht") {
    auto t = table_from(in);
    const auto d = design_from(in);
    auto e = enumerated_propensity(d, g, in.model, true, p.value("support_cap", kDefaultSupportCap));
    const auto uc = resolve(contrast_for(estimand_from(p)), in.model, g);
    write_row(out, {{"formula", formula}, {"value", fmt(var_ht(t, uc, e.marginal, e.joint))}});
  } else if (formula == "var_naive_linear_crd") {
    auto r = var_naive_linear_crd(g, p.at("n_treated").get<int>(), p.value("gamma", 0.0), p.value("sigma2", 0.0));
    write_row(out, {{"formula", formula},
                    {"value", fmt(r.value)},
                    {"assembled", fmt(r.assembled)},
                    {"c1", fmt(r.c1)},
                    {"c2", fmt(r.c2)},
                    {"c3", fmt(r.c3)},
                    {"c4", fmt(r.c4)}});
  } else if (formula == "var_naive_binary") {
    auto t = table_from(in);
    const auto src = p.value("moments", std::string("enumerate"));
    MomentSource ms;
    if (src == "enumerate") ms = MomentSource::enumerate;
    else if (src == "monte_carlo" || src == "mc") ms = MomentSource::monte_carlo;
    else throw std::invalid_argument("params.moments: expected enumerate or monte_carlo");
    auto r = var_naive_binary(g, design_from(in), t, ms, p.value("samples", 200000L), p.value("seed", std::uint64_t{1}),
                              p.value("support_cap", kDefaultSupportCap));
    write_row(out, {{"formula", formula},
                    {"value", fmt(r.value)},
                    {"printed_value", fmt(r.printed_value)},
                    {"oracle", r.oracle_value ? fmt(*r.oracle_value) : ""},
                    {"exact_moments", r.exact_moments ? "1" : "0"}});
  } else {
    throw std::invalid_argument("unknown formula: " + formula);
  }
}

void report(const RunResult& r) {
  for (const auto& s : r.skipped) std::cerr << "skipped " << s.strategy << " / " << s.estimator << ": " << s.reason << "\n";
  for (const auto& d : r.diagnostics) std::cerr << "note: " << d << "\n";
}

int emit(const RunResult& r, const std::string& format, const std::string& path) {
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!path.empty()) {
    file.open(path);
    if (!file) throw std::runtime_error("cannot write " + path);
    out = &file;
  }
  if (format == "json") emit_json(r, *out);
  else emit_csv(r, *out);
  report(r);
  return r.results.empty() ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interference-lab: designs and estimators under network interference"};
  app.require_subcommand(1);

  std::string config, format = "csv", out_path;
  long replicates = 0;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a config (Monte Carlo unless the config says exact)");
  auto* exact_cmd = app.add_subcommand("exact", "Run a config by exact support enumeration");
  for (auto* c : {run_cmd, exact_cmd}) {
    c->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    c->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    c->add_option("--out", out_path, "output file (default stdout)");
  }
  run_cmd->add_option("--replicates", replicates, "override replicate count");
  run_cmd->add_option("--seed", seed, "override master seed");

  std::string graph_file, design_arg, exposure = "binary_any", method = "auto", table_arg;
  long samples = 200000;
  std::uint64_t pseed = 1;
  auto* prop_cmd = app.add_subcommand("propensity", "Propensity table for a design and exposure model");
  prop_cmd->add_option("--graph", graph_file, "edge-list file")->required()->check(CLI::ExistingFile);
  prop_cmd->add_option("--design", design_arg, "design JSON (inline or file)")->required();
  prop_cmd->add_option("--exposure", exposure, "binary_any, symmetric_count or general_pattern");
  prop_cmd->add_option("--method", method, "auto, analytic, enumerate or mc")
      ->check(CLI::IsMember({"auto", "analytic", "enumerate", "mc"}));
  prop_cmd->add_option("--samples", samples, "Monte Carlo draws");
  prop_cmd->add_option("--seed", pseed, "Monte Carlo seed");
  prop_cmd->add_option("--out", out_path, "output file (default stdout)");

  std::string formula, params_arg;
  auto* an_cmd = app.add_subcommand("analytic", "Evaluate a closed-form bias or variance expression");
  an_cmd->add_option("formula", formula, "formula name")
      ->required()
      ->check(CLI::IsMember({"bias_naive_general", "bias_linear", "bias_binary", "bias_cluster_linear", "var_ht",
                             "var_naive_linear_crd", "var_naive_binary"}));
  an_cmd->add_option("--graph", graph_file, "edge-list file")->required()->check(CLI::ExistingFile);
  an_cmd->add_option("--params", params_arg, "parameter JSON (inline or file)")->required();

  std::string gmodel = "erdos_renyi";
  int n = 0, min_degree = 1, nbhd = 4;
  double gp = 0.01, attract = 0.1, rewire = 0.05;
  auto* gg_cmd = app.add_subcommand("generate-graph", "Write a random graph as an edge list");
  gg_cmd->add_option("--model", gmodel)->check(CLI::IsMember({"erdos_renyi", "barabasi_albert", "small_world"}));
  gg_cmd->add_option("--n", n)->required();
  gg_cmd->add_option("--p", gp, "edge probability (erdos_renyi)");
  gg_cmd->add_option("--min-degree", min_degree, "barabasi_albert");
  gg_cmd->add_option("--attractiveness", attract, "barabasi_albert");
  gg_cmd->add_option("--neighborhood-size", nbhd, "small_world");
  gg_cmd->add_option("--rewire-p", rewire, "small_world");
  gg_cmd->add_option("--seed", pseed);
  gg_cmd->add_option("--out", out_path);

  std::string generator = "uncorrelated";
  auto* go_cmd = app.add_subcommand("generate-outcomes", "Write a random potential-outcome table");
  go_cmd->add_option("--graph", graph_file)->required()->check(CLI::ExistingFile);
  go_cmd->add_option("--exposure", exposure);
  go_cmd->add_option("--generator", generator)->check(CLI::IsMember({"uncorrelated", "correlated"}));
  go_cmd->add_option("--seed", pseed);
  go_cmd->add_option("--out", out_path);

  int clusters = 0;
  auto* part_cmd = app.add_subcommand("partition", "Greedy graph partition into clusters");
  part_cmd->add_option("--graph", graph_file)->required()->check(CLI::ExistingFile);
  part_cmd->add_option("--clusters", clusters)->required();
  part_cmd->add_option("--seed", pseed);
  part_cmd->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  try {
    std::ofstream file;
    auto out = [&]() -> std::ostream& {
      if (out_path.empty()) return std::cout;
      file.open(out_path);
      if (!file) throw std::runtime_error("cannot write " + out_path);
      return file;
    };

    if (run_cmd->parsed() || exact_cmd->parsed()) {
      auto cfg = load_config(config);
      if (exact_cmd->parsed()) cfg.mode = RunMode::exact;
      if (run_cmd->count("--replicates")) cfg.replicates = replicates;
      if (run_cmd->count("--seed")) cfg.seed = seed;
      return emit(run(cfg), format, out_path);
    }
    if (prop_cmd->parsed()) {
      auto g = std::make_shared<const InterferenceGraph>(read_edge_list_file(graph_file));
      const auto model = parse_exposure_spec(json(exposure).dump());
      const auto d = build_design(parse_design_spec(json_arg(design_arg)), g, model);
      PropensityTable pi;
      if (method == "analytic") pi = analytic_propensity(d, *g, model);
      else if (method == "enumerate") pi = enumerated_propensity(d, *g, model, false).marginal;
      else if (method == "mc") pi = mc_propensity(d, *g, model, samples, pseed);
      else pi = best_available_propensity(d, *g, model, samples, pseed);
      write_propensity_csv(pi, out());
      for (const auto& w : pi.warnings) std::cerr << "warning: " << w << "\n";
      return 0;
    }
    if (an_cmd->parsed()) {
      AnalyticInputs in;
      in.g = std::make_shared<const InterferenceGraph>(read_edge_list_file(graph_file));
      in.params = json::parse(json_arg(params_arg));
      const char* fallback = formula == "bias_cluster_linear" ? "symmetric_count" : "binary_any";
      in.model = parse_exposure_spec(in.params.contains("exposure") ? in.params.at("exposure").dump()
                                                                     : json(fallback).dump());
      run_analytic(formula, in, std::cout);
      return 0;
    }
    if (gg_cmd->parsed()) {
      GraphModel m;
      if (gmodel == "erdos_renyi") m = ErdosRenyi{gp};
      else if (gmodel == "barabasi_albert") m = BarabasiAlbert{min_degree, attract};
      else m = SmallWorld{nbhd, rewire};
      write_edge_list(generate_graph(m, n, pseed), out());
      return 0;
    }
    if (go_cmd->parsed()) {
      const auto g = read_edge_list_file(graph_file);
      const auto model = parse_exposure_spec(json(exposure).dump());
      write_table(generate_params(parse_outcome_generator(generator), g, model, pseed), out());
      return 0;
    }
    if (part_cmd->parsed()) {
      const auto g = read_edge_list_file(graph_file);
      write_partition(greedy_partition(g, clusters, pseed), out());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
