#include "ilab/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "ilab/combinatorics.hpp"
#include "ilab/rng.hpp"

namespace ilab {

CellTable::CellTable(std::vector<int> levels, double fill) : levels_(std::move(levels)) {
  offset_.resize(levels_.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    offset_[i] = total;
    total += static_cast<std::size_t>(2 * levels_[i]);
  }
  values_.assign(total, fill);
}

CellTable CellTable::subset(const std::vector<int>& units) const {
  std::vector<int> lv;
  lv.reserve(units.size());
  for (int i : units) lv.push_back(levels_[i]);
  CellTable out(std::move(lv));
  for (std::size_t k = 0; k < units.size(); ++k) {
    auto src = row(units[k]);
    std::copy(src.begin(), src.end(), out.row(static_cast<int>(k)).begin());
  }
  return out;
}

std::string PropensityTable::provenance_text() const {
  switch (provenance) {
    case Provenance::analytic: return "analytic";
    case Provenance::enumerated: return "enumerated";
    case Provenance::monte_carlo: return "monte_carlo(" + std::to_string(samples) + ")";
  }
  return "?";
}

PropensityTable PropensityTable::subset(const std::vector<int>& units) const {
  PropensityTable out;
  static_cast<CellTable&>(out) = CellTable::subset(units);
  out.provenance = provenance;
  out.samples = samples;
  if (se.units()) out.se = se.subset(units);
  out.warnings = warnings;
  return out;
}

JointPropensityTable::JointPropensityTable(std::vector<int> levels) : levels_(std::move(levels)) {
  const std::size_t n = levels_.size();
  pair_offset_.assign(n * n, 0);
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      pair_offset_[i * n + j] = total;
      if (i != j) total += static_cast<std::size_t>(2 * levels_[i]) * (2 * levels_[j]);
    }
  }
  if (total > 100'000'000) throw std::length_error("joint propensity table too large");
  values_.assign(total, 0.0);
}

double JointPropensityTable::operator()(int i, Cell a, int j, Cell b) const {
  if (i == j) throw std::invalid_argument("joint propensity of a unit with itself is undefined");
  const std::size_t n = levels_.size();
  return values_[pair_offset_[static_cast<std::size_t>(i) * n + j] +
                 static_cast<std::size_t>(cell_index(a, levels_[i])) * (2 * levels_[j]) +
                 cell_index(b, levels_[j])];
}

JointPropensityTable JointPropensityTable::subset(const std::vector<int>& units) const {
  std::vector<int> lv;
  for (int i : units) lv.push_back(levels_[i]);
  JointPropensityTable out(lv);
  const int m = static_cast<int>(units.size());
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      const int i = units[a], j = units[b];
      for (int ci = 0; ci < 2 * levels_[i]; ++ci) {
        for (int cj = 0; cj < 2 * levels_[j]; ++cj) {
          const std::size_t n = levels_.size();
          double v = values_[pair_offset_[static_cast<std::size_t>(i) * n + j] +
                             static_cast<std::size_t>(ci) * (2 * levels_[j]) + cj];
          out.add(a, ci, b, cj, v);
        }
      }
    }
  }
  return out;
}

namespace {

bool count_model(const ExposureModel& m) {
  return m.kind == ExposureKind::binary_any || m.kind == ExposureKind::symmetric_count;
}

// Propensity row of a unit with degree d under CRD(n, nt), 0 <= nt <= n.
// Layout matches cell_index: [pi(0,0..K-1), pi(1,0..K-1)].
std::vector<long double> crd_row(ExposureKind kind, long n, long nt, long d) {
  const long nc = n - nt;
  const long double pt = static_cast<long double>(nt) / n;
  const long double pc = static_cast<long double>(nc) / n;
  if (kind == ExposureKind::binary_any) {
    // P(no treated neighbor | z_i = 1) = C(n_c, d) / C(n-1, d)
    const long double none1 = binom_ratio(nc, n - 1, d);
    // P(no treated neighbor | z_i = 0) = C(n_c - 1, d) / C(n-1, d)
    const long double none0 = nc >= 1 ? binom_ratio(nc - 1, n - 1, d) : 0.0L;
    return {pc * none0, pc * (1.0L - none0), pt * none1, pt * (1.0L - none1)};
  }
  std::vector<long double> row(static_cast<std::size_t>(2 * (d + 1)), 0.0L);
  for (long e = 0; e <= d; ++e) {
    row[e] = nc >= 1 ? pc * binom_product_ratio(nt, e, nc - 1, d - e, n - 1) : 0.0L;
    row[d + 1 + e] = nt >= 1 ? pt * binom_product_ratio(nt - 1, e, nc, d - e, n - 1) : 0.0L;
  }
  return row;
}

std::vector<long double> bernoulli_row(ExposureKind kind, long double p, long d) {
  const long double q = 1.0L - p;
  if (kind == ExposureKind::binary_any) {
    const long double none = std::pow(q, static_cast<long double>(d));
    return {q * none, q * (1.0L - none), p * none, p * (1.0L - none)};
  }
  std::vector<long double> row(static_cast<std::size_t>(2 * (d + 1)), 0.0L);
  for (long e = 0; e <= d; ++e) {
    const long double b = binom(d, e) * std::pow(p, static_cast<long double>(e)) *
                          std::pow(q, static_cast<long double>(d - e));
    row[e] = q * b;
    row[d + 1 + e] = p * b;
  }
  return row;
}

void cluster_rows(const Design& d, const InterferenceGraph& g, PropensityTable& t) {
  const long K = d.clusters(), Kt = d.clusters_treated(), Kc = K - Kt;
  const auto& lab = d.cluster_of();
  std::vector<int> extended;
  for (int i = 0; i < g.size(); ++i) {
    const int own = lab[i];
    bool within = false;
    std::vector<int> others;
    for (int j : g.neighbors(i)) {
      if (lab[j] == own) within = true;
      else others.push_back(lab[j]);
    }
    std::sort(others.begin(), others.end());
    others.erase(std::unique(others.begin(), others.end()), others.end());
    const long u = static_cast<long>(others.size()) + 1;  // distinct clusters touching i
    // Probability that the u-1 foreign clusters are all control, given own status.
    long double q_treated = 1.0L, q_control = 1.0L;
    for (long j = 0; j < u - 1; ++j) {
      q_treated *= static_cast<long double>(Kc - j) / (K - 1 - j);
      q_control *= static_cast<long double>(Kc - 1 - j) / (K - 1 - j);
    }
    if (q_treated < 0) q_treated = 0;
    if (q_control < 0) q_control = 0;
    const long double pt = static_cast<long double>(Kt) / K, pc = static_cast<long double>(Kc) / K;
    const long double p10 = within ? 0.0L : pt * q_treated;
    const long double p00 = pc * q_control;
    t.at(i, {0, 0}) = static_cast<double>(p00);
    t.at(i, {0, 1}) = static_cast<double>(pc - p00);
    t.at(i, {1, 0}) = static_cast<double>(p10);
    t.at(i, {1, 1}) = static_cast<double>(pt - p10);
    if (!within) extended.push_back(i);
  }
  if (!extended.empty()) {
    std::ostringstream os;
    os << "cluster propensity: " << extended.size()
       << " unit(s) without a within-cluster neighbor use the exact no-within-neighbor branch "
          "(pi(1,0) = K_t/K * P(foreign clusters all control))";
    t.warnings.push_back(os.str());
  }
}

}  // namespace

bool has_analytic_propensity(const Design& d, const ExposureModel& model) {
  switch (d.kind()) {
    case Design::Kind::crd:
    case Design::Kind::bernoulli: return count_model(model);
    case Design::Kind::cluster: return model.kind == ExposureKind::binary_any;
    default: return false;
  }
}

PropensityTable analytic_propensity(const Design& d, const InterferenceGraph& g,
                                    const ExposureModel& model) {
  if (!has_analytic_propensity(d, model)) {
    throw NoAnalyticFormula("no analytic propensity formula for " + d.describe() + " with " +
                            to_string(model.kind) + " exposure");
  }
  if (d.units() != g.size()) throw std::invalid_argument("design size differs from graph size");
  PropensityTable t(level_counts(model, g), Provenance::analytic);
  if (d.kind() == Design::Kind::cluster) {
    cluster_rows(d, g, t);
    return t;
  }
  for (int i = 0; i < g.size(); ++i) {
    const long deg = g.degree(i);
    auto row = d.kind() == Design::Kind::crd
                   ? crd_row(model.kind, g.size(), d.n_treated(), deg)
                   : bernoulli_row(model.kind, static_cast<long double>(d.p()), deg);
    auto dst = t.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) dst[k] = static_cast<double>(row[k]);
  }
  return t;
}

EnumeratedPropensity enumerated_propensity(const Design& d, const InterferenceGraph& g,
                                           const ExposureModel& model, bool with_joint, double cap) {
  if (d.units() != g.size()) throw std::invalid_argument("design size differs from graph size");
  const auto support = enumerate_support(d, cap);
  const auto levels = level_counts(model, g);
  const int n = g.size();
  EnumeratedPropensity out{PropensityTable(levels, Provenance::enumerated), {}};
  if (with_joint) out.joint = JointPropensityTable(levels);
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (const auto& pt : support) {
    const auto a = expose(model, g, pt.z);
    for (int i = 0; i < n; ++i) {
      idx[i] = cell_index(a[i], levels[i]);
      out.marginal.at(i, a[i]) += pt.probability;
    }
    if (!with_joint) continue;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) out.joint.add(i, idx[i], j, idx[j], pt.probability);
  }
  return out;
}

namespace {

constexpr long kBlock = 4096;

// Calls visit(block, z, a) for every Monte Carlo draw; draws in block b come
// from stream (seed, label, b) so results do not depend on thread count.
template <typename Visit>
void mc_blocks(const Design& d, const InterferenceGraph& g, const ExposureModel& model, long samples,
               std::uint64_t seed, std::string_view label, Visit&& visit) {
  const long blocks = (samples + kBlock - 1) / kBlock;
  const std::uint64_t stream = stream_id(label);
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    Engine eng = make_engine(seed, stream, b);
    const long count = std::min(kBlock, samples - static_cast<long>(b) * kBlock);
    for (long s = 0; s < count; ++s) {
      Treatment z = sample(d, eng);
      visit(b, z, expose(model, g, z));
    }
  });
}

}  // namespace

PropensityTable mc_propensity(const Design& d, const InterferenceGraph& g, const ExposureModel& model,
                              long samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("mc_propensity: samples must be >= 1");
  if (d.units() != g.size()) throw std::invalid_argument("design size differs from graph size");
  const auto levels = level_counts(model, g);
  const long blocks = (samples + kBlock - 1) / kBlock;
  std::vector<CellTable> counts(static_cast<std::size_t>(blocks), CellTable(levels));
  mc_blocks(d, g, model, samples, seed, "mc_propensity",
            [&](std::size_t b, const Treatment&, const ExposureAssignment& a) {
              for (int i = 0; i < g.size(); ++i) counts[b].at(i, a[i]) += 1.0;
            });
  PropensityTable t(levels, Provenance::monte_carlo, samples);
  t.se = CellTable(levels);
  const double S = static_cast<double>(samples);
  for (int i = 0; i < g.size(); ++i) {
    for (int z = 0; z < 2; ++z) {
      for (int e = 0; e < levels[i]; ++e) {
        double c = 0.0;
        for (const auto& blk : counts) c += blk(i, {z, e});
        const double p = c / S;
        t.at(i, {z, e}) = p;
        t.se.at(i, {z, e}) = std::sqrt(p * (1.0 - p) / S);
        if (c == 0.0 && cell_reachable(model, g, i, {z, e})) t.zero_cells.push_back({i, {z, e}});
      }
    }
  }
  if (!t.zero_cells.empty()) {
    t.warnings.push_back(std::to_string(t.zero_cells.size()) +
                         " reachable cell(s) never observed in Monte Carlo");
  }
  return t;
}

JointPropensityTable mc_joint_propensity(const Design& d, const InterferenceGraph& g,
                                         const ExposureModel& model, long samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("mc_joint_propensity: samples must be >= 1");
  const auto levels = level_counts(model, g);
  const int n = g.size();
  JointPropensityTable j(levels);
  std::vector<int> idx(static_cast<std::size_t>(n));
  const double w = 1.0 / static_cast<double>(samples);
  Engine eng = make_engine(seed, stream_id("mc_joint_propensity"));
  for (long s = 0; s < samples; ++s) {
    const Treatment z = sample(d, eng);
    const auto a = expose(model, g, z);
    for (int i = 0; i < n; ++i) idx[i] = cell_index(a[i], levels[i]);
    for (int a1 = 0; a1 < n; ++a1)
      for (int b1 = 0; b1 < n; ++b1)
        if (a1 != b1) j.add(a1, idx[a1], b1, idx[b1], w);
  }
  return j;
}

PropensityTable best_available_propensity(const Design& d, const InterferenceGraph& g,
                                          const ExposureModel& model, long mc_samples,
                                          std::uint64_t seed, double cap) {
  if (has_analytic_propensity(d, model)) return analytic_propensity(d, g, model);
  if (support_size_bound(d) <= cap) {
    try {
      return enumerated_propensity(d, g, model, false, cap).marginal;
    } catch (const SupportTooLarge&) {
    }
  }
  return mc_propensity(d, g, model, mc_samples, seed);
}

bool has_closed_form_weights(const Design& d, const ExposureModel& model, WeightDenominator kind) {
  if (kind != WeightDenominator::by_treatment || !count_model(model)) return false;
  return d.kind() == Design::Kind::crd || d.kind() == Design::Kind::bernoulli ||
         d.kind() == Design::Kind::restricted_bernoulli;
}

CellTable weighted_exposure_probs(const Design& d, const InterferenceGraph& g,
                                  const ExposureModel& model, WeightDenominator kind, double cap) {
  if (d.units() != g.size()) throw std::invalid_argument("design size differs from graph size");
  const int n = g.size();
  const auto levels = level_counts(model, g);
  CellTable out(levels);

  if (has_closed_form_weights(d, model, kind)) {
    // Conditional on K = k treated units these designs are CRD(k), so
    // alpha_i(z,e) = sum_k P(K=k) pi_i^{CRD(k)}(z,e) / n_z(k).
    std::vector<std::pair<long, long double>> mix;
    if (d.kind() == Design::Kind::crd) {
      mix.emplace_back(d.n_treated(), 1.0L);
    } else {
      const bool restricted = d.kind() == Design::Kind::restricted_bernoulli;
      const long double p = d.p();
      long double norm = 1.0L;
      if (restricted) norm = 1.0L - std::pow(p, n) - std::pow(1.0L - p, n);
      for (long k = restricted ? 1 : 0; k <= (restricted ? n - 1 : n); ++k) {
        mix.emplace_back(k, binom(n, k) * std::pow(p, k) * std::pow(1.0L - p, n - k) / norm);
      }
    }
    for (int i = 0; i < n; ++i) {
      std::vector<long double> acc(static_cast<std::size_t>(2 * levels[i]), 0.0L);
      for (auto [k, pk] : mix) {
        auto row = crd_row(model.kind, n, k, g.degree(i));
        for (int e = 0; e < levels[i]; ++e) {
          if (k < n) acc[e] += pk * row[e] / (n - k);
          if (k > 0) acc[levels[i] + e] += pk * row[levels[i] + e] / k;
        }
      }
      auto dst = out.row(i);
      for (std::size_t c = 0; c < acc.size(); ++c) dst[c] = static_cast<double>(acc[c]);
    }
    return out;
  }

  const auto support = enumerate_support(d, cap);
  int max_levels = 1;
  for (int k : levels) max_levels = std::max(max_levels, k);
  std::vector<int> cell_count(static_cast<std::size_t>(2 * max_levels));
  for (const auto& pt : support) {
    const auto a = expose(model, g, pt.z);
    int treated = 0;
    std::fill(cell_count.begin(), cell_count.end(), 0);
    for (int i = 0; i < n; ++i) {
      treated += a[i].z;
      ++cell_count[cell_index(a[i], max_levels)];
    }
    for (int i = 0; i < n; ++i) {
      const int denom = kind == WeightDenominator::by_cell ? cell_count[cell_index(a[i], max_levels)]
                                                           : (a[i].z ? treated : n - treated);
      out.at(i, a[i]) += pt.probability / denom;
    }
  }
  return out;
}

void write_propensity_csv(const PropensityTable& pi, std::ostream& out) {
  out << "unit,z,e,pi,provenance,se\n";
  const std::string prov = pi.provenance_text();
  out << std::setprecision(17);
  for (int i = 0; i < pi.units(); ++i) {
    for (int z = 0; z < 2; ++z) {
      for (int e = 0; e < pi.levels(i); ++e) {
        out << i << ',' << z << ',' << e << ',' << pi(i, {z, e}) << ',' << prov << ','
            << pi.standard_error(i, {z, e}) << '\n';
      }
    }
  }
}

}  // namespace ilab
