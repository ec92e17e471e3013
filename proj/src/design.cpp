#include "ilab/design.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "ilab/combinatorics.hpp"
#include "ilab/propensity.hpp"

namespace ilab {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Chooses k distinct indices from [0, n) uniformly (partial Fisher-Yates).
std::vector<int> choose_indices(int n, int k, Engine& eng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < k; ++j) {
    int r = j + static_cast<int>(uniform_index(eng, static_cast<std::size_t>(n - j)));
    std::swap(idx[j], idx[r]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

// Calls f(mask) for every k-subset of [0, n), mask[i] in {0,1}.
template <typename F>
void for_each_subset(int n, int k, F&& f) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
  std::fill(mask.begin(), mask.begin() + k, 1);
  do {
    f(mask);
  } while (std::prev_permutation(mask.begin(), mask.end()));
}

bool quotas_met(const Design& d, const Treatment& z) {
  const auto& g = d.graph();
  const auto a = expose(d.quota_model(), g, z);
  for (const auto& q : d.quotas()) {
    int count = 0;
    for (int i = 0; i < g.size(); ++i) {
      Cell c;
      try {
        c = resolve_cell(d.quota_model(), g, i, q.cell);
      } catch (const std::domain_error&) {
        continue;
      }
      if (a[i] == c) ++count;
    }
    if (count < q.min_count) return false;
  }
  return true;
}

std::string quota_text(const std::vector<CellQuota>& quotas) {
  std::ostringstream os;
  for (std::size_t k = 0; k < quotas.size(); ++k) {
    if (k) os << ',';
    os << '(' << quotas[k].cell.z << ','
       << (quotas[k].cell.e == kExposed ? std::string("exposed") : std::to_string(quotas[k].cell.e))
       << ")>=" << quotas[k].min_count;
  }
  return os.str();
}

}  // namespace

Design Design::crd(int n, int n_treated) {
  require(n_treated > 0 && n_treated < n, "crd: need 0 < n_treated < n");
  Design d;
  d.kind_ = Kind::crd;
  d.n_ = n;
  d.n_treated_ = n_treated;
  return d;
}

Design Design::bernoulli(int n, double p) {
  require(n >= 1, "bernoulli: need n >= 1");
  require(p > 0.0 && p < 1.0, "bernoulli: need 0 < p < 1");
  Design d;
  d.kind_ = Kind::bernoulli;
  d.n_ = n;
  d.p_ = p;
  return d;
}

Design Design::restricted_bernoulli(int n, double p) {
  require(n >= 2, "restricted_bernoulli: need n >= 2");
  require(p > 0.0 && p < 1.0, "restricted_bernoulli: need 0 < p < 1");
  Design d;
  d.kind_ = Kind::restricted_bernoulli;
  d.n_ = n;
  d.p_ = p;
  return d;
}

Design Design::cluster(std::vector<int> cluster_of, int clusters_treated) {
  require(!cluster_of.empty(), "cluster: empty partition");
  int K = 0;
  for (int c : cluster_of) {
    require(c >= 0, "cluster: negative cluster label");
    K = std::max(K, c + 1);
  }
  std::vector<int> sizes(static_cast<std::size_t>(K), 0);
  for (int c : cluster_of) ++sizes[c];
  for (int k = 0; k < K; ++k) {
    require(sizes[k] > 0, "cluster: label " + std::to_string(k) + " has no units");
  }
  require(clusters_treated > 0 && clusters_treated < K, "cluster: need 0 < K_t < K");
  Design d;
  d.kind_ = Kind::cluster;
  d.n_ = static_cast<int>(cluster_of.size());
  d.cluster_of_ = std::move(cluster_of);
  d.clusters_ = K;
  d.clusters_treated_ = clusters_treated;
  return d;
}

Design Design::independent_set(std::shared_ptr<const InterferenceGraph> g, int egos_treated,
                               double mix_p) {
  require(g != nullptr, "independent_set: graph required");
  require(egos_treated >= 1, "independent_set: need egos_treated >= 1");
  require(mix_p >= 0.0 && mix_p <= 1.0, "independent_set: mix_p must lie in [0,1]");
  Design d;
  d.kind_ = Kind::independent_set;
  d.n_ = g->size();
  d.graph_ = std::move(g);
  d.egos_treated_ = egos_treated;
  d.mix_p_ = mix_p;
  return d;
}

Design Design::rerandomized(const Design& base, std::shared_ptr<const InterferenceGraph> g,
                            ExposureModel model, std::vector<CellQuota> quotas, long max_tries) {
  require(g != nullptr, "rerandomized: graph required");
  require(g->size() == base.units(), "rerandomized: graph size differs from base design");
  require(max_tries >= 1, "rerandomized: max_tries must be >= 1");
  Design d;
  d.kind_ = Kind::rerandomized;
  d.n_ = base.units();
  d.base_ = std::make_shared<const Design>(base);
  d.graph_ = std::move(g);
  d.model_ = model;
  d.quotas_ = std::move(quotas);
  d.max_tries_ = max_tries;
  return d;
}

Design Design::discrete(int n, std::vector<SupportPoint> support) {
  require(!support.empty(), "discrete: empty support");
  double total = 0.0;
  std::vector<SupportPoint> kept;
  for (auto& s : support) {
    require(static_cast<int>(s.z.size()) == n, "discrete: treatment length differs from n");
    require(s.probability >= 0.0, "discrete: negative probability");
    for (auto v : s.z) require(v <= 1, "discrete: treatments must be 0/1");
    total += s.probability;
    if (s.probability > 0.0) kept.push_back(std::move(s));
  }
  require(std::abs(total - 1.0) <= 1e-9, "discrete: probabilities must sum to 1");
  Design d;
  d.kind_ = Kind::discrete;
  d.n_ = n;
  d.support_ = std::move(kept);
  return d;
}

Design Design::point_mass(Treatment z) {
  const int n = static_cast<int>(z.size());
  return discrete(n, {{std::move(z), 1.0}});
}

std::string Design::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::crd: os << "crd(n_t=" << n_treated_ << ")"; break;
    case Kind::bernoulli: os << "bernoulli(p=" << p_ << ")"; break;
    case Kind::restricted_bernoulli: os << "restricted_bernoulli(p=" << p_ << ")"; break;
    case Kind::cluster: os << "cluster(K=" << clusters_ << ",K_t=" << clusters_treated_ << ")"; break;
    case Kind::independent_set:
      os << "independent_set(k_t=" << egos_treated_ << ",mix_p=" << mix_p_ << ")";
      break;
    case Kind::rerandomized: os << "rerandomized(" << base_->describe() << ";" << quota_text(quotas_) << ")"; break;
    case Kind::discrete: os << "discrete(points=" << support_.size() << ")"; break;
  }
  return os.str();
}

EgoSplit greedy_independent_set(const InterferenceGraph& g, Engine& eng, double mix_p) {
  const int n = g.size();
  std::vector<char> alive(static_cast<std::size_t>(n), 1);
  std::vector<int> deg = g.degrees();
  std::vector<int> remaining(static_cast<std::size_t>(n));
  std::vector<int> pos(static_cast<std::size_t>(n));
  std::iota(remaining.begin(), remaining.end(), 0);
  std::iota(pos.begin(), pos.end(), 0);
  EgoSplit out;

  auto remove = [&](int v) {
    alive[v] = 0;
    int p = pos[v];
    int last = remaining.back();
    remaining[p] = last;
    pos[last] = p;
    remaining.pop_back();
    for (int w : g.neighbors(v))
      if (alive[w]) --deg[w];
  };

  std::vector<int> ties;
  while (!remaining.empty()) {
    bool random_pick = mix_p >= 1.0 || (mix_p > 0.0 && uniform01(eng) < mix_p);
    int pick;
    if (random_pick) {
      pick = remaining[uniform_index(eng, remaining.size())];
    } else {
      int best = n + 1;
      ties.clear();
      for (int v : remaining) {
        if (deg[v] < best) {
          best = deg[v];
          ties.clear();
        }
        if (deg[v] == best) ties.push_back(v);
      }
      std::sort(ties.begin(), ties.end());
      pick = ties[uniform_index(eng, ties.size())];
    }
    out.egos.push_back(pick);
    std::vector<int> drop;
    for (int w : g.neighbors(pick))
      if (alive[w]) drop.push_back(w);
    remove(pick);
    for (int w : drop) remove(w);
  }
  std::sort(out.egos.begin(), out.egos.end());
  std::vector<char> is_ego(static_cast<std::size_t>(n), 0);
  for (int e : out.egos) is_ego[e] = 1;
  for (int i = 0; i < n; ++i)
    if (!is_ego[i]) out.alters.push_back(i);
  return out;
}

EgoSplit greedy_independent_set(const InterferenceGraph& g, std::uint64_t seed, double mix_p) {
  Engine eng = make_engine(seed, stream_id("independent_set"));
  return greedy_independent_set(g, eng, mix_p);
}

std::vector<EgoSetProbability> ego_set_distribution(const InterferenceGraph& g, double mix_p) {
  const int n = g.size();
  if (n > 40) throw SupportTooLarge("ego_set_distribution: graph too large to enumerate");
  using Mask = std::uint64_t;
  std::vector<Mask> closed(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    closed[i] = Mask{1} << i;
    for (int j : g.neighbors(i)) closed[i] |= Mask{1} << j;
  }
  using Dist = std::map<Mask, double>;
  std::unordered_map<Mask, Dist> memo;

  auto solve = [&](auto&& self, Mask rem) -> const Dist& {
    auto it = memo.find(rem);
    if (it != memo.end()) return it->second;
    Dist out;
    if (rem == 0) {
      out[0] = 1.0;
      return memo.emplace(rem, std::move(out)).first->second;
    }
    const int r = std::popcount(rem);
    std::vector<double> weight(static_cast<std::size_t>(n), 0.0);
    int best = n + 1;
    std::vector<int> ties;
    for (int v = 0; v < n; ++v) {
      if (!(rem >> v & 1)) continue;
      weight[v] += mix_p / r;
      int d = std::popcount(closed[v] & rem) - 1;
      if (d < best) {
        best = d;
        ties.clear();
      }
      if (d == best) ties.push_back(v);
    }
    for (int v : ties) weight[v] += (1.0 - mix_p) / static_cast<double>(ties.size());
    for (int v = 0; v < n; ++v) {
      if (weight[v] <= 0.0) continue;
      const Dist& sub = self(self, rem & ~closed[v]);
      for (const auto& [egos, p] : sub) out[egos | (Mask{1} << v)] += weight[v] * p;
    }
    return memo.emplace(rem, std::move(out)).first->second;
  };

  const Mask all = n == 64 ? ~Mask{0} : ((Mask{1} << n) - 1);
  const Dist& dist = solve(solve, all);
  std::vector<EgoSetProbability> out;
  for (const auto& [mask, p] : dist) {
    if (p <= 0.0) continue;
    EgoSetProbability e;
    for (int v = 0; v < n; ++v)
      if (mask >> v & 1) e.egos.push_back(v);
    e.probability = p;
    out.push_back(std::move(e));
  }
  return out;
}

EgoDraw sample_with_egos(const Design& d, Engine& eng) {
  require(d.kind() == Design::Kind::independent_set, "sample_with_egos: not an independent-set design");
  const int n = d.units();
  EgoDraw out{Treatment(static_cast<std::size_t>(n), 0), std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0)};
  EgoSplit split = greedy_independent_set(d.graph(), eng, d.mix_p());
  const int k = static_cast<int>(split.egos.size());
  const int kt = std::min(d.egos_treated(), k);
  for (int e : split.egos) out.ego[e] = 1;
  for (int idx : choose_indices(k, kt, eng)) out.z[split.egos[idx]] = 1;
  return out;
}

std::vector<EgoSupportPoint> enumerate_ego_support(const Design& d, double cap) {
  require(d.kind() == Design::Kind::independent_set, "enumerate_ego_support: not an independent-set design");
  const int n = d.units();
  if (support_size_bound(d) > cap * (1.0 + 1e-9)) {
    throw SupportTooLarge("ego support of " + d.describe() + " exceeds the enumeration cap");
  }
  std::vector<EgoSupportPoint> out;
  for (const auto& es : ego_set_distribution(d.graph(), d.mix_p())) {
    const int k = static_cast<int>(es.egos.size());
    const int kt = std::min(d.egos_treated(), k);
    const double p = es.probability / static_cast<double>(binom(k, kt));
    std::vector<std::uint8_t> ego(static_cast<std::size_t>(n), 0);
    for (int e : es.egos) ego[e] = 1;
    for_each_subset(k, kt, [&](const Treatment& sub) {
      Treatment z(static_cast<std::size_t>(n), 0);
      for (int j = 0; j < k; ++j) z[es.egos[j]] = sub[j];
      out.push_back({{z, ego}, p});
    });
  }
  return out;
}

EgoPropensity ego_propensity(const Design& d, long samples, std::uint64_t seed) {
  require(d.kind() == Design::Kind::independent_set, "ego_propensity: not an independent-set design");
  const int n = d.units();
  EgoPropensity out;
  out.treated.assign(static_cast<std::size_t>(n), 0.0);
  out.control.assign(static_cast<std::size_t>(n), 0.0);
  auto add = [&](const std::vector<int>& egos, double w) {
    const int k = static_cast<int>(egos.size());
    const double pt = static_cast<double>(std::min(d.egos_treated(), k)) / k;
    for (int e : egos) {
      out.treated[e] += w * pt;
      out.control[e] += w * (1.0 - pt);
    }
  };
  if (n <= kMaxExactEgoUnits) {
    for (const auto& es : ego_set_distribution(d.graph(), d.mix_p())) add(es.egos, es.probability);
    return out;
  }
  require(samples >= 1, "ego_propensity: Monte Carlo needs samples >= 1");
  out.exact = false;
  out.samples = samples;
  Engine eng = make_engine(seed, stream_id("ego_propensity"));
  const double w = 1.0 / static_cast<double>(samples);
  for (long s = 0; s < samples; ++s) add(greedy_independent_set(d.graph(), eng, d.mix_p()).egos, w);
  return out;
}

Treatment sample(const Design& d, Engine& eng) {
  const int n = d.units();
  Treatment z(static_cast<std::size_t>(n), 0);
  switch (d.kind()) {
    case Design::Kind::crd:
      for (int i : choose_indices(n, d.n_treated(), eng)) z[i] = 1;
      return z;
    case Design::Kind::bernoulli:
      for (int i = 0; i < n; ++i) z[i] = uniform01(eng) < d.p() ? 1 : 0;
      return z;
    case Design::Kind::restricted_bernoulli:
      for (;;) {
        int count = 0;
        for (int i = 0; i < n; ++i) {
          z[i] = uniform01(eng) < d.p() ? 1 : 0;
          count += z[i];
        }
        if (count > 0 && count < n) return z;
      }
    case Design::Kind::cluster: {
      std::vector<std::uint8_t> treated(static_cast<std::size_t>(d.clusters()), 0);
      for (int c : choose_indices(d.clusters(), d.clusters_treated(), eng)) treated[c] = 1;
      for (int i = 0; i < n; ++i) z[i] = treated[d.cluster_of()[i]];
      return z;
    }
    case Design::Kind::independent_set:
      return sample_with_egos(d, eng).z;
    case Design::Kind::rerandomized: {
      for (long t = 0; t < d.max_tries(); ++t) {
        z = sample(d.base(), eng);
        if (quotas_met(d, z)) return z;
      }
      throw RerandomizationFailure("rerandomized design: no draw met " + quota_text(d.quotas()) +
                                       " in " + std::to_string(d.max_tries()) +
                                       " tries (acceptance rate 0/" + std::to_string(d.max_tries()) + ")",
                                   d.max_tries());
    }
    case Design::Kind::discrete: {
      double u = uniform01(eng);
      const auto& s = d.explicit_support();
      for (const auto& pt : s) {
        u -= pt.probability;
        if (u < 0.0) return pt.z;
      }
      return s.back().z;
    }
  }
  return z;
}

double support_size_bound(const Design& d) {
  switch (d.kind()) {
    case Design::Kind::crd: return subset_count(d.units(), d.n_treated());
    case Design::Kind::bernoulli:
    case Design::Kind::restricted_bernoulli:
    case Design::Kind::independent_set: return std::ldexp(1.0, d.units());
    case Design::Kind::cluster: return subset_count(d.clusters(), d.clusters_treated());
    case Design::Kind::rerandomized: return support_size_bound(d.base());
    case Design::Kind::discrete: return static_cast<double>(d.explicit_support().size());
  }
  return 0.0;
}

std::vector<SupportPoint> enumerate_support(const Design& d, double cap) {
  const double bound = support_size_bound(d);
  if (bound > cap * (1.0 + 1e-9)) {
    throw SupportTooLarge("support of " + d.describe() + " has up to " + std::to_string(bound) +
                          " points (cap " + std::to_string(cap) + "); use Monte Carlo");
  }
  const int n = d.units();
  std::map<Treatment, double> acc;
  switch (d.kind()) {
    case Design::Kind::crd: {
      const double p = 1.0 / static_cast<double>(binom(n, d.n_treated()));
      for_each_subset(n, d.n_treated(), [&](const Treatment& z) { acc[z] += p; });
      break;
    }
    case Design::Kind::bernoulli:
    case Design::Kind::restricted_bernoulli: {
      const bool restricted = d.kind() == Design::Kind::restricted_bernoulli;
      const double norm = restricted ? 1.0 - std::pow(d.p(), n) - std::pow(1.0 - d.p(), n) : 1.0;
      for (int k = restricted ? 1 : 0; k <= (restricted ? n - 1 : n); ++k) {
        const double p = std::pow(d.p(), k) * std::pow(1.0 - d.p(), n - k) / norm;
        for_each_subset(n, k, [&](const Treatment& z) { acc[z] += p; });
      }
      break;
    }
    case Design::Kind::cluster: {
      const double p = 1.0 / static_cast<double>(binom(d.clusters(), d.clusters_treated()));
      for_each_subset(d.clusters(), d.clusters_treated(), [&](const Treatment& tc) {
        Treatment z(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) z[i] = tc[d.cluster_of()[i]];
        acc[z] += p;
      });
      break;
    }
    case Design::Kind::independent_set: {
      for (const auto& es : ego_set_distribution(d.graph(), d.mix_p())) {
        const int k = static_cast<int>(es.egos.size());
        const int kt = std::min(d.egos_treated(), k);
        const double p = es.probability / static_cast<double>(binom(k, kt));
        for_each_subset(k, kt, [&](const Treatment& sub) {
          Treatment z(static_cast<std::size_t>(n), 0);
          for (int j = 0; j < k; ++j) z[es.egos[j]] = sub[j];
          acc[z] += p;
        });
      }
      break;
    }
    case Design::Kind::rerandomized: {
      double kept = 0.0;
      for (auto& pt : enumerate_support(d.base(), cap)) {
        if (!quotas_met(d, pt.z)) continue;
        kept += pt.probability;
        acc[pt.z] += pt.probability;
      }
      if (acc.empty()) {
        throw RerandomizationFailure("rerandomized design: no support point meets " +
                                         quota_text(d.quotas()) + " (acceptance probability 0)",
                                     0);
      }
      for (auto& [z, p] : acc) p /= kept;
      break;
    }
    case Design::Kind::discrete:
      for (const auto& pt : d.explicit_support()) acc[pt.z] += pt.probability;
      break;
  }
  if (static_cast<double>(acc.size()) > cap) {
    throw SupportTooLarge("support of " + d.describe() + " exceeds the enumeration cap");
  }
  std::vector<SupportPoint> out;
  out.reserve(acc.size());
  for (auto& [z, p] : acc)
    if (p > 0.0) out.push_back({z, p});
  return out;
}

std::vector<int> greedy_partition(const InterferenceGraph& g, int K, std::uint64_t seed) {
  const int n = g.size();
  if (K < 1) throw std::invalid_argument("greedy_partition: K must be >= 1");
  if (K > n) throw std::invalid_argument("greedy_partition: K exceeds the number of units");
  Engine eng = make_engine(seed, stream_id("partition"));
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  std::vector<int> unassigned(static_cast<std::size_t>(n));
  std::iota(unassigned.begin(), unassigned.end(), 0);
  int left = n;

  auto random_unassigned = [&]() {
    // unassigned[0, left) holds the unassigned units in some order.
    return unassigned[uniform_index(eng, static_cast<std::size_t>(left))];
  };
  auto take = [&](int v, int c) {
    label[v] = c;
    auto it = std::find(unassigned.begin(), unassigned.begin() + left, v);
    *it = unassigned[left - 1];
    --left;
  };

  const int base = n / K, extra = n % K;
  for (int c = 0; c < K; ++c) {
    const int target = base + (c < extra ? 1 : 0);
    int size = 0;
    std::queue<int> q;
    std::vector<char> queued(static_cast<std::size_t>(n), 0);
    while (size < target) {
      if (q.empty()) {
        int s = random_unassigned();
        q.push(s);
        queued[s] = 1;
      }
      int u = q.front();
      q.pop();
      if (label[u] != -1) continue;
      take(u, c);
      ++size;
      for (int v : g.neighbors(u)) {
        if (label[v] == -1 && !queued[v]) {
          queued[v] = 1;
          q.push(v);
        }
      }
    }
  }
  return label;
}

std::vector<int> read_partition(std::istream& in, int n) {
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  long unit = 0, cluster = 0;
  int lines = 0;
  while (in >> unit >> cluster) {
    ++lines;
    if (unit < 0 || unit >= n) {
      throw std::invalid_argument("partition: unit " + std::to_string(unit) + " out of range");
    }
    if (cluster < 0) throw std::invalid_argument("partition: negative cluster label");
    if (label[unit] != -1) {
      throw std::invalid_argument("partition: unit " + std::to_string(unit) + " listed twice");
    }
    label[unit] = static_cast<int>(cluster);
  }
  for (int i = 0; i < n; ++i) {
    if (label[i] == -1) throw std::invalid_argument("partition: unit " + std::to_string(i) + " missing");
  }
  return label;
}

std::vector<int> read_partition_file(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open partition file: " + path);
  return read_partition(in, n);
}

void write_partition(const std::vector<int>& cluster_of, std::ostream& out) {
  for (std::size_t i = 0; i < cluster_of.size(); ++i) out << i << ' ' << cluster_of[i] << '\n';
}

std::vector<int> PositivityReport::failing_units() const {
  std::vector<int> out;
  for (const auto& e : entries)
    if (!e.ok && (out.empty() || out.back() != e.unit)) out.push_back(e.unit);
  return out;
}

PositivityReport positivity_check(const PropensityTable& pi, const InterferenceGraph& g,
                                  const ExposureModel& model, const std::vector<CellSpec>& required,
                                  const std::vector<int>& units) {
  std::vector<int> all;
  const std::vector<int>* list = &units;
  if (units.empty()) {
    all.resize(static_cast<std::size_t>(g.size()));
    std::iota(all.begin(), all.end(), 0);
    list = &all;
  }
  PositivityReport rep;
  for (int i : *list) {
    for (const auto& spec : required) {
      PositivityEntry e{i, spec, std::nan(""), false};
      try {
        Cell c = resolve_cell(model, g, i, spec);
        e.pi = pi(i, c);
        e.ok = e.pi > 0.0 && e.pi < 1.0;
      } catch (const std::domain_error&) {
      }
      rep.all_ok = rep.all_ok && e.ok;
      rep.entries.push_back(e);
    }
  }
  return rep;
}

PositivityReport positivity_check(const Design& d, const InterferenceGraph& g,
                                  const ExposureModel& model, const std::vector<CellSpec>& required,
                                  long mc_samples, std::uint64_t seed) {
  const PropensityTable pi = best_available_propensity(d, g, model, mc_samples, seed);
  return positivity_check(pi, g, model, required);
}

}  // namespace ilab
