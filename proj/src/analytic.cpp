#include "ilab/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ilab/combinatorics.hpp"
#include "ilab/rng.hpp"

namespace ilab {

namespace {

// Difference in arm means; an empty arm contributes zero.
double naive_zero_empty(const PotentialOutcomeTable& t, const ExposureModel& model, const InterferenceGraph& g,
                        const Treatment& z) {
  const auto a = expose(model, g, z);
  const auto y = realize(t, a);
  double s1 = 0.0, s0 = 0.0;
  int n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (z[i]) {
      s1 += y[i];
      ++n1;
    } else {
      s0 += y[i];
      ++n0;
    }
  }
  return (n1 ? s1 / n1 : 0.0) - (n0 ? s0 / n0 : 0.0);
}

double enumerated_naive_mean(const PotentialOutcomeTable& t, const Design& d, const InterferenceGraph& g,
                             const ExposureModel& model, double cap) {
  double m = 0.0;
  for (const auto& pt : enumerate_support(d, cap)) m += pt.probability * naive_zero_empty(t, model, g, pt.z);
  return m;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void require_size(const std::vector<double>& v, int n, const char* what) {
  if (static_cast<int>(v.size()) != n) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                                std::to_string(v.size()));
  }
}

// Falling-factorial ratio (a)_d / (b)_d, zero once a factor is non-positive.
double falling_ratio(long a, long b, int d) {
  double r = 1.0;
  for (int j = 0; j < d; ++j) {
    if (a - j <= 0) return 0.0;
    r *= static_cast<double>(a - j) / static_cast<double>(b - j);
  }
  return r;
}

double binomial_pmf(int n, int k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                  (k ? k * std::log(p) : 0.0) + (n - k ? (n - k) * std::log1p(-p) : 0.0));
}

}  // namespace

double BiasReport::term(const std::string& name) const {
  for (const auto& [k, v] : terms) {
    if (k == name) return v;
  }
  throw std::out_of_range("no bias term named " + name);
}

BiasReport bias_naive_general(const PotentialOutcomeTable& t, const Design& d, const InterferenceGraph& g,
                              const ExposureModel& model, Estimand target, bool with_oracle, double cap) {
  if (target != Estimand::DTE && target != Estimand::TTE) {
    throw std::invalid_argument("bias_naive_general supports DTE and TTE only");
  }
  const int n = g.size();
  if (t.units() != n || d.units() != n) throw std::invalid_argument("bias_naive_general: size mismatch");
  const CellTable w = weighted_exposure_probs(d, g, model, WeightDenominator::by_treatment, cap);
  const double inv_n = 1.0 / n;

  double a_term = 0.0, b_term = 0.0, c_term = 0.0;
  for (int i = 0; i < n; ++i) {
    const int K = t.levels(i);
    if (K != w.levels(i)) throw std::invalid_argument("bias_naive_general: table levels disagree with model");
    double w1 = 0.0, w0 = 0.0;
    for (int e = 0; e < K; ++e) {
      w1 += w(i, {1, e});
      w0 += w(i, {0, e});
    }
    const double A1 = t.alpha(i) + t.beta(i), A0 = t.alpha(i);
    a_term += A1 * (w1 - inv_n) - A0 * (w0 - inv_n);

    int x = 0;
    if (target == Estimand::TTE) {
      x = exposed_level(model, g, i);
      if (x < 0) throw std::domain_error("unit " + std::to_string(i) + " has no exposed level");
    }
    for (int e = 1; e < K; ++e) {
      double bw = w(i, {1, e}) - w(i, {0, e});
      double cw = w(i, {1, e});
      if (e == x) {
        bw -= inv_n;
        cw -= inv_n;
      }
      b_term += t.B(i, e) * bw;
      c_term += t.C(i, e) * cw;
    }
  }

  BiasReport r;
  r.analytic_value = a_term + b_term + c_term;
  r.terms = {{"A", a_term}, {"B", b_term}, {"C", c_term}};
  if (with_oracle && support_size_bound(d) <= cap) {
    const double truth = true_estimand(t, model, g, target);
    r.oracle_value = enumerated_naive_mean(t, d, g, model, cap) - truth;
  }
  return r;
}

double bias_linear(const InterferenceGraph& g, double gamma) {
  const double n = g.size();
  if (n < 2) return 0.0;
  return -gamma * 2.0 * static_cast<double>(g.edge_count()) / (n * (n - 1.0));
}

double bias_binary(const Design& d, const InterferenceGraph& g, const std::vector<double>& gamma,
                   const std::vector<double>& theta) {
  const int n = g.size();
  require_size(gamma, n, "gamma");
  require_size(theta, n, "theta");
  long double s = 0.0L;
  if (d.kind() == Design::Kind::crd) {
    const long nc = d.n_control();
    for (int i = 0; i < n; ++i) {
      const long di = g.degree(i);
      const long double den = binom(n - 1, di);
      s -= gamma[i] * binom(nc - 1, di - 1) / den;
      s += theta[i] * (1.0L - binom(nc, di) / den);
    }
    return static_cast<double>(s / n);
  }
  if (d.kind() == Design::Kind::bernoulli) {
    const long double q = 1.0L - d.p();
    for (int i = 0; i < n; ++i) {
      const int di = g.degree(i);
      const long double qd = std::pow(q, static_cast<long double>(di));
      s -= di * gamma[i] * qd / (static_cast<long double>(n) * (n - di));
      s += theta[i] * (1.0L - qd) / n;
    }
    return static_cast<double>(s);
  }
  throw std::invalid_argument("bias_binary: design must be crd or bernoulli, got " + d.describe());
}

double bias_binary_bernoulli_exact(double p, const InterferenceGraph& g, const std::vector<double>& gamma,
                                   const std::vector<double>& theta) {
  const int n = g.size();
  if (n < 2) throw std::invalid_argument("bias_binary_bernoulli_exact: n must be at least 2");
  require_size(gamma, n, "gamma");
  require_size(theta, n, "theta");
  const double norm = 1.0 - std::pow(1.0 - p, n) - std::pow(p, n);
  std::vector<double> pk(n, 0.0);
  for (int k = 1; k < n; ++k) pk[k] = binomial_pmf(n, k, p) / norm;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const int di = g.degree(i);
    // E[z_i e_i / n_t] and E[(1-z_i) e_i / n_c] given both arms nonempty.
    double treated = 0.0, control = 0.0;
    for (int k = 1; k < n; ++k) {
      treated += pk[k] * (1.0 - falling_ratio(n - k, n - 1, di)) / n;
      control += pk[k] * (1.0 - falling_ratio(n - k - 1, n - 1, di)) / n;
    }
    s += (gamma[i] + theta[i]) * treated - gamma[i] * control;
  }
  return s;
}

ClusterCovariances cluster_covariances(const Design& cluster, long mc_budget, std::uint64_t seed, double cap) {
  if (cluster.kind() != Design::Kind::cluster) throw std::invalid_argument("cluster_covariances: not a cluster design");
  const int K = cluster.clusters(), Kt = cluster.clusters_treated();
  const int n = cluster.units();
  std::vector<int> size(K, 0);
  for (int c : cluster.cluster_of()) ++size[c];

  // Accumulates E[Z_k], E[Z_k / n_t], E[Z_k^2 / n_t] and the control analogues.
  std::vector<double> ez(K, 0.0), ezt(K, 0.0), ezzt(K, 0.0), ec(K, 0.0), ecc(K, 0.0), eccc(K, 0.0);
  auto accumulate = [&](const std::vector<char>& treated, double w) {
    int nt = 0;
    for (int k = 0; k < K; ++k) nt += treated[k] ? size[k] : 0;
    const int nc = n - nt;
    for (int k = 0; k < K; ++k) {
      const double z = treated[k] ? 1.0 : 0.0;
      ez[k] += w * z;
      ezt[k] += w * z / nt;
      ezzt[k] += w * z * z / nt;
      ec[k] += w * (1.0 - z);
      ecc[k] += w * (1.0 - z) / nc;
      eccc[k] += w * (1.0 - z) * (1.0 - z) / nc;
    }
  };

  ClusterCovariances out;
  if (subset_count(K, Kt) <= cap) {
    std::vector<char> mask(K, 0);
    std::fill(mask.begin(), mask.begin() + Kt, 1);
    const double w = 1.0 / subset_count(K, Kt);
    do {
      accumulate(mask, w);
    } while (std::prev_permutation(mask.begin(), mask.end()));
  } else {
    if (mc_budget < 1) throw std::invalid_argument("cluster_covariances: support too large and no MC budget");
    out.exact = false;
    out.samples = mc_budget;
    Engine eng = make_engine(seed, stream_id("cluster_covariances"));
    std::vector<int> idx(K);
    std::vector<char> mask(K);
    const double w = 1.0 / static_cast<double>(mc_budget);
    for (long s = 0; s < mc_budget; ++s) {
      std::iota(idx.begin(), idx.end(), 0);
      std::fill(mask.begin(), mask.end(), 0);
      for (int j = 0; j < Kt; ++j) {
        const std::size_t r = j + uniform_index(eng, static_cast<std::size_t>(K - j));
        std::swap(idx[j], idx[r]);
        mask[idx[j]] = 1;
      }
      accumulate(mask, w);
    }
  }
  out.c.resize(K);
  out.d.resize(K);
  for (int k = 0; k < K; ++k) {
    out.c[k] = ezzt[k] - ez[k] * ezt[k];
    out.d[k] = eccc[k] - ec[k] * ecc[k];
  }
  return out;
}

BiasReport bias_cluster_linear(const Design& cluster, const InterferenceGraph& g, const PotentialOutcomeTable& t,
                               long mc_budget, std::uint64_t seed, double cap) {
  if (cluster.kind() != Design::Kind::cluster) throw std::invalid_argument("bias_cluster_linear: not a cluster design");
  const int n = g.size();
  if (t.units() != n || cluster.units() != n) throw std::invalid_argument("bias_cluster_linear: size mismatch");

  // Read gamma off the table and confirm the simple linear form.
  double gamma = 0.0;
  bool have_gamma = false;
  for (int i = 0; i < n; ++i) {
    if (t.levels(i) != g.degree(i) + 1) {
      throw std::invalid_argument("bias_cluster_linear: table must use symmetric exposure levels");
    }
    if (t.levels(i) > 1 && !have_gamma) {
      gamma = t.B(i, 1);
      have_gamma = true;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int e = 1; e < t.levels(i); ++e) {
      if (std::abs(t.B(i, e) - gamma * e) > 1e-12 * std::max(1.0, std::abs(gamma * e)) || t.C(i, e) != 0.0) {
        throw std::invalid_argument("bias_cluster_linear: table is not Y = alpha + beta z + gamma * treated neighbors");
      }
    }
  }

  const int K = cluster.clusters(), Kt = cluster.clusters_treated();
  std::vector<double> abar(K, 0.0), bbar(K, 0.0);
  std::vector<int> size(K, 0);
  for (int i = 0; i < n; ++i) {
    const int k = cluster.cluster_of()[i];
    abar[k] += t.alpha(i);
    bbar[k] += t.beta(i);
    ++size[k];
  }
  const auto cov = cluster_covariances(cluster, mc_budget, seed, cap);
  double beta_term = 0.0, alpha_term = 0.0;
  const double scale = static_cast<double>(K) / Kt;
  for (int k = 0; k < K; ++k) {
    abar[k] /= size[k];
    bbar[k] /= size[k];
    beta_term -= scale * bbar[k] * size[k] * size[k] * cov.c[k];
    alpha_term += scale * abar[k] * size[k] * (cov.d[k] - cov.c[k]);
  }

  BiasReport r;
  r.analytic_value = gamma + beta_term + alpha_term;
  r.terms = {{"gamma", gamma}, {"beta", beta_term}, {"alpha", alpha_term}};
  if (!cov.exact) r.notes.push_back("c_k, d_k from " + std::to_string(cov.samples) + " Monte Carlo draws");
  if (support_size_bound(cluster) <= cap) {
    const ExposureModel model{ExposureKind::symmetric_count};
    std::vector<double> beta(n);
    for (int i = 0; i < n; ++i) beta[i] = t.beta(i);
    r.oracle_value = enumerated_naive_mean(t, cluster, g, model, cap) - mean(beta);
  }
  return r;
}

double var_ht(const PotentialOutcomeTable& t, const UnitContrast& uc, const CellTable& pi,
              const JointPropensityTable& pij) {
  const int n = t.units();
  if (pij.empty() || pij.units() != n) throw std::invalid_argument("var_ht: joint propensities missing");
  std::vector<double> y1(n), y0(n), p1(n), p0(n);
  for (int i = 0; i < n; ++i) {
    y1[i] = potential_outcome(t, i, uc.tau1[i]);
    y0[i] = potential_outcome(t, i, uc.tau0[i]);
    p1[i] = pi(i, uc.tau1[i]);
    p0[i] = pi(i, uc.tau0[i]);
    if (!(p1[i] > 0.0) || !(p0[i] > 0.0)) {
      throw std::domain_error("var_ht: unit " + std::to_string(i) + " has a zero contrast propensity");
    }
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    s += (1.0 - p1[i]) / p1[i] * y1[i] * y1[i];
    s += (1.0 - p0[i]) / p0[i] * y0[i] * y0[i];
    for (int j = 0; j < n; ++j) {
      s += 2.0 * y1[i] * y0[j];
      if (j == i) continue;
      s += (pij(i, uc.tau1[i], j, uc.tau1[j]) - p1[i] * p1[j]) / (p1[i] * p1[j]) * y1[i] * y1[j];
      s += (pij(i, uc.tau0[i], j, uc.tau0[j]) - p0[i] * p0[j]) / (p0[i] * p0[j]) * y0[i] * y0[j];
      s -= 2.0 * y1[i] * y0[j] * pij(i, uc.tau1[i], j, uc.tau0[j]) / (p1[i] * p0[j]);
    }
  }
  return s / (static_cast<double>(n) * n);
}

namespace {

struct DegreeStats {
  double n, m, sum_d2, cross;  // cross = sum_{i != j} d_i d_j
};

DegreeStats degree_stats(const InterferenceGraph& g) {
  DegreeStats s{static_cast<double>(g.size()), static_cast<double>(g.edge_count()), 0.0, 0.0};
  for (int i = 0; i < g.size(); ++i) s.sum_d2 += static_cast<double>(g.degree(i)) * g.degree(i);
  s.cross = 4.0 * s.m * s.m - s.sum_d2;
  return s;
}

void check_crd(const InterferenceGraph& g, int n_t) {
  if (g.size() <= 3) throw std::invalid_argument("naive variance under CRD needs n > 3");
  if (n_t <= 0 || n_t >= g.size()) throw std::invalid_argument("naive variance under CRD needs 0 < n_t < n");
}

}  // namespace

double crd_var_pair_sum(const InterferenceGraph& g, int n_t) {
  check_crd(g, n_t);
  const auto s = degree_stats(g);
  const double n = s.n, nt = n_t, nc = n - nt;
  return 4.0 * nt * nc * (nt - 1.0) / (n * (n - 1.0) * (n - 2.0) * (n - 3.0)) *
         (s.m * (nc - 1.0) + 2.0 * s.m * s.m * (3.0 * n + 3.0 * nt - 2.0 * n * nt - 3.0) / (n * (n - 1.0)) +
          (nt - 2.0) * s.sum_d2);
}

double crd_var_degree_sum(const InterferenceGraph& g, int n_t) {
  check_crd(g, n_t);
  const auto s = degree_stats(g);
  const double n = s.n, nt = n_t, nc = n - nt;
  return nt * nc / (n * n) * (s.sum_d2 - s.cross / (n - 1.0));
}

double crd_cov_pair_degree(const InterferenceGraph& g, int n_t) {
  check_crd(g, n_t);
  const auto s = degree_stats(g);
  const double n = s.n, nt = n_t, nc = n - nt;
  return 2.0 * nt * nc * (nt - 1.0) / (n * (n - 1.0) * (n - 2.0)) * (s.sum_d2 - 4.0 * s.m * s.m / n);
}

LinearVarianceReport var_naive_linear_crd(const InterferenceGraph& g, int n_t, double gamma, double sigma2) {
  check_crd(g, n_t);
  const auto s = degree_stats(g);
  const double n = s.n, nt = n_t, nc = n - nt;
  LinearVarianceReport r;
  r.c1 = 4.0 * n / ((n - 1.0) * (n - 2.0) * (n - 3.0)) * (1.0 - 1.0 / nt) * (1.0 - 1.0 / nc);
  r.c2 = 8.0 * (nt - 1.0) * (6.0 * nt - 3.0 * n + 3.0 * n * n - 5.0 * n * nt) /
         (n * (n - 1.0) * (n - 1.0) * (n - 2.0) * (n - 3.0) * nt * nc);
  r.c3 = 4.0 * n * (nt - 1.0) * (nt - 2.0) / (nt * nc * (n - 1.0) * (n - 2.0) * (n - 3.0)) + nt / (nc * n * n) -
         4.0 * (nt - 1.0) / (nc * (n - 1.0) * (n - 2.0));
  r.c4 = -nt / (nc * n * n * (n - 1.0));
  const double base = sigma2 * (1.0 / nt + 1.0 / nc);
  r.value = base + gamma * gamma * (r.c1 * s.m + r.c2 * s.m * s.m + r.c3 * s.sum_d2 + r.c4 * s.cross);
  const double k = n / (nt * nc);
  r.assembled = base + gamma * gamma *
                           (k * k * crd_var_pair_sum(g, n_t) + crd_var_degree_sum(g, n_t) / (nc * nc) -
                            2.0 * k / nc * crd_cov_pair_degree(g, n_t));
  return r;
}

BinaryVarianceReport var_naive_binary(const InterferenceGraph& g, const Design& crd, const PotentialOutcomeTable& t,
                                      MomentSource source, long mc_samples, std::uint64_t seed, double cap) {
  if (crd.kind() != Design::Kind::crd) throw std::invalid_argument("var_naive_binary: design must be crd");
  const int n = g.size();
  if (t.units() != n || crd.units() != n) throw std::invalid_argument("var_naive_binary: size mismatch");
  const ExposureModel model{ExposureKind::binary_any};
  std::vector<double> al(n), ga(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (t.levels(i) != level_count(model, g, i)) {
      throw std::invalid_argument("var_naive_binary: table must use binary exposure levels");
    }
    if (std::abs(t.beta(i) - t.beta(0)) > 1e-12 * std::max(1.0, std::abs(t.beta(0)))) {
      throw std::invalid_argument("var_naive_binary: beta_i must be constant");
    }
    if (t.levels(i) == 2) {
      if (t.C(i, 1) != 0.0) throw std::invalid_argument("var_naive_binary: model must be additive (C = 0)");
      ga[i] = t.B(i, 1);
    }
    al[i] = t.alpha(i);
  }

  // Joint moments; matrices are indexed [i * n + j].
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  std::vector<double> pz(n, 0.0), rho(n, 0.0), pe(n, 0.0);
  std::vector<double> zz(nn, 0.0), ze(nn, 0.0), zze(nn, 0.0), zee(nn, 0.0), ee(nn, 0.0), zeze(nn, 0.0);
  double naive1 = 0.0, naive2 = 0.0;
  auto accumulate = [&](const Treatment& z, double w) {
    const auto a = expose(model, g, z);
    std::vector<double> zi(n), ei(n);
    for (int i = 0; i < n; ++i) {
      zi[i] = a[i].z;
      ei[i] = a[i].e;
      pz[i] += w * zi[i];
      rho[i] += w * zi[i] * ei[i];
      pe[i] += w * ei[i];
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * n + j;
        zz[k] += w * zi[i] * zi[j];
        ze[k] += w * zi[i] * ei[j];
        zze[k] += w * zi[i] * zi[j] * ei[j];
        zee[k] += w * zi[i] * ei[i] * ei[j];
        ee[k] += w * ei[i] * ei[j];
        zeze[k] += w * zi[i] * ei[i] * zi[j] * ei[j];
      }
    }
    if (source == MomentSource::enumerate) {
      const double v = naive_zero_empty(t, model, g, z);
      naive1 += w * v;
      naive2 += w * v * v;
    }
  };

  BinaryVarianceReport r;
  if (source == MomentSource::enumerate) {
    for (const auto& pt : enumerate_support(crd, cap)) accumulate(pt.z, pt.probability);
    r.oracle_value = std::max(0.0, naive2 - naive1 * naive1);
  } else {
    if (mc_samples < 1) throw std::invalid_argument("var_naive_binary: Monte Carlo moments need samples >= 1");
    r.exact_moments = false;
    Engine eng = make_engine(seed, stream_id("var_naive_binary"));
    const double w = 1.0 / static_cast<double>(mc_samples);
    for (long s = 0; s < mc_samples; ++s) accumulate(sample(crd, eng), w);
  }

  const double nd = n, nt = crd.n_treated(), nc = crd.n_control();
  auto at = [n](const std::vector<double>& m, int i, int j) { return m[static_cast<std::size_t>(i) * n + j]; };

  double var_u = 0.0, var_r = 0.0, var_p = 0.0, cov_ur = 0.0, cov_up = 0.0, cov_rp = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      var_u += al[i] * al[j] * (at(zz, i, j) - pz[i] * pz[j]);
      var_r += ga[i] * ga[j] * (at(zeze, i, j) - rho[i] * rho[j]);
      var_p += ga[i] * ga[j] * (at(ee, i, j) - pe[i] * pe[j]);
      cov_ur += al[i] * ga[j] * (at(zze, i, j) - pz[i] * rho[j]);
      cov_up += al[i] * ga[j] * (at(ze, i, j) - pz[i] * pe[j]);
      cov_rp += ga[i] * ga[j] * (at(zee, i, j) - rho[i] * pe[j]);
    }
  }
  const double k = nd / (nt * nc);
  r.value = k * k * (var_u + var_r + 2.0 * cov_ur) + var_p / (nc * nc) - 2.0 * k / nc * (cov_up + cov_rp);

  double b1 = 0.0, b2 = 0.0, b3 = 0.0, b4 = 0.0, b5 = 0.0, b6 = 0.0;
  for (int i = 0; i < n; ++i) {
    b1 += al[i] * al[i] * nt * nc / nd;
    b2 += ga[i] * ga[i] * rho[i] * (1.0 - rho[i]);
    b3 += ga[i] * ga[i] * pe[i] * (1.0 - pe[i]);
    b4 += al[i] * ga[i] * rho[i] * nc / nd;
    b5 += ga[i] * ga[i] * rho[i] * (1.0 - pe[i]);
    b6 += al[i] * ga[i] * (rho[i] - nt / nd * pe[i]);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      b1 += al[i] * al[j] * nt / (nd * nd);
      b2 += ga[i] * ga[j] * (at(zeze, i, j) - rho[i] * rho[j]);
      b3 += ga[i] * ga[j] * (at(ee, i, j) - pe[i] * pe[j]);
      const double cond_both = at(zz, i, j) > 0.0 ? at(zze, i, j) / at(zz, i, j) : 0.0;
      const double cond_one = pz[j] > 0.0 ? rho[j] / pz[j] : 0.0;
      b4 += al[i] * ga[j] * nt * nt / (nd * nd) * (cond_both - cond_one);
      b5 += ga[i] * ga[j] * (at(zee, i, j) - rho[i] * pe[j]);
      b6 += al[i] * ga[j] * (at(ze, i, j) - nt / nd * pe[j]);
    }
  }
  const double lead = nd * nd / (nt * nt * nc * nc);
  r.printed_value = lead * b1 + lead * b2 + b3 / (nd * nd) + lead * b4 - b5 / (nt * nc) - b6 / (nt * nc);
  return r;
}

}  // namespace ilab
