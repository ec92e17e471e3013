#include <gtest/gtest.h>

#include <cmath>

#include "corpus.hpp"
#include "ilab/analytic.hpp"
#include "ilab/design.hpp"
#include "ilab/estimator.hpp"
#include "oracle.hpp"

using namespace ilab;

namespace {

const ExposureModel kBinary{ExposureKind::binary_any, ExposedLevel::full_neighborhood};
const ExposureModel kSym{ExposureKind::symmetric_count, ExposedLevel::full_neighborhood};

std::vector<double> ramp(int n, double a, double b) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + b * std::sin(1.7 * i + a);
  return v;
}

oracle::Linear linear_params(int n, std::uint64_t k) {
  return {ramp(n, 1.0 + k, 0.5), ramp(n, 2.0 - k, 0.3), ramp(n, 0.7, 0.4 * (k + 1)), ramp(n, -0.3, 0.6)};
}

PotentialOutcomeTable table_of(const oracle::Linear& p, const ExposureModel& m, const InterferenceGraph& g) {
  return linear_table(m, g, p.alpha, p.beta, p.gamma, p.theta);
}

oracle::Kind kind_of(const ExposureModel& m) {
  return m.kind == ExposureKind::binary_any ? oracle::Kind::binary : oracle::Kind::count;
}

// E[naive] where an empty arm's mean counts as zero.
double oracle_naive_mean(const oracle::Prob& p, const oracle::Linear& t, oracle::Kind k, const InterferenceGraph& g) {
  return oracle::expect(p, g.size(), [&](const oracle::Z& z) {
    double s1 = 0, s0 = 0;
    int n1 = 0, n0 = 0;
    for (int i = 0; i < g.size(); ++i) {
      const double y = t.y(k, g, z, i);
      if (z[i]) s1 += y, ++n1;
      else s0 += y, ++n0;
    }
    return (n1 ? s1 / n1 : 0.0) - (n0 ? s0 / n0 : 0.0);
  });
}

double oracle_contrast(const oracle::Linear& t, oracle::Kind k, const InterferenceGraph& g, bool tte) {
  double s = 0;
  const int n = g.size();
  for (int i = 0; i < n; ++i) {
    oracle::Z one(n, 0), zero(n, 0), all(n, 1);
    one[i] = 1;
    s += (tte ? t.y(k, g, all, i) : t.y(k, g, one, i)) - t.y(k, g, zero, i);
  }
  return s / n;
}

}  // namespace

TEST(Analytic, NaiveGeneralVanishesWithoutInterference) {
  auto g = empty_graph(5);
  auto t = linear_table(kBinary, g, {1, 2, 3, 4, 5}, {2, 1, 0, 1, 2}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0});
  auto r = bias_naive_general(t, Design::crd(5, 2), g, kBinary, Estimand::DTE);
  EXPECT_NEAR(r.analytic_value, 0.0, 1e-15);
  ASSERT_TRUE(r.oracle_value);
  EXPECT_NEAR(*r.oracle_value, 0.0, 1e-14);
}

TEST(Analytic, NaiveGeneralPath) {
  auto g = path_graph(3);
  auto t = linear_table(kSym, g, 0.0, 1.0, 1.0, 0.0);
  auto r = bias_naive_general(t, Design::crd(3, 1), g, kSym, Estimand::DTE);
  EXPECT_NEAR(r.analytic_value, -2.0 / 3, 1e-14);
}

TEST(Analytic, NaiveGeneralMatchesOracleOnCorpus) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    const int n = g.size();
    for (const auto& m : {kBinary, kSym}) {
      const auto params = linear_params(n, 1);
      auto t = table_of(params, m, g);
      struct D {
        Design d;
        oracle::Prob p;
      };
      for (const auto& [d, p] : {D{Design::crd(n, n / 2), oracle::crd(n, n / 2)}, D{Design::crd(n, 1), oracle::crd(n, 1)},
                                 D{Design::bernoulli(n, 0.35), oracle::bernoulli(0.35)}}) {
        for (auto est : {Estimand::DTE, Estimand::TTE}) {
          if (est == Estimand::TTE &&
              contrast_population(contrast_for(est), m, g).size() != static_cast<std::size_t>(n)) {
            continue;
          }
          auto r = bias_naive_general(t, d, g, m, est);
          const double want = oracle_naive_mean(p, params, kind_of(m), g) -
                              oracle_contrast(params, kind_of(m), g, est == Estimand::TTE);
          const std::string label = name + " " + d.describe() + " " + to_string(m.kind) + " " + to_string(est);
          EXPECT_NEAR(r.analytic_value, want, 1e-10) << label;
          ASSERT_TRUE(r.oracle_value) << label;
          EXPECT_NEAR(*r.oracle_value, want, 1e-10) << label;
        }
      }
    }
  }
}

TEST(Analytic, BiasLinearBasics) {
  EXPECT_EQ(bias_linear(empty_graph(6), 2.0), 0.0);
  EXPECT_NEAR(bias_linear(path_graph(3), 1.0), -2.0 / 3, 1e-15);
  EXPECT_LT(bias_linear(cycle_graph(5), 0.5), 0.0);
  EXPECT_GT(bias_linear(cycle_graph(5), -0.5), 0.0);
}

TEST(Analytic, BiasLinearMatchesEnumerationForEveryDesignParameter) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    const int n = g.size();
    oracle::Linear p{ramp(n, 1, 1), ramp(n, 2, 1), std::vector<double>(n, 0.8), std::vector<double>(n, 0.0)};
    const double dte = oracle_contrast(p, oracle::Kind::count, g, false);
    const double want = bias_linear(g, 0.8);
    for (int nt = 1; nt < n; ++nt) {
      EXPECT_NEAR(oracle_naive_mean(oracle::crd(n, nt), p, oracle::Kind::count, g) - dte, want, 1e-12)
          << name << " n_t " << nt;
    }
    for (double q : {0.2, 0.5, 0.7}) {
      EXPECT_NEAR(oracle_naive_mean(oracle::restricted_bernoulli(n, q), p, oracle::Kind::count, g) - dte, want, 1e-12)
          << name << " p " << q;
    }
  }
}

TEST(Analytic, BiasBinaryCrdCycleExample) {
  auto g = cycle_graph(4);
  EXPECT_NEAR(bias_binary(Design::crd(4, 2), g, {1, 1, 1, 1}, {0, 0, 0, 0}), -1.0 / 3, 1e-15);
  EXPECT_EQ(bias_binary(Design::crd(4, 2), g, {0, 0, 0, 0}, {0, 0, 0, 0}), 0.0);
}

TEST(Analytic, BiasBinaryCrdMatchesEnumeration) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    const int n = g.size();
    auto p = linear_params(n, 2);
    const double dte = oracle_contrast(p, oracle::Kind::binary, g, false);
    for (int nt = 1; nt < n; ++nt) {
      const double want = oracle_naive_mean(oracle::crd(n, nt), p, oracle::Kind::binary, g) - dte;
      EXPECT_NEAR(bias_binary(Design::crd(n, nt), g, p.gamma, p.theta), want, 1e-12) << name << " n_t " << nt;
    }
  }
}

TEST(Analytic, BiasBinaryZeroCorner) {
  // Every unit has degree 3 > n_c = 2, so every treated unit is exposed.
  auto g = complete_graph(4);
  std::vector<double> gam{0.3, -1, 2, 0.5}, zero(4, 0.0);
  EXPECT_EQ(bias_binary(Design::crd(4, 2), g, gam, zero), 0.0);
  oracle::Linear p{ramp(4, 1, 1), ramp(4, 2, 1), gam, zero};
  const double b = oracle_naive_mean(oracle::crd(4, 2), p, oracle::Kind::binary, g) -
                   oracle_contrast(p, oracle::Kind::binary, g, false);
  EXPECT_NEAR(b, 0.0, 1e-14);
}

TEST(Analytic, BiasBinaryBernoulliExactMatchesConditionalEnumeration) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    const int n = g.size();
    auto p = linear_params(n, 3);
    for (double q : {0.3, 0.5}) {
      // E[naive | both arms nonempty] - DTE.
      const double want = oracle_naive_mean(oracle::restricted_bernoulli(n, q), p, oracle::Kind::binary, g) -
                          oracle_contrast(p, oracle::Kind::binary, g, false);
      EXPECT_NEAR(bias_binary_bernoulli_exact(q, g, p.gamma, p.theta), want, 1e-12) << name << " p " << q;
    }
  }
}

TEST(Analytic, BiasBinaryBernoulliPrintedFormIsApproximate) {
  // theta-only instance on the 10-cycle: the printed form gives 0.75, the
  // exact bias given both arms nonempty is 0.68811...
  auto g = cycle_graph(10);
  std::vector<double> zero(10, 0.0), one(10, 1.0);
  const double printed = bias_binary(Design::bernoulli(10, 0.5), g, zero, one);
  const double exact = bias_binary_bernoulli_exact(0.5, g, zero, one);
  EXPECT_NEAR(printed, 0.75, 1e-15);
  EXPECT_NEAR(exact, 0.6881115459882583, 1e-12);
}

TEST(Analytic, BiasBinaryRejectsOtherDesigns) {
  EXPECT_THROW(bias_binary(Design::restricted_bernoulli(4, 0.5), path_graph(4), {0, 0, 0, 0}, {0, 0, 0, 0}),
               std::invalid_argument);
}

TEST(Analytic, ClusterCovariancesMatchEnumeration) {
  std::vector<int> of{0, 0, 0, 1, 1, 2, 2, 2, 3};
  auto d = Design::cluster(of, 2);
  auto cov = cluster_covariances(d, 0, 1);
  ASSERT_TRUE(cov.exact);
  const int K = 4;
  std::vector<int> size(K, 0);
  for (int c : of) ++size[c];
  auto p = oracle::cluster(of, 2);
  for (int k = 0; k < K; ++k) {
    auto first = std::find(of.begin(), of.end(), k) - of.begin();
    const double ez = oracle::expect(p, 9, [&](const oracle::Z& z) { return double(z[first]); });
    const double ezz = oracle::expect(p, 9, [&](const oracle::Z& z) { return z[first] / double(oracle::ones(z)); });
    EXPECT_NEAR(cov.c[k], ezz - ez * ezz, 1e-14);
    const double e00 = oracle::expect(p, 9, [&](const oracle::Z& z) { return (1 - z[first]) / double(9 - oracle::ones(z)); });
    EXPECT_NEAR(cov.d[k], e00 - (1 - ez) * e00, 1e-14);
  }
}

TEST(Analytic, ClusterLinearOracleMatchesIndependentEnumeration) {
  auto g = two_triangles();
  std::vector<int> of{0, 0, 1, 1, 2, 2};
  oracle::Linear p{ramp(6, 1, 1), ramp(6, 2, 0.5), std::vector<double>(6, 0.7), std::vector<double>(6, 0.0)};
  auto t = table_of(p, kSym, g);
  auto r = bias_cluster_linear(Design::cluster(of, 1), g, t, 0, 1);
  ASSERT_TRUE(r.oracle_value);
  const double want = oracle_naive_mean(oracle::cluster(of, 1), p, oracle::Kind::count, g) -
                      oracle_contrast(p, oracle::Kind::count, g, false);
  EXPECT_NEAR(*r.oracle_value, want, 1e-12);
}

TEST(Analytic, ClusterLinearRejectsNonLinearTables) {
  auto g = two_triangles();
  auto t = linear_table(kSym, g, 1.0, 1.0, 0.5, 0.25);
  EXPECT_THROW(bias_cluster_linear(Design::cluster({0, 0, 0, 1, 1, 1}, 1), g, t, 0, 1), std::invalid_argument);
}

TEST(Analytic, VarHtMatchesEnumeratedVariance) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    const int n = g.size();
    auto t = generate_params(OutcomeGenerator::uncorrelated, g, kBinary, 12);
    for (auto est : {Estimand::DTE, Estimand::TTE}) {
      if (contrast_population(contrast_for(est), kBinary, g).size() != static_cast<std::size_t>(n)) continue;
      auto uc = resolve(contrast_for(est), kBinary, g);
      for (const auto& d : {Design::crd(n, n / 2), Design::bernoulli(n, 0.4)}) {
        auto e = enumerated_propensity(d, g, kBinary, true);
        bool ok = true;
        for (int i = 0; i < n; ++i)
          for (Cell c : {uc.tau1[i], uc.tau0[i]}) ok &= e.marginal(i, c) > 0 && e.marginal(i, c) < 1;
        if (!ok) continue;
        double m1 = 0, m2 = 0;
        for (const auto& s : enumerate_support(d)) {
          auto a = expose(kBinary, g, s.z);
          const double v = horvitz_thompson(realize(t, a), a, e.marginal, uc).value;
          m1 += s.probability * v;
          m2 += s.probability * v * v;
        }
        EXPECT_NEAR(var_ht(t, uc, e.marginal, e.joint), m2 - m1 * m1, 1e-10) << name << " " << d.describe();
      }
    }
  }
}

TEST(Analytic, VarHtZeroOutcomes) {
  auto g = path_graph(5);
  auto t = linear_table(kBinary, g, 0.0, 0.0, 0.0, 0.0);
  auto d = Design::crd(5, 2);
  auto e = enumerated_propensity(d, g, kBinary, true);
  auto uc = resolve(contrast_for(Estimand::DTE), kBinary, g);
  EXPECT_EQ(var_ht(t, uc, e.marginal, e.joint), 0.0);
}

TEST(Analytic, CrdVarianceHelpersMatchEnumeration) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    const int n = g.size();
    for (int nt = 1; nt < n; ++nt) {
      auto p = oracle::crd(n, nt);
      auto s2 = [&](const oracle::Z& z) {
        double s = 0;
        for (int i = 0; i < n; ++i)
          for (int j : g.neighbors(i)) s += z[i] * z[j];
        return s;
      };
      auto s1 = [&](const oracle::Z& z) {
        double s = 0;
        for (int i = 0; i < n; ++i) s += g.degree(i) * z[i];
        return s;
      };
      const double e2 = oracle::expect(p, n, s2), e1 = oracle::expect(p, n, s1);
      const double v2 = oracle::expect(p, n, [&](const oracle::Z& z) { return s2(z) * s2(z); }) - e2 * e2;
      const double v1 = oracle::expect(p, n, [&](const oracle::Z& z) { return s1(z) * s1(z); }) - e1 * e1;
      const double c12 = oracle::expect(p, n, [&](const oracle::Z& z) { return s1(z) * s2(z); }) - e1 * e2;
      const std::string label = name + " n_t " + std::to_string(nt);
      EXPECT_NEAR(crd_var_pair_sum(g, nt), v2, 1e-9 * std::max(1.0, v2)) << label;
      EXPECT_NEAR(crd_var_degree_sum(g, nt), v1, 1e-9 * std::max(1.0, v1)) << label;
      EXPECT_NEAR(crd_cov_pair_degree(g, nt), c12, 1e-9 * std::max(1.0, std::abs(c12))) << label;
    }
  }
}

TEST(Analytic, VarNaiveLinearCrd) {
  auto g = cycle_graph(6);
  auto r0 = var_naive_linear_crd(g, 3, 0.0, 2.0);
  EXPECT_NEAR(r0.value, 2.0 * (1.0 / 3 + 1.0 / 3), 1e-15);
  auto re = var_naive_linear_crd(empty_graph(6), 2, 1.5, 2.0);
  EXPECT_NEAR(re.value, 2.0 * (0.5 + 0.25), 1e-15);
  EXPECT_THROW(var_naive_linear_crd(path_graph(3), 1, 1.0, 1.0), std::invalid_argument);
}

TEST(Analytic, VarNaiveLinearCrdAssembledMatchesEnumeration) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    const int n = g.size();
    oracle::Linear p{std::vector<double>(n, 1.0), std::vector<double>(n, 2.0), std::vector<double>(n, 0.6),
                     std::vector<double>(n, 0.0)};
    for (int nt = 1; nt < n; ++nt) {
      const auto pr = oracle::crd(n, nt);
      const double m1 = oracle_naive_mean(pr, p, oracle::Kind::count, g);
      const double m2 = oracle::expect(pr, n, [&](const oracle::Z& z) {
        const double v = oracle::naive(p, oracle::Kind::count, g, z);
        return v * v;
      });
      auto r = var_naive_linear_crd(g, nt, 0.6, 0.0);
      EXPECT_NEAR(r.assembled, m2 - m1 * m1, 1e-10) << name << " n_t " << nt;
    }
  }
}

TEST(Analytic, VarNaiveBinaryMatchesEnumeration) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    const int n = g.size();
    auto alpha = ramp(n, 1, 2), gam = ramp(n, 0.5, 1);
    auto t = linear_table(kBinary, g, alpha, std::vector<double>(n, 1.5), gam, std::vector<double>(n, 0.0));
    for (int nt = 2; nt < n - 1; ++nt) {
      auto r = var_naive_binary(g, Design::crd(n, nt), t, MomentSource::enumerate);
      ASSERT_TRUE(r.oracle_value);
      EXPECT_NEAR(r.value, *r.oracle_value, 1e-9) << name << " n_t " << nt;
    }
  }
}

TEST(Analytic, VarNaiveBinaryWithoutInterference) {
  auto g = cycle_graph(6);
  auto t = linear_table(kBinary, g, ramp(6, 1, 2), std::vector<double>(6, 1.0), std::vector<double>(6, 0.0),
                        std::vector<double>(6, 0.0));
  auto r = var_naive_binary(g, Design::crd(6, 3), t, MomentSource::enumerate);
  ASSERT_TRUE(r.oracle_value);
  EXPECT_NEAR(r.value, *r.oracle_value, 1e-10);
  EXPECT_NEAR(*r.oracle_value, 1.4109139780301052, 1e-12);
  // The printed form keeps the alpha block n_t n_c / n on the diagonal and
  // n_t / n^2 off it; by hand that is 16.0166913186..., not the variance.
  EXPECT_NEAR(r.printed_value, 16.01669131861748, 1e-10);
}

TEST(Analytic, VarNaiveBinaryMonteCarloMoments) {
  auto g = cycle_graph(8);
  auto t = linear_table(kBinary, g, ramp(8, 1, 2), std::vector<double>(8, 1.0), ramp(8, 0.5, 1),
                        std::vector<double>(8, 0.0));
  auto exact = var_naive_binary(g, Design::crd(8, 4), t, MomentSource::enumerate);
  auto mc = var_naive_binary(g, Design::crd(8, 4), t, MomentSource::monte_carlo, 400000, 3);
  EXPECT_FALSE(mc.exact_moments);
  EXPECT_NEAR(mc.value, exact.value, 0.05 * std::abs(exact.value) + 1e-3);
}

TEST(Analytic, FormulasAreDeterministic) {
  auto g = star_graph(7);
  auto t = generate_params(OutcomeGenerator::uncorrelated, g, kBinary, 1);
  auto a = bias_naive_general(t, Design::crd(7, 3), g, kBinary, Estimand::DTE);
  auto b = bias_naive_general(t, Design::crd(7, 3), g, kBinary, Estimand::DTE);
  EXPECT_EQ(a.analytic_value, b.analytic_value);
  EXPECT_EQ(var_naive_linear_crd(g, 3, 1, 1).value, var_naive_linear_crd(g, 3, 1, 1).value);
}

TEST(Analytic, VarNaiveLinearCrdPrintedConstantsMatchAssembled) {
  for (const auto& [name, g] : corpus::graphs(10)) {
    const int n = g.size();
    if (n <= 3) continue;
    for (int nt = 1; nt < n; ++nt) {
      auto r = var_naive_linear_crd(g, nt, 0.8, 0.3);
      EXPECT_NEAR(r.value, r.assembled, 1e-10 * std::max(1.0, std::abs(r.assembled))) << name << " n_t " << nt;
    }
  }
}
