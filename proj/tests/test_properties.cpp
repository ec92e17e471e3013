#include <gtest/gtest.h>

#include <cmath>

#include "corpus.hpp"
#include "ilab/analytic.hpp"
#include "ilab/design.hpp"
#include "ilab/harness.hpp"
#include "ilab/rng.hpp"

using namespace ilab;

// Randomized checks of structural invariants over small random instances.

namespace {
constexpr int kTrials = 25;
}

TEST(Property, DecompositionReconstructsEveryOutcome) {
  Engine eng = make_engine(1, stream_id("prop-decompose"));
  std::normal_distribution<double> nd;
  for (int t = 0; t < kTrials; ++t) {
    const int n = 1 + static_cast<int>(uniform_index(eng, 6));
    std::vector<std::vector<double>> raw(n);
    for (auto& row : raw) {
      const int K = 1 + static_cast<int>(uniform_index(eng, 5));
      row.resize(2 * K);
      for (auto& v : row) v = nd(eng);
    }
    auto tab = decompose(raw);
    for (int i = 0; i < n; ++i) {
      EXPECT_EQ(tab.B(i, 0), 0.0);
      EXPECT_EQ(tab.C(i, 0), 0.0);
      const int K = tab.levels(i);
      for (int z = 0; z < 2; ++z)
        for (int e = 0; e < K; ++e) EXPECT_NEAR(potential_outcome(tab, i, z, e), raw[i][z * K + e], 1e-12);
    }
  }
}

TEST(Property, PropensityRowsAreDistributions) {
  Engine eng = make_engine(2, stream_id("prop-pi"));
  for (int t = 0; t < kTrials; ++t) {
    const int n = 4 + static_cast<int>(uniform_index(eng, 5));
    auto g = generate_graph(ErdosRenyi{0.4}, n, t + 1);
    for (auto kind : {ExposureKind::binary_any, ExposureKind::symmetric_count, ExposureKind::general_pattern}) {
      ExposureModel m{kind, ExposedLevel::full_neighborhood};
      const int nt = 1 + static_cast<int>(uniform_index(eng, n - 1));
      auto pi = enumerated_propensity(Design::crd(n, nt), g, m, false).marginal;
      for (int i = 0; i < n; ++i) {
        double s = 0;
        for (double v : pi.row(i)) {
          ASSERT_GE(v, 0.0);
          ASSERT_LE(v, 1.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
        // Unreachable cells carry no mass.
        for (int z = 0; z < 2; ++z)
          for (int e = 0; e < pi.levels(i); ++e)
            if (!cell_reachable(m, g, i, {z, e})) EXPECT_EQ(pi(i, {z, e}), 0.0);
      }
    }
  }
}

TEST(Property, AnalyticPropensityEqualsEnumerationOnRandomGraphs) {
  Engine eng = make_engine(3, stream_id("prop-analytic"));
  for (int t = 0; t < kTrials; ++t) {
    const int n = 4 + static_cast<int>(uniform_index(eng, 6));
    auto g = generate_graph(ErdosRenyi{0.35}, n, 100 + t);
    const int nt = 1 + static_cast<int>(uniform_index(eng, n - 1));
    const double p = 0.1 + 0.8 * uniform01(eng);
    std::vector<int> of(n);
    const int K = 2 + static_cast<int>(uniform_index(eng, n - 1));
    for (int i = 0; i < n; ++i) of[i] = i < K ? i : static_cast<int>(uniform_index(eng, K));
    const int kt = 1 + static_cast<int>(uniform_index(eng, K - 1));
    for (const auto& d : {Design::crd(n, nt), Design::bernoulli(n, p), Design::cluster(of, kt)}) {
      for (auto kind : {ExposureKind::binary_any, ExposureKind::symmetric_count}) {
        ExposureModel m{kind, ExposedLevel::full_neighborhood};
        if (!has_analytic_propensity(d, m)) continue;
        auto a = analytic_propensity(d, g, m);
        auto e = enumerated_propensity(d, g, m, false).marginal;
        for (int i = 0; i < n; ++i)
          for (std::size_t k = 0; k < a.row(i).size(); ++k)
            ASSERT_NEAR(a.row(i)[k], e.row(i)[k], 1e-12) << d.describe() << " " << to_string(kind);
      }
    }
  }
}

TEST(Property, BiasLinearInvariantAcrossDesignParameters) {
  Engine eng = make_engine(4, stream_id("prop-linear"));
  for (int t = 0; t < kTrials; ++t) {
    const int n = 4 + static_cast<int>(uniform_index(eng, 4));
    auto g = generate_graph(ErdosRenyi{0.4}, n, 200 + t);
    ExposureModel m{ExposureKind::symmetric_count, ExposedLevel::full_neighborhood};
    const double gamma = 2 * uniform01(eng) - 1;
    auto tab = linear_table(m, g, 1.0, 0.5, gamma, 0.0);
    const double want = bias_linear(g, gamma);
    auto uc = resolve(contrast_for(Estimand::DTE), m, g);
    for (const auto& d : {Design::crd(n, 1 + static_cast<int>(uniform_index(eng, n - 1))),
                          Design::restricted_bernoulli(n, 0.1 + 0.8 * uniform01(eng))}) {
      auto ctx = make_exact_context(d, g, m, tab, uc);
      auto e = exact_expectation(d, g, m, tab, parse_estimator("naive"), ctx->ctx);
      EXPECT_NEAR(e.expectation - contrast_value(tab, uc), want, 1e-12);
    }
  }
}

TEST(Property, HtUnbiasedForRandomTablesAndDesigns) {
  Engine eng = make_engine(5, stream_id("prop-ht"));
  for (int t = 0; t < kTrials; ++t) {
    const int n = 4 + static_cast<int>(uniform_index(eng, 4));
    auto g = generate_graph(ErdosRenyi{0.3}, n, 300 + t);
    ExposureModel m{ExposureKind::symmetric_count, ExposedLevel::single_treated};
    auto tab = generate_params(OutcomeGenerator::correlated, g, m, t);
    auto pop = contrast_population(contrast_for(Estimand::TTE), m, g);
    if (static_cast<int>(pop.size()) != n) continue;
    auto uc = resolve(contrast_for(Estimand::TTE), m, g);
    auto d = Design::crd(n, 1 + static_cast<int>(uniform_index(eng, n - 1)));
    auto ctx = make_exact_context(d, g, m, tab, uc);
    if (!feasibility(parse_estimator("ht"), ctx->ctx, false, Estimand::TTE).empty()) continue;
    auto e = exact_expectation(d, g, m, tab, parse_estimator("ht"), ctx->ctx);
    EXPECT_NEAR(e.expectation, contrast_value(tab, uc), 1e-10);
  }
}

TEST(Property, SeedDerivationSeparatesStreams) {
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
  EXPECT_EQ(derive_seed(7, 8, 9), derive_seed(7, 8, 9));
  EXPECT_NE(stream_id("a"), stream_id("b"));
}
