#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "corpus.hpp"
#include "ilab/design.hpp"
#include "ilab/propensity.hpp"
#include "oracle.hpp"

using namespace ilab;

namespace {

const ExposureModel kBinary{ExposureKind::binary_any, ExposedLevel::full_neighborhood};
const ExposureModel kSym{ExposureKind::symmetric_count, ExposedLevel::full_neighborhood};
const ExposureModel kPattern{ExposureKind::general_pattern, ExposedLevel::full_neighborhood};

oracle::Kind kind_of(const ExposureModel& m) {
  switch (m.kind) {
    case ExposureKind::binary_any: return oracle::Kind::binary;
    case ExposureKind::symmetric_count: return oracle::Kind::count;
    default: return oracle::Kind::pattern;
  }
}

void expect_table(const CellTable& pi, const std::vector<std::vector<double>>& want, double tol,
                  const std::string& label) {
  ASSERT_EQ(pi.units(), static_cast<int>(want.size())) << label;
  for (int i = 0; i < pi.units(); ++i) {
    auto row = pi.row(i);
    ASSERT_EQ(row.size(), want[i].size()) << label;
    for (std::size_t k = 0; k < row.size(); ++k) ASSERT_NEAR(row[k], want[i][k], tol) << label << " unit " << i;
  }
}

struct Case {
  Design d;
  oracle::Prob p;
};

std::vector<Case> cases(int n) {
  std::vector<Case> out;
  for (int nt : {1, n / 2, n - 1}) out.push_back({Design::crd(n, nt), oracle::crd(n, nt)});
  out.push_back({Design::bernoulli(n, 0.3), oracle::bernoulli(0.3)});
  out.push_back({Design::restricted_bernoulli(n, 0.6), oracle::restricted_bernoulli(n, 0.6)});
  std::vector<int> of(n);
  for (int i = 0; i < n; ++i) of[i] = i / 2;
  out.push_back({Design::cluster(of, n / 4), oracle::cluster(of, n / 4)});
  return out;
}

}  // namespace

TEST(Propensity, BernoulliBinaryWorkedExample) {
  auto g = path_graph(3);
  auto pi = analytic_propensity(Design::bernoulli(3, 0.5), g, kBinary);
  EXPECT_NEAR(pi(1, {1, 1}), 0.375, 1e-15);
  EXPECT_NEAR(pi(1, {1, 0}), 0.125, 1e-15);
  EXPECT_NEAR(pi(1, {0, 1}), 0.375, 1e-15);
  EXPECT_NEAR(pi(1, {0, 0}), 0.125, 1e-15);
}

TEST(Propensity, CrdSymmetricWorkedExample) {
  auto g = path_graph(4);
  auto pi = analytic_propensity(Design::crd(4, 2), g, kSym);
  EXPECT_NEAR(pi(0, {1, 0}), 1.0 / 3, 1e-15);
}

TEST(Propensity, ClusterFullyInternalUnit) {
  auto g = two_triangles();
  auto pi = analytic_propensity(Design::cluster({0, 0, 0, 1, 1, 1}, 1), g, kBinary);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(pi(i, {1, 0}), 0.0);
    EXPECT_NEAR(pi(i, {0, 0}), 0.5, 1e-15);
  }
}

TEST(Propensity, AnalyticAndEnumeratedMatchOracle) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    for (const auto& c : cases(g.size())) {
      for (const auto& m : {kBinary, kSym, kPattern}) {
        const auto want = oracle::propensity(c.p, kind_of(m), g);
        const std::string label = name + " " + c.d.describe() + " " + to_string(m.kind);
        auto e = enumerated_propensity(c.d, g, m, false);
        EXPECT_EQ(e.marginal.provenance, Provenance::enumerated);
        expect_table(e.marginal, want, 1e-13, label);
        if (has_analytic_propensity(c.d, m)) {
          auto a = analytic_propensity(c.d, g, m);
          EXPECT_EQ(a.provenance, Provenance::analytic);
          expect_table(a, want, 1e-12, label + " analytic");
        }
      }
    }
  }
}

TEST(Propensity, RowsSumToOneAndInRange) {
  for (const auto& [name, g] : corpus::graphs(8)) {
    for (const auto& c : cases(g.size())) {
      auto pi = best_available_propensity(c.d, g, kSym, 1000, 1);
      for (int i = 0; i < pi.units(); ++i) {
        double s = 0;
        for (double v : pi.row(i)) {
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12) << name;
      }
    }
  }
}

TEST(Propensity, JointMarginalizesAndExcludesDiagonal) {
  auto g = cycle_graph(5);
  auto e = enumerated_propensity(Design::crd(5, 2), g, kBinary, true);
  ASSERT_FALSE(e.joint.empty());
  EXPECT_THROW(e.joint(0, {0, 0}, 0, {0, 0}), std::invalid_argument);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      if (i == j) continue;
      for (int zi = 0; zi < 2; ++zi)
        for (int ei = 0; ei < 2; ++ei) {
          double s = 0;
          for (int zj = 0; zj < 2; ++zj)
            for (int ej = 0; ej < 2; ++ej) s += e.joint(i, {zi, ei}, j, {zj, ej});
          EXPECT_NEAR(s, e.marginal(i, {zi, ei}), 1e-14);
        }
    }
  }
  // Against the oracle for one pair.
  const double want = oracle::expect(oracle::crd(5, 2), 5, [&](const oracle::Z& z) {
    return z[0] == 1 && oracle::exposure(oracle::Kind::binary, g, z, 0) == 0 && z[2] == 0 &&
           oracle::exposure(oracle::Kind::binary, g, z, 2) == 1;
  });
  EXPECT_NEAR(e.joint(0, {1, 0}, 2, {0, 1}), want, 1e-15);
}

TEST(Propensity, PointMassIsDegenerate) {
  auto g = path_graph(4);
  auto e = enumerated_propensity(Design::point_mass({1, 0, 0, 1}), g, kBinary, false);
  for (int i = 0; i < 4; ++i)
    for (double v : e.marginal.row(i)) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(Propensity, MonteCarloWithinStandardErrors) {
  auto g = generate_graph(ErdosRenyi{0.2}, 12, 4);
  auto d = Design::crd(12, 5);
  auto exact = analytic_propensity(d, g, kBinary);
  auto mc = mc_propensity(d, g, kBinary, 100000, 17);
  EXPECT_EQ(mc.provenance, Provenance::monte_carlo);
  EXPECT_EQ(mc.samples, 100000);
  int outside = 0, total = 0;
  for (int i = 0; i < 12; ++i) {
    for (int z = 0; z < 2; ++z)
      for (int e = 0; e < exact.levels(i); ++e) {
        const double p = exact(i, {z, e});
        const double se = std::sqrt(p * (1 - p) / 100000.0);
        ++total;
        if (std::abs(mc(i, {z, e}) - p) > 4 * se + 1e-12) ++outside;
      }
  }
  EXPECT_EQ(outside, 0) << "of " << total;
}

TEST(Propensity, MonteCarloRejectsZeroSamples) {
  EXPECT_THROW(mc_propensity(Design::crd(4, 2), path_graph(4), kBinary, 0, 1), std::invalid_argument);
}

TEST(Propensity, IndependentSetOnPath) {
  auto g = std::make_shared<const InterferenceGraph>(path_graph(3));
  auto d = Design::independent_set(g, 1);
  auto e = enumerated_propensity(d, *g, kBinary, false);
  // Unit 1 is treated with no treated neighbor only when it is the lone ego.
  EXPECT_NEAR(e.marginal(1, {1, 0}), 1.0 / 3, 1e-15);
  auto mc = mc_propensity(d, *g, kBinary, 60000, 5);
  EXPECT_NEAR(mc(1, {1, 0}), 1.0 / 3, 4 * std::sqrt(2.0 / 9 / 60000));
}

TEST(Propensity, BestAvailableProvenance) {
  auto g = path_graph(5);
  EXPECT_EQ(best_available_propensity(Design::crd(5, 2), g, kBinary, 10, 1).provenance, Provenance::analytic);
  EXPECT_EQ(best_available_propensity(Design::restricted_bernoulli(5, 0.5), g, kBinary, 10, 1).provenance,
            Provenance::enumerated);
  auto big = generate_graph(ErdosRenyi{0.05}, 60, 1);
  auto pi = best_available_propensity(Design::restricted_bernoulli(60, 0.5), big, kBinary, 2000, 1);
  EXPECT_EQ(pi.provenance, Provenance::monte_carlo);
}

TEST(Propensity, NoAnalyticFormulaThrows) {
  EXPECT_THROW(analytic_propensity(Design::restricted_bernoulli(4, 0.5), path_graph(4), kBinary), NoAnalyticFormula);
}

TEST(Propensity, WeightedExposureProbsCrd) {
  auto g = path_graph(4);
  auto d = Design::crd(4, 2);
  auto w = weighted_exposure_probs(d, g, kSym, WeightDenominator::by_treatment);
  EXPECT_NEAR(w(0, {1, 0}), 1.0 / 6, 1e-15);
  for (int i = 0; i < 4; ++i) {
    double s1 = 0, s0 = 0;
    for (int e = 0; e < w.levels(i); ++e) s1 += w(i, {1, e}), s0 += w(i, {0, e});
    EXPECT_NEAR(s1, 0.25, 1e-15);
    EXPECT_NEAR(s0, 0.25, 1e-15);
  }
  auto ge = empty_graph(4);
  auto we = weighted_exposure_probs(d, ge, kBinary, WeightDenominator::by_treatment);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(we(i, {1, 0}), 0.25, 1e-15);
}

TEST(Propensity, WeightedExposureProbsMatchOracle) {
  auto g = star_graph(5);
  auto d = Design::bernoulli(5, 0.4);
  auto w = weighted_exposure_probs(d, g, kBinary, WeightDenominator::by_treatment);
  const auto p = oracle::bernoulli(0.4);
  for (int i = 0; i < 5; ++i) {
    for (int z = 0; z < 2; ++z)
      for (int e = 0; e < w.levels(i); ++e) {
        const double want = oracle::expect(p, 5, [&](const oracle::Z& v) {
          const int arm = z ? oracle::ones(v) : 5 - oracle::ones(v);
          if (v[i] != z || oracle::exposure(oracle::Kind::binary, g, v, i) != e || arm == 0) return 0.0;
          return 1.0 / arm;
        });
        EXPECT_NEAR(w(i, {z, e}), want, 1e-15);
      }
  }
}

TEST(Propensity, CsvHeader) {
  std::stringstream ss;
  write_propensity_csv(analytic_propensity(Design::crd(3, 1), path_graph(3), kBinary), ss);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "unit,z,e,pi,provenance,se");
}
