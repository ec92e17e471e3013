#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "corpus.hpp"
#include "ilab/design.hpp"
#include "ilab/outcomes.hpp"

using namespace ilab;

namespace {
const ExposureModel kBinary{ExposureKind::binary_any, ExposedLevel::full_neighborhood};
const ExposureModel kSym{ExposureKind::symmetric_count, ExposedLevel::full_neighborhood};
}  // namespace

TEST(Outcomes, PotentialOutcomeNormalization) {
  auto t = linear_table(kSym, star_graph(4), 1.0, 2.0, 0.5, 0.0);
  EXPECT_EQ(potential_outcome(t, 0, 0, 0), 1.0);
  EXPECT_EQ(potential_outcome(t, 0, 1, 0), 3.0);
  EXPECT_DOUBLE_EQ(potential_outcome(t, 0, 1, 3), 4.5);
  EXPECT_THROW(potential_outcome(t, 1, 0, 2), std::out_of_range);
}

TEST(Outcomes, ConstructorValidates) {
  EXPECT_THROW(PotentialOutcomeTable({0.0}, {0.0}, {{1.0, 2.0}}, {{0.0, 0.0}}), std::invalid_argument);
  EXPECT_THROW(PotentialOutcomeTable({0.0}, {0.0}, {{0.0, 2.0}}, {{0.0}}), std::invalid_argument);
}

TEST(Outcomes, Realize) {
  auto g = path_graph(3);
  auto t = linear_table(kBinary, g, {1, 2, 3}, {10, 20, 30}, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});
  EXPECT_EQ(realize(t, expose(kBinary, g, {0, 0, 0})), (std::vector<double>{1, 2, 3}));
  auto e = empty_graph(3);
  auto te = linear_table(kBinary, e, {1, 2, 3}, {10, 20, 30}, {0, 0, 0}, {0, 0, 0});
  EXPECT_EQ(realize(te, expose(kBinary, e, {1, 1, 1})), (std::vector<double>{11, 22, 33}));
  auto y = realize(t, expose(kBinary, g, {1, 1, 0}));
  EXPECT_DOUBLE_EQ(y[0], 1 + 10 + 0.5 + 0.25);
}

TEST(Outcomes, DecomposeReconstructRoundTrip) {
  std::vector<std::vector<double>> raw{{1.0, 4.0, 2.0, 9.0}, {0.5, -1.0, 3.0, 3.5}};
  auto t = decompose(raw);
  EXPECT_EQ(t.alpha(0), 1.0);
  EXPECT_EQ(t.beta(0), 1.0);
  EXPECT_EQ(t.B(0, 1), 3.0);
  EXPECT_EQ(t.C(0, 1), 9.0 - 2.0 - 4.0 + 1.0);
  EXPECT_EQ(reconstruct(t), raw);
}

TEST(Outcomes, SutvaEstimandsCoincide) {
  auto g = empty_graph(5);
  auto t = linear_table(kBinary, g, {1, 2, 3, 4, 5}, {1, -1, 2, 0, 3}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0});
  const double ate = (1 - 1 + 2 + 0 + 3) / 5.0;
  EXPECT_DOUBLE_EQ(true_estimand(t, kBinary, g, Estimand::DTE), ate);
  EXPECT_DOUBLE_EQ(true_estimand(t, kBinary, g, Estimand::TTE), ate);
}

TEST(Outcomes, TteMinusDteIsMeanGammaPlusTheta) {
  auto g = cycle_graph(5);
  std::vector<double> gam{0.1, 0.2, 0.3, 0.4, 0.5}, th{1, 0, 1, 0, 1};
  auto t = linear_table(kBinary, g, {0, 0, 0, 0, 0}, {1, 1, 1, 1, 1}, gam, th);
  const double diff = true_estimand(t, kBinary, g, Estimand::TTE) - true_estimand(t, kBinary, g, Estimand::DTE);
  EXPECT_NEAR(diff, (1.5 + 3.0) / 5.0, 1e-15);
}

TEST(Outcomes, SymmetricConstantEffectsTte) {
  auto g = star_graph(5);
  auto t = linear_table(kSym, g, 0.0, 2.0, 0.5, 0.25);
  double dbar = 0;
  for (int d : g.degrees()) dbar += d;
  dbar /= g.size();
  EXPECT_NEAR(true_estimand(t, kSym, g, Estimand::TTE), 2.0 + 0.75 * dbar, 1e-14);
  EXPECT_NEAR(true_estimand(t, kSym, g, Estimand::DTE), 2.0, 1e-14);
}

TEST(Outcomes, NoInterferenceGammasVanish) {
  auto g = path_graph(4);
  auto t = linear_table(kBinary, g, 1.0, 2.0, 0.0, 0.0);
  EXPECT_EQ(true_estimand(t, kBinary, g, Estimand::gamma1), 0.0);
  EXPECT_EQ(true_estimand(t, kBinary, g, Estimand::gamma2), 0.0);
}

TEST(Outcomes, MarginalPointMassesGiveTte) {
  auto g = path_graph(4);
  auto t = linear_table(kBinary, g, {1, 2, 3, 4}, {1, 1, 2, 2}, {0.5, 1, 1.5, 2}, {1, 0, 1, 0});
  auto phi = Design::point_mass(Treatment(4, 1));
  auto psi = Design::point_mass(Treatment(4, 0));
  auto r = marginal_estimand(t, g, kBinary, phi, &psi, MarginalForm::theta_phi_psi);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.value, true_estimand(t, kBinary, g, Estimand::TTE), 1e-14);
  auto same = marginal_estimand(t, g, kBinary, phi, &phi, MarginalForm::theta_phi_psi);
  EXPECT_EQ(same.value, 0.0);
}

TEST(Outcomes, MarginalOnEmptyGraphIsAte) {
  auto g = empty_graph(4);
  auto t = linear_table(kBinary, g, {1, 2, 3, 4}, {1, 3, 2, 2}, {0, 0, 0, 0}, {0, 0, 0, 0});
  for (const auto& phi : {Design::crd(4, 2), Design::bernoulli(4, 0.3), Design::crd(4, 1)}) {
    auto r = marginal_estimand(t, g, kBinary, phi, nullptr, MarginalForm::theta_phi);
    EXPECT_NEAR(r.value, 2.0, 1e-14);
  }
}

TEST(Outcomes, MarginalUndefinedArm) {
  auto g = path_graph(3);
  auto t = linear_table(kBinary, g, 1.0, 1.0, 1.0, 0.0);
  auto r = marginal_estimand(t, g, kBinary, Design::point_mass({1, 0, 0}), nullptr, MarginalForm::theta_phi);
  EXPECT_FALSE(r.defined());
}

TEST(Outcomes, UncorrelatedGeneratorMoments) {
  auto g = generate_graph(ErdosRenyi{0.01}, 2000, 3);
  auto t = generate_params(OutcomeGenerator::uncorrelated, g, kBinary, 11);
  double a = 0;
  for (int i = 0; i < t.units(); ++i) a += t.alpha(i);
  EXPECT_NEAR(a / t.units(), 1.0, 4 * 0.1 / std::sqrt(2000.0));
  for (int i = 0; i < t.units(); ++i) {
    EXPECT_EQ(t.B(i, 0), 0.0);
    EXPECT_EQ(t.C(i, 0), 0.0);
  }
}

TEST(Outcomes, CorrelatedGeneratorDeltaPositive) {
  int negative = 0;
  const int draws = 20000;
  // Isolated units keep one level; pair units up so delta shows as C(1).
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < draws; i += 2) edges.emplace_back(i, i + 1);
  auto paired = from_edge_list(draws, edges);
  auto t = generate_params(OutcomeGenerator::correlated, paired, kBinary, 5);
  ASSERT_TRUE(t.has_covariates());
  for (int i = 0; i < t.units(); ++i) negative += t.C(i, 1) <= 0.0;
  EXPECT_LT(negative, draws / 1000);
}

TEST(Outcomes, GeneratorDeterministic) {
  auto g = cycle_graph(20);
  auto a = generate_params(OutcomeGenerator::correlated, g, kBinary, 9);
  auto b = generate_params(OutcomeGenerator::correlated, g, kBinary, 9);
  EXPECT_EQ(reconstruct(a), reconstruct(b));
}

TEST(Outcomes, StructuralRestrictions) {
  auto g = star_graph(4);
  auto t = generate_params(OutcomeGenerator::uncorrelated, g, kSym, 2);
  auto add = restrict_table(t, StructuralModel::additive, ExposureKind::symmetric_count);
  EXPECT_TRUE(satisfies(add, StructuralModel::additive, ExposureKind::symmetric_count));
  auto lin = restrict_table(t, StructuralModel::linear, ExposureKind::symmetric_count);
  EXPECT_TRUE(satisfies(lin, StructuralModel::linear, ExposureKind::symmetric_count));
  auto sharp = restrict_table(t, StructuralModel::sharp_null, ExposureKind::symmetric_count, 0.7);
  EXPECT_TRUE(satisfies(sharp, StructuralModel::sharp_null, ExposureKind::symmetric_count, 0.7));
}

TEST(Outcomes, TableFileRoundTrip) {
  auto g = two_triangles();
  auto t = generate_params(OutcomeGenerator::correlated, g, kSym, 4);
  std::stringstream ss;
  write_table(t, ss);
  auto u = read_table(ss);
  EXPECT_EQ(reconstruct(u), reconstruct(t));
  EXPECT_TRUE(u.has_covariates());
  EXPECT_EQ(u.x(3), t.x(3));
}

TEST(Outcomes, ShiftMovesEveryOutcome) {
  auto g = path_graph(3);
  auto t = linear_table(kBinary, g, 1.0, 2.0, 3.0, 4.0);
  auto s = t.shifted(5.0);
  auto r0 = reconstruct(t), r1 = reconstruct(s);
  for (std::size_t i = 0; i < r0.size(); ++i)
    for (std::size_t k = 0; k < r0[i].size(); ++k) EXPECT_DOUBLE_EQ(r1[i][k], r0[i][k] + 5.0);
}
