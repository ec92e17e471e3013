#include <gtest/gtest.h>

#include "corpus.hpp"
#include "ilab/exposure.hpp"
#include "oracle.hpp"

using namespace ilab;

namespace {
ExposureModel model_of(ExposureKind k) { return ExposureModel{k, ExposedLevel::full_neighborhood}; }
}  // namespace

TEST(Exposure, BinaryPath) {
  auto g = path_graph(3);
  auto a = expose(model_of(ExposureKind::binary_any), g, {1, 0, 0});
  EXPECT_EQ(a, (ExposureAssignment{{1, 0}, {0, 1}, {0, 0}}));
}

TEST(Exposure, SymmetricStarCenter) {
  auto g = star_graph(4);
  EXPECT_EQ(unit_exposure(model_of(ExposureKind::symmetric_count), g, {0, 1, 1, 0}, 0), 2);
}

TEST(Exposure, AllControlMeansNoExposure) {
  for (const auto& [name, g] : corpus::graphs()) {
    for (auto k : {ExposureKind::binary_any, ExposureKind::symmetric_count, ExposureKind::general_pattern}) {
      for (auto c : expose(model_of(k), g, Treatment(g.size(), 0))) EXPECT_EQ(c, (Cell{0, 0})) << name;
    }
  }
}

TEST(Exposure, LevelCounts) {
  auto g = star_graph(4);
  EXPECT_EQ(level_count(model_of(ExposureKind::binary_any), g, 1), 2);
  EXPECT_EQ(level_count(model_of(ExposureKind::symmetric_count), g, 0), 4);
  EXPECT_EQ(level_count(model_of(ExposureKind::general_pattern), g, 0), 8);
  auto e = empty_graph(2);
  EXPECT_EQ(level_count(model_of(ExposureKind::symmetric_count), e, 0), 1);
  EXPECT_EQ(level_count(model_of(ExposureKind::binary_any), e, 0), 2);
}

TEST(Exposure, PatternRefusedAboveLimit) {
  auto g = star_graph(kMaxPatternDegree + 2);
  EXPECT_THROW(level_count(model_of(ExposureKind::general_pattern), g, 0), std::domain_error);
}

TEST(Exposure, MatchesOracleOnCorpus) {
  const std::pair<ExposureKind, oracle::Kind> kinds[] = {{ExposureKind::binary_any, oracle::Kind::binary},
                                                         {ExposureKind::symmetric_count, oracle::Kind::count},
                                                         {ExposureKind::general_pattern, oracle::Kind::pattern}};
  for (const auto& [name, g] : corpus::graphs(6)) {
    for (const auto& z : oracle::all_vectors(g.size())) {
      for (auto [k, ok] : kinds) {
        auto a = expose(model_of(k), g, z);
        for (int i = 0; i < g.size(); ++i) {
          ASSERT_EQ(a[i].z, z[i]);
          ASSERT_EQ(a[i].e, oracle::exposure(ok, g, z, i)) << name << " unit " << i;
          ASSERT_LT(a[i].e, level_count(model_of(k), g, i));
        }
      }
    }
  }
}

TEST(Exposure, Magnitude) {
  EXPECT_EQ(exposure_magnitude(ExposureKind::binary_any, 1), 1.0);
  EXPECT_EQ(exposure_magnitude(ExposureKind::symmetric_count, 3), 3.0);
  EXPECT_EQ(exposure_magnitude(ExposureKind::general_pattern, 0b1011), 3.0);
}

TEST(Exposure, ExposedLevelConventions) {
  auto g = star_graph(4);
  ExposureModel sym = model_of(ExposureKind::symmetric_count);
  EXPECT_EQ(exposed_level(sym, g, 0), 3);
  sym.exposed = ExposedLevel::single_treated;
  EXPECT_EQ(exposed_level(sym, g, 0), 1);
  EXPECT_EQ(exposed_level(model_of(ExposureKind::general_pattern), g, 0), 7);
  EXPECT_EQ(exposed_level(model_of(ExposureKind::binary_any), g, 0), 1);
}

TEST(Exposure, Reachability) {
  auto g = star_graph(4);
  auto m = model_of(ExposureKind::binary_any);
  EXPECT_TRUE(cell_reachable(m, g, 0, {1, 1}));
  EXPECT_TRUE(cell_reachable(m, g, 0, {1, 0}));
  auto e = empty_graph(3);
  EXPECT_FALSE(cell_reachable(m, e, 0, {1, 1}));
}

TEST(Exposure, ContrastsAndResolution) {
  auto c = contrast_for(Estimand::DTE);
  EXPECT_EQ(c.tau1, (CellSpec{1, 0}));
  EXPECT_EQ(c.tau0, (CellSpec{0, 0}));
  auto t = contrast_for(Estimand::TTE);
  EXPECT_EQ(t.tau1, (CellSpec{1, kExposed}));
  auto g = star_graph(4);
  auto uc = resolve(t, model_of(ExposureKind::symmetric_count), g);
  EXPECT_EQ(uc.tau1[0], (Cell{1, 3}));
  EXPECT_EQ(uc.tau1[1], (Cell{1, 1}));
  EXPECT_EQ(uc.tau0[2], (Cell{0, 0}));
}

TEST(Exposure, ContrastPopulationDropsIsolatedUnitsForTte) {
  auto g = from_edge_list(4, {{0, 1}});
  auto pop = contrast_population(contrast_for(Estimand::TTE), model_of(ExposureKind::binary_any), g);
  EXPECT_EQ(pop, (std::vector<int>{0, 1}));
  auto all = contrast_population(contrast_for(Estimand::DTE), model_of(ExposureKind::binary_any), g);
  EXPECT_EQ(all.size(), 4u);
}

TEST(Exposure, ParseNames) {
  EXPECT_EQ(parse_exposure_kind("binary_any"), ExposureKind::binary_any);
  EXPECT_EQ(parse_exposure_kind(to_string(ExposureKind::general_pattern)), ExposureKind::general_pattern);
  EXPECT_EQ(parse_estimand("TTE"), Estimand::TTE);
  EXPECT_THROW(parse_exposure_kind("nope"), std::invalid_argument);
}
