#include "ilab/exposure.hpp"

#include <bit>
#include <stdexcept>

namespace ilab {

ExposureKind parse_exposure_kind(std::string_view s) {
  if (s == "binary" || s == "binary_any") return ExposureKind::binary_any;
  if (s == "symmetric" || s == "symmetric_count") return ExposureKind::symmetric_count;
  if (s == "general" || s == "general_pattern") return ExposureKind::general_pattern;
  throw std::invalid_argument("unknown exposure model: " + std::string(s));
}

std::string to_string(ExposureKind k) {
  switch (k) {
    case ExposureKind::binary_any: return "binary";
    case ExposureKind::symmetric_count: return "symmetric";
    case ExposureKind::general_pattern: return "general";
  }
  return "?";
}

ExposedLevel parse_exposed_level(std::string_view s) {
  if (s == "full" || s == "full_neighborhood") return ExposedLevel::full_neighborhood;
  if (s == "single" || s == "single_treated" || s == "one") return ExposedLevel::single_treated;
  throw std::invalid_argument("unknown exposed-level convention: " + std::string(s));
}

std::string to_string(ExposedLevel k) {
  return k == ExposedLevel::full_neighborhood ? "full" : "single";
}

int unit_exposure(const ExposureModel& model, const InterferenceGraph& g, const Treatment& z, int i) {
  const auto& nb = g.neighbors(i);
  switch (model.kind) {
    case ExposureKind::binary_any:
      for (int j : nb)
        if (z[j]) return 1;
      return 0;
    case ExposureKind::symmetric_count: {
      int c = 0;
      for (int j : nb) c += z[j] ? 1 : 0;
      return c;
    }
    case ExposureKind::general_pattern: {
      if (nb.size() > static_cast<std::size_t>(kMaxPatternDegree)) {
        throw std::domain_error("general exposure refused: unit " + std::to_string(i) +
                                " has degree " + std::to_string(nb.size()));
      }
      int pattern = 0;
      for (std::size_t k = 0; k < nb.size(); ++k)
        if (z[nb[k]]) pattern |= (1 << k);
      return pattern;
    }
  }
  return 0;
}

ExposureAssignment expose(const ExposureModel& model, const InterferenceGraph& g, const Treatment& z) {
  if (static_cast<int>(z.size()) != g.size()) {
    throw std::invalid_argument("expose: treatment vector length differs from graph size");
  }
  ExposureAssignment a(z.size());
  for (int i = 0; i < g.size(); ++i) {
    a[i].z = z[i] ? 1 : 0;
    a[i].e = unit_exposure(model, g, z, i);
  }
  return a;
}

int level_count(const ExposureModel& model, const InterferenceGraph& g, int i) {
  const int d = g.degree(i);
  switch (model.kind) {
    case ExposureKind::binary_any: return 2;
    case ExposureKind::symmetric_count: return d + 1;
    case ExposureKind::general_pattern:
      if (d > kMaxPatternDegree) {
        throw std::domain_error("general exposure refused: unit " + std::to_string(i) +
                                " has degree " + std::to_string(d));
      }
      return 1 << d;
  }
  return 0;
}

std::vector<int> level_counts(const ExposureModel& model, const InterferenceGraph& g) {
  std::vector<int> k(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) k[i] = level_count(model, g, i);
  return k;
}

double exposure_magnitude(ExposureKind kind, int level) {
  if (kind == ExposureKind::general_pattern) return std::popcount(static_cast<unsigned>(level));
  return level;
}

int exposed_level(const ExposureModel& model, const InterferenceGraph& g, int i) {
  const int d = g.degree(i);
  switch (model.kind) {
    case ExposureKind::binary_any: return 1;
    case ExposureKind::symmetric_count:
      if (model.exposed == ExposedLevel::full_neighborhood) return d;
      return d >= 1 ? 1 : -1;
    case ExposureKind::general_pattern:
      if (d > kMaxPatternDegree) return -1;
      if (model.exposed == ExposedLevel::full_neighborhood) return (1 << d) - 1;
      return d >= 1 ? 1 : -1;
  }
  return -1;
}

bool cell_reachable(const ExposureModel& model, const InterferenceGraph& g, int i, Cell c) {
  if (c.z != 0 && c.z != 1) return false;
  if (c.e < 0 || c.e >= level_count(model, g, i)) return false;
  if (model.kind == ExposureKind::binary_any && c.e == 1) return g.degree(i) >= 1;
  return true;
}

Estimand parse_estimand(std::string_view s) {
  if (s == "DTE" || s == "dte") return Estimand::DTE;
  if (s == "TTE" || s == "tte") return Estimand::TTE;
  if (s == "gamma1") return Estimand::gamma1;
  if (s == "gamma2") return Estimand::gamma2;
  throw std::invalid_argument("unknown estimand: " + std::string(s));
}

std::string to_string(Estimand e) {
  switch (e) {
    case Estimand::DTE: return "DTE";
    case Estimand::TTE: return "TTE";
    case Estimand::gamma1: return "gamma1";
    case Estimand::gamma2: return "gamma2";
  }
  return "?";
}

Contrast contrast_for(Estimand e) {
  switch (e) {
    case Estimand::DTE: return {{1, 0}, {0, 0}};
    case Estimand::TTE: return {{1, kExposed}, {0, 0}};
    case Estimand::gamma1: return {{0, kExposed}, {0, 0}};
    case Estimand::gamma2: return {{1, kExposed}, {1, 0}};
  }
  return {};
}

UnitContrast UnitContrast::subset(const std::vector<int>& units) const {
  UnitContrast out;
  out.tau1.reserve(units.size());
  out.tau0.reserve(units.size());
  for (int i : units) {
    out.tau1.push_back(tau1[i]);
    out.tau0.push_back(tau0[i]);
  }
  return out;
}

Cell resolve_cell(const ExposureModel& model, const InterferenceGraph& g, int i, CellSpec spec) {
  if (spec.z != 0 && spec.z != 1) throw std::invalid_argument("cell treatment must be 0 or 1");
  int e = spec.e;
  if (e == kExposed) {
    e = exposed_level(model, g, i);
    if (e < 0) {
      throw std::domain_error("unit " + std::to_string(i) + " has no exposed level under the " +
                              to_string(model.exposed) + " convention");
    }
  }
  if (e < 0 || e >= level_count(model, g, i)) {
    throw std::domain_error("exposure level " + std::to_string(e) + " does not exist for unit " +
                            std::to_string(i));
  }
  return {spec.z, e};
}

UnitContrast resolve(const Contrast& c, const ExposureModel& model, const InterferenceGraph& g) {
  UnitContrast uc;
  uc.tau1.resize(static_cast<std::size_t>(g.size()));
  uc.tau0.resize(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) {
    uc.tau1[i] = resolve_cell(model, g, i, c.tau1);
    uc.tau0[i] = resolve_cell(model, g, i, c.tau0);
  }
  return uc;
}

std::vector<int> contrast_population(const Contrast& c, const ExposureModel& model,
                                     const InterferenceGraph& g) {
  std::vector<int> units;
  for (int i = 0; i < g.size(); ++i) {
    try {
      Cell a = resolve_cell(model, g, i, c.tau1);
      Cell b = resolve_cell(model, g, i, c.tau0);
      if (cell_reachable(model, g, i, a) && cell_reachable(model, g, i, b)) units.push_back(i);
    } catch (const std::domain_error&) {
    }
  }
  return units;
}

}  // namespace ilab
