#include "ilab/outcomes.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ilab/combinatorics.hpp"
#include "ilab/rng.hpp"

namespace ilab {

PotentialOutcomeTable::PotentialOutcomeTable(std::vector<double> alpha, std::vector<double> beta,
                                             std::vector<std::vector<double>> B,
                                             std::vector<std::vector<double>> C)
    : alpha_(std::move(alpha)), beta_(std::move(beta)), B_(std::move(B)), C_(std::move(C)) {
  const std::size_t n = alpha_.size();
  if (beta_.size() != n || B_.size() != n || C_.size() != n) {
    throw std::invalid_argument("outcome table: parameter vectors differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (B_[i].empty() || B_[i].size() != C_[i].size()) {
      throw std::invalid_argument("outcome table: unit " + std::to_string(i) +
                                  " has mismatched B/C level counts");
    }
    if (B_[i][0] != 0.0 || C_[i][0] != 0.0) {
      throw std::invalid_argument("outcome table: unit " + std::to_string(i) +
                                  " violates B(0) = C(0) = 0");
    }
  }
}

void PotentialOutcomeTable::set_covariates(std::vector<double> x, std::vector<double> y) {
  if (x.size() != alpha_.size() || y.size() != alpha_.size()) {
    throw std::invalid_argument("outcome table: covariate length differs from unit count");
  }
  x_ = std::move(x);
  y_ = std::move(y);
}

PotentialOutcomeTable PotentialOutcomeTable::shifted(double c) const {
  PotentialOutcomeTable t = *this;
  for (auto& a : t.alpha_) a += c;
  return t;
}

PotentialOutcomeTable PotentialOutcomeTable::subset(const std::vector<int>& units) const {
  PotentialOutcomeTable t;
  for (int i : units) {
    t.alpha_.push_back(alpha_[i]);
    t.beta_.push_back(beta_[i]);
    t.B_.push_back(B_[i]);
    t.C_.push_back(C_[i]);
    if (has_covariates()) {
      t.x_.push_back(x_[i]);
      t.y_.push_back(y_[i]);
    }
  }
  return t;
}

double potential_outcome(const PotentialOutcomeTable& t, int i, int z, int e) {
  if (e < 0 || e >= t.levels(i)) {
    throw std::out_of_range("potential_outcome: level " + std::to_string(e) + " out of range for unit " +
                            std::to_string(i));
  }
  return t.alpha(i) + t.beta(i) * z + t.B(i, e) + z * t.C(i, e);
}

std::vector<double> realize(const PotentialOutcomeTable& t, const ExposureAssignment& a) {
  if (static_cast<int>(a.size()) != t.units()) {
    throw std::invalid_argument("realize: assignment length differs from table size");
  }
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = potential_outcome(t, static_cast<int>(i), a[i]);
  return y;
}

PotentialOutcomeTable decompose(const std::vector<std::vector<double>>& raw) {
  const std::size_t n = raw.size();
  std::vector<double> alpha(n), beta(n);
  std::vector<std::vector<double>> B(n), C(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i].size() < 2 || raw[i].size() % 2) {
      throw std::invalid_argument("decompose: unit " + std::to_string(i) + " needs 2K outcomes");
    }
    const std::size_t K = raw[i].size() / 2;
    auto Y = [&](int z, std::size_t e) { return raw[i][z * K + e]; };
    alpha[i] = Y(0, 0);
    beta[i] = Y(1, 0) - Y(0, 0);
    B[i].assign(K, 0.0);
    C[i].assign(K, 0.0);
    for (std::size_t e = 1; e < K; ++e) {
      B[i][e] = Y(0, e) - Y(0, 0);
      C[i][e] = Y(1, e) - Y(1, 0) - Y(0, e) + Y(0, 0);
    }
  }
  return PotentialOutcomeTable(std::move(alpha), std::move(beta), std::move(B), std::move(C));
}

std::vector<std::vector<double>> reconstruct(const PotentialOutcomeTable& t) {
  std::vector<std::vector<double>> raw(static_cast<std::size_t>(t.units()));
  for (int i = 0; i < t.units(); ++i) {
    const int K = t.levels(i);
    raw[i].resize(static_cast<std::size_t>(2 * K));
    for (int z = 0; z < 2; ++z)
      for (int e = 0; e < K; ++e) raw[i][z * K + e] = potential_outcome(t, i, z, e);
  }
  return raw;
}

double contrast_value(const PotentialOutcomeTable& t, const UnitContrast& uc) {
  if (uc.size() != t.units()) throw std::invalid_argument("contrast size differs from table size");
  std::vector<double> d(static_cast<std::size_t>(t.units()));
  for (int i = 0; i < t.units(); ++i) {
    d[i] = potential_outcome(t, i, uc.tau1[i]) - potential_outcome(t, i, uc.tau0[i]);
  }
  return pairwise_sum(d) / t.units();
}

double true_estimand(const PotentialOutcomeTable& t, const ExposureModel& model,
                     const InterferenceGraph& g, Estimand which) {
  return contrast_value(t, resolve(contrast_for(which), model, g));
}

StructuralModel parse_structural_model(std::string_view s) {
  if (s == "unrestricted") return StructuralModel::unrestricted;
  if (s == "additive") return StructuralModel::additive;
  if (s == "constant_effects") return StructuralModel::constant_effects;
  if (s == "linear") return StructuralModel::linear;
  if (s == "constant_additive") return StructuralModel::constant_additive;
  if (s == "sharp_null") return StructuralModel::sharp_null;
  throw std::invalid_argument("unknown structural model: " + std::string(s));
}

namespace {

// Per-level means over the units that have the level.
std::vector<double> level_means(const std::vector<std::vector<double>>& v) {
  std::vector<double> sum, cnt;
  for (const auto& row : v) {
    if (row.size() > sum.size()) {
      sum.resize(row.size(), 0.0);
      cnt.resize(row.size(), 0.0);
    }
    for (std::size_t e = 0; e < row.size(); ++e) {
      sum[e] += row[e];
      cnt[e] += 1.0;
    }
  }
  for (std::size_t e = 0; e < sum.size(); ++e) sum[e] /= cnt[e];
  return sum;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace

PotentialOutcomeTable restrict_table(const PotentialOutcomeTable& t, StructuralModel m,
                                     ExposureKind kind, double beta) {
  const int n = t.units();
  std::vector<double> a(n), b(n);
  std::vector<std::vector<double>> B(n), C(n);
  for (int i = 0; i < n; ++i) {
    a[i] = t.alpha(i);
    b[i] = t.beta(i);
    B[i] = t.B_levels(i);
    C[i] = t.C_levels(i);
  }
  const bool additive = m == StructuralModel::additive || m == StructuralModel::constant_additive;
  const bool constant = m == StructuralModel::constant_effects || m == StructuralModel::constant_additive;
  if (additive)
    for (auto& row : C) std::fill(row.begin(), row.end(), 0.0);
  if (m == StructuralModel::linear) {
    for (int i = 0; i < n; ++i) {
      const double g1 = B[i].size() > 1 ? B[i][1] : 0.0;
      const double t1 = C[i].size() > 1 ? C[i][1] : 0.0;
      for (std::size_t e = 0; e < B[i].size(); ++e) {
        const double mag = exposure_magnitude(kind, static_cast<int>(e));
        B[i][e] = g1 * mag;
        C[i][e] = t1 * mag;
      }
    }
  }
  if (constant) {
    const double ma = mean(a), mb = mean(b);
    const auto mB = level_means(B), mC = level_means(C);
    for (int i = 0; i < n; ++i) {
      a[i] = ma;
      b[i] = mb;
      for (std::size_t e = 0; e < B[i].size(); ++e) {
        B[i][e] = mB[e];
        C[i][e] = mC[e];
      }
    }
  }
  if (m == StructuralModel::sharp_null) std::fill(b.begin(), b.end(), beta);
  PotentialOutcomeTable out(std::move(a), std::move(b), std::move(B), std::move(C));
  if (t.has_covariates()) {
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = t.x(i);
      y[i] = t.y(i);
    }
    out.set_covariates(std::move(x), std::move(y));
  }
  return out;
}

bool satisfies(const PotentialOutcomeTable& t, StructuralModel m, ExposureKind kind, double beta,
               double tol) {
  const auto r = restrict_table(t, m, kind, beta);
  for (int i = 0; i < t.units(); ++i) {
    if (std::abs(r.alpha(i) - t.alpha(i)) > tol || std::abs(r.beta(i) - t.beta(i)) > tol) return false;
    for (int e = 0; e < t.levels(i); ++e) {
      if (std::abs(r.B(i, e) - t.B(i, e)) > tol || std::abs(r.C(i, e) - t.C(i, e)) > tol) return false;
    }
  }
  return true;
}

PotentialOutcomeTable linear_table(const ExposureModel& model, const InterferenceGraph& g,
                                   const std::vector<double>& alpha, const std::vector<double>& beta,
                                   const std::vector<double>& gamma, const std::vector<double>& theta) {
  const int n = g.size();
  if (static_cast<int>(alpha.size()) != n || static_cast<int>(beta.size()) != n ||
      static_cast<int>(gamma.size()) != n || static_cast<int>(theta.size()) != n) {
    throw std::invalid_argument("linear_table: parameter length differs from graph size");
  }
  std::vector<std::vector<double>> B(n), C(n);
  for (int i = 0; i < n; ++i) {
    const int K = level_count(model, g, i);
    B[i].resize(static_cast<std::size_t>(K));
    C[i].resize(static_cast<std::size_t>(K));
    for (int e = 0; e < K; ++e) {
      const double mag = exposure_magnitude(model.kind, e);
      B[i][e] = e == 0 ? 0.0 : gamma[i] * mag;
      C[i][e] = e == 0 ? 0.0 : theta[i] * mag;
    }
  }
  return PotentialOutcomeTable(alpha, beta, std::move(B), std::move(C));
}

PotentialOutcomeTable linear_table(const ExposureModel& model, const InterferenceGraph& g, double alpha,
                                   double beta, double gamma, double theta) {
  const std::size_t n = static_cast<std::size_t>(g.size());
  return linear_table(model, g, std::vector<double>(n, alpha), std::vector<double>(n, beta),
                      std::vector<double>(n, gamma), std::vector<double>(n, theta));
}

OutcomeGenerator parse_outcome_generator(std::string_view s) {
  if (s == "uncorrelated") return OutcomeGenerator::uncorrelated;
  if (s == "correlated") return OutcomeGenerator::correlated;
  throw std::invalid_argument("unknown outcome generator: " + std::string(s));
}

std::string to_string(OutcomeGenerator g) {
  return g == OutcomeGenerator::uncorrelated ? "uncorrelated" : "correlated";
}

PotentialOutcomeTable generate_params(OutcomeGenerator spec, const InterferenceGraph& g,
                                      const ExposureModel& model, std::uint64_t seed) {
  const int n = g.size();
  Engine eng = make_engine(seed, stream_id("outcomes"));
  std::vector<double> alpha(n), beta(n), gamma(n), delta(n), x, y;
  if (spec == OutcomeGenerator::uncorrelated) {
    std::normal_distribution<double> a_dist(1.0, 0.1), d_dist(2.0, 0.1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      alpha[i] = a_dist(eng);
      beta[i] = unit(eng);
      gamma[i] = unit(eng);
      delta[i] = d_dist(eng);
    }
  } else {
    x.resize(n);
    y.resize(n);
    std::lognormal_distribution<double> x_dist(3.0, 0.5);
    std::bernoulli_distribution y_dist(0.4);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::gamma_distribution<double> g_dist(2.0, 0.5);  // shape 2, rate 2
    for (int i = 0; i < n; ++i) {
      x[i] = x_dist(eng);
      y[i] = y_dist(eng) ? 1.0 : 0.0;
      const double lx = std::log(x[i]);
      alpha[i] = 1.0 + 15.0 * lx - 0.5 * y[i] + (1.0 + y[i] * std::abs(lx)) * std_normal(eng);
      beta[i] = -2.0 - 0.8 * x[i] + 0.8 * y[i] + 2.0 * std_normal(eng);
      gamma[i] = 3.0 + 4.0 * lx + 0.1 * std::abs(alpha[i]) * std_normal(eng);
      delta[i] = 2.0 * lx + g_dist(eng);
    }
  }
  auto t = linear_table(model, g, alpha, beta, gamma, delta);
  if (!x.empty()) t.set_covariates(std::move(x), std::move(y));
  return t;
}

MarginalResult marginal_estimand(const PotentialOutcomeTable& t, const InterferenceGraph& g,
                                 const ExposureModel& model, const Design& phi, const Design* psi,
                                 MarginalForm form, const MarginalOptions& opt) {
  const int n = g.size();
  if (t.units() != n || phi.units() != n) throw std::invalid_argument("marginal_estimand: size mismatch");
  if (form == MarginalForm::theta_phi_psi && (psi == nullptr || psi->units() != n)) {
    throw std::invalid_argument("marginal_estimand: theta(phi; psi) needs a second policy of size n");
  }
  auto enumerable = [&](const Design& d) { return support_size_bound(d) <= opt.cap; };
  MarginalResult res;

  // Mean outcome under a policy: exact or Monte Carlo with its standard error.
  auto policy_mean = [&](const Design& d, std::uint64_t stream, double& se) -> double {
    if (enumerable(d)) {
      double m = 0.0;
      for (const auto& pt : enumerate_support(d, opt.cap)) {
        const auto y = realize(t, expose(model, g, pt.z));
        m += pt.probability * pairwise_sum(y) / n;
      }
      se = 0.0;
      return m;
    }
    if (opt.mc_samples < 2) throw SupportTooLarge("marginal_estimand: support too large and no MC budget");
    Engine eng = make_engine(opt.seed, stream);
    std::vector<double> v(static_cast<std::size_t>(opt.mc_samples));
    for (auto& x : v) x = pairwise_sum(realize(t, expose(model, g, sample(d, eng)))) / n;
    const double m = pairwise_sum(v) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    se = std::sqrt(ss / (v.size() - 1) / v.size());
    return m;
  };

  if (form == MarginalForm::theta_phi_psi) {
    double se1 = 0.0, se0 = 0.0;
    const double m1 = policy_mean(phi, stream_id("marginal_phi"), se1);
    const double m0 = policy_mean(*psi, stream_id("marginal_psi"), se0);
    res.value = m1 - m0;
    res.se = std::sqrt(se1 * se1 + se0 * se0);
    res.exact = enumerable(phi) && enumerable(*psi);
    return res;
  }

  std::vector<double> s1(n, 0.0), s0(n, 0.0), p1(n, 0.0), p0(n, 0.0);
  std::vector<std::vector<double>> draws;  // per-draw (z, y) for the MC standard error
  std::vector<Treatment> zs;
  if (enumerable(phi)) {
    for (const auto& pt : enumerate_support(phi, opt.cap)) {
      const auto y = realize(t, expose(model, g, pt.z));
      for (int i = 0; i < n; ++i) {
        if (pt.z[i]) {
          s1[i] += pt.probability * y[i];
          p1[i] += pt.probability;
        } else {
          s0[i] += pt.probability * y[i];
          p0[i] += pt.probability;
        }
      }
    }
  } else {
    if (opt.mc_samples < 2) throw SupportTooLarge("marginal_estimand: support too large and no MC budget");
    res.exact = false;
    Engine eng = make_engine(opt.seed, stream_id("marginal_phi"));
    const double w = 1.0 / static_cast<double>(opt.mc_samples);
    for (long s = 0; s < opt.mc_samples; ++s) {
      Treatment z = sample(phi, eng);
      auto y = realize(t, expose(model, g, z));
      for (int i = 0; i < n; ++i) {
        if (z[i]) {
          s1[i] += w * y[i];
          p1[i] += w;
        } else {
          s0[i] += w * y[i];
          p0[i] += w;
        }
      }
      zs.push_back(std::move(z));
      draws.push_back(std::move(y));
    }
  }
  std::vector<double> m1(n), m0(n), terms(n);
  for (int i = 0; i < n; ++i) {
    if (p1[i] <= 0.0 || p0[i] <= 0.0) {
      res.undefined_units.push_back(i);
      continue;
    }
    m1[i] = s1[i] / p1[i];
    m0[i] = s0[i] / p0[i];
    terms[i] = m1[i] - m0[i];
  }
  if (!res.undefined_units.empty()) {
    res.value = std::nan("");
    return res;
  }
  res.value = pairwise_sum(terms) / n;
  if (!res.exact) {
    // Linearized ratio estimator for the standard error.
    std::vector<double> psi_r(draws.size());
    for (std::size_t r = 0; r < draws.size(); ++r) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += zs[r][i] ? (draws[r][i] - m1[i]) / p1[i] : -(draws[r][i] - m0[i]) / p0[i];
      }
      psi_r[r] = acc / n;
    }
    double ss = 0.0;
    for (double v : psi_r) ss += v * v;
    res.se = std::sqrt(ss / (psi_r.size() - 1) / psi_r.size());
  }
  return res;
}

void write_table(const PotentialOutcomeTable& t, std::ostream& out) {
  out << "# unit alpha beta K B_1..B_{K-1} C_1..C_{K-1}" << (t.has_covariates() ? " x y" : "") << '\n';
  out << "table " << t.units() << " covariates " << (t.has_covariates() ? 1 : 0) << '\n';
  out << std::setprecision(17);
  for (int i = 0; i < t.units(); ++i) {
    out << i << ' ' << t.alpha(i) << ' ' << t.beta(i) << ' ' << t.levels(i);
    for (int e = 1; e < t.levels(i); ++e) out << ' ' << t.B(i, e);
    for (int e = 1; e < t.levels(i); ++e) out << ' ' << t.C(i, e);
    if (t.has_covariates()) out << ' ' << t.x(i) << ' ' << t.y(i);
    out << '\n';
  }
}

PotentialOutcomeTable read_table(std::istream& in) {
  std::string line;
  long n = -1;
  int cov = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream hs(line);
    std::string tag, ctag;
    if (!(hs >> tag >> n >> ctag >> cov) || tag != "table" || ctag != "covariates" || n < 0) {
      throw std::invalid_argument("outcome table: expected header 'table <n> covariates <0|1>'");
    }
    break;
  }
  if (n < 0) throw std::invalid_argument("outcome table: missing header");
  std::vector<double> alpha(n), beta(n), x, y;
  std::vector<std::vector<double>> B(n), C(n);
  if (cov) {
    x.resize(n);
    y.resize(n);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (long r = 0; r < n; ++r) {
    long i = 0, K = 0;
    if (!(in >> i) || i < 0 || i >= n || seen[i]) {
      throw std::invalid_argument("outcome table: bad or repeated unit index on row " + std::to_string(r));
    }
    seen[i] = 1;
    if (!(in >> alpha[i] >> beta[i] >> K) || K < 1) {
      throw std::invalid_argument("outcome table: malformed row for unit " + std::to_string(i));
    }
    B[i].assign(K, 0.0);
    C[i].assign(K, 0.0);
    for (long e = 1; e < K; ++e) in >> B[i][e];
    for (long e = 1; e < K; ++e) in >> C[i][e];
    if (cov) in >> x[i] >> y[i];
    if (!in) throw std::invalid_argument("outcome table: truncated row for unit " + std::to_string(i));
  }
  PotentialOutcomeTable t(std::move(alpha), std::move(beta), std::move(B), std::move(C));
  if (cov) t.set_covariates(std::move(x), std::move(y));
  return t;
}

PotentialOutcomeTable read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open outcome table: " + path);
  return read_table(in);
}

}  // namespace ilab
