#include "ilab/combinatorics.hpp"

#include <cmath>

namespace ilab {

long double binom(long n, long k) {
  if (n < 0 || k < 0 || k > n) return 0.0L;
  if (k > n - k) k = n - k;
  long double r = 1.0L;
  for (long j = 1; j <= k; ++j) {
    // Each partial product is the integer C(n - k + j, j).
    r = r * static_cast<long double>(n - k + j) / static_cast<long double>(j);
    if (r < 1e18L) r = std::nearbyint(r);
  }
  return r;
}

long double binom_ratio(long a, long b, long k) {
  if (k < 0 || a < 0 || k > a) return 0.0L;
  long double r = 1.0L;
  for (long j = 0; j < k; ++j) {
    r *= static_cast<long double>(a - j) / static_cast<long double>(b - j);
  }
  return r;
}

long double binom_product_ratio(long a, long x, long b, long y, long c) {
  if (x < 0 || y < 0 || x > a || y > b || x + y > c) return 0.0L;
  return binom(a, x) * binom(b, y) / binom(c, x + y);
}

double subset_count(long n, long k) {
  if (k < 0 || k > n) return 0.0;
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace ilab
