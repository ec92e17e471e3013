#pragma once

#include <cstdint>
#include <span>

namespace ilab {

// Binomial coefficient C(n, k); zero for k < 0, k > n or n < 0.
long double binom(long n, long k);

// C(a, k) / C(b, k) computed as a product of ratios, stable for large arguments.
// Zero when k > a; requires k <= b.
long double binom_ratio(long a, long b, long k);

// Hypergeometric-type ratio C(a, x) C(b, y) / C(c, x + y).
long double binom_product_ratio(long a, long x, long b, long y, long c);

// Number of k-subsets of an n-set as a double (for enumeration caps).
double subset_count(long n, long k);

// Sum with pairwise reduction; the result depends only on the order of `values`.
double pairwise_sum(std::span<const double> values);

}  // namespace ilab
