#pragma once

#include <cstddef>
#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <thread>
#include <vector>

namespace ilab {

using Engine = std::mt19937_64;

// Counter-based seed derivation: (master, stream, index) -> engine seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

// Stable 64-bit label hash (FNV-1a), used to key RNG streams by name.
std::uint64_t stream_id(std::string_view label);

Engine make_engine(std::uint64_t master, std::uint64_t stream = 0, std::uint64_t index = 0);

// Uniform on [0, 1) from the top 53 bits.
double uniform01(Engine& eng);

// Uniform integer in [0, n).
std::size_t uniform_index(Engine& eng, std::size_t n);

// Runs body(i) for i in [0, count) on up to hardware_concurrency threads.
// Results must be written to per-index slots; no ordering is implied.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (workers > count) workers = count;
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ilab
