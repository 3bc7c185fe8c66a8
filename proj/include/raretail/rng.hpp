#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace raretail {

// Deterministic random stream. Chunked sampling derives one stream per chunk
// as stream = seed ^ chunk_index, so results do not depend on thread count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(scramble(seed)) {}

  // Uniform on (0, 1]; never returns 0, so -log(u) is finite.
  double uniform() {
    const std::uint64_t bits = eng_() >> 11;  // 53 random bits
    return (static_cast<double>(bits) + 1.0) * 0x1p-53;
  }

  // Standard normal via Box-Muller. std::normal_distribution is not
  // reproducible across standard libraries; this is.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Exponential with the given rate, by inverse CDF.
  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  static std::uint64_t scramble(std::uint64_t x) {
    // splitmix64 finalizer; decorrelates adjacent chunk indices.
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Rows are generated in fixed-size chunks; the chunk size is part of the
// reproducibility contract (changing it changes the draws).
inline constexpr std::size_t kRngChunkSize = 4096;

inline unsigned worker_count() {
  if (const char* env = std::getenv("RARE_TAIL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs fn(chunk_index, begin, end) over [0, n) split into kRngChunkSize
// pieces. fn must only touch rows in [begin, end).
template <typename Fn>
void for_each_chunk(std::size_t n, Fn&& fn) {
  const std::size_t n_chunks = (n + kRngChunkSize - 1) / kRngChunkSize;
  const unsigned workers = std::min<std::size_t>(worker_count(), n_chunks == 0 ? 1 : n_chunks);
  if (workers <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const std::size_t begin = c * kRngChunkSize;
      fn(c, begin, std::min(n, begin + kRngChunkSize));
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < n_chunks; c += workers) {
        const std::size_t begin = c * kRngChunkSize;
        fn(c, begin, std::min(n, begin + kRngChunkSize));
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace raretail
