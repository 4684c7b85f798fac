#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>

namespace didmiss {

// Worker count: DIDMISS_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Calls fn(i) for i in [0, n) across worker_count() threads in contiguous
// chunks. fn must only write to slots owned by its index. The first
// exception thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// SplitMix64: a small counter-style generator. Streams are derived from
// (seed, index) so each unit / replicate gets its own deterministic stream
// independent of thread scheduling.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t index, std::uint64_t domain);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();

 private:
  std::uint64_t state_;
};

}  // namespace didmiss
