#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace depthood {

// splitmix64 step. Fast, well distributed, and identical on every platform,
// which keeps seeded runs byte-reproducible.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and up to three tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = base;
  splitmix64(s);
  s ^= 0x8f1bbcdcbfa53e0bULL * (a + 1);
  splitmix64(s);
  s ^= 0x2545f4914f6cdd1dULL * (b + 1);
  splitmix64(s);
  s ^= 0x27220a95fe946fb5ULL * (c + 1);
  return splitmix64(s);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // One warm-up step decorrelates small consecutive seeds.
    splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Stream tags so distinct components of one run never share a stream.
namespace stream {
constexpr std::uint64_t kEncoderInit = 1;
constexpr std::uint64_t kDepthDecoderInit = 2;
constexpr std::uint64_t kImageDecoderInit = 3;
constexpr std::uint64_t kShuffle = 4;
constexpr std::uint64_t kDropoutTrain = 5;
constexpr std::uint64_t kDropoutScore = 6;
constexpr std::uint64_t kEvalSampling = 7;
constexpr std::uint64_t kScenes = 8;
}  // namespace stream

}  // namespace depthood
