#ifndef POPLOC_RNG_HPP
#define POPLOC_RNG_HPP

#include <cstdint>

namespace poploc {

// SplitMix64 (Steele/Lea/Vigna). One 64-bit word of state, invertible
// finaliser, passes BigCrush. Used everywhere a seeded stream is needed;
// independent sub-streams are derived by re-mixing (seed, stream_id), so
// trials can be generated in any order and still see the same bits.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). Single draw via fixed-point multiply; the bias of
  // O(n / 2^64) is far below anything our statistical tests can resolve.
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  // Uniform double in [0, 1), 53 random bits.
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Deterministic derived stream. Double mixing decorrelates nearby ids.
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t stream_id) {
    SplitMix64 g(seed);
    std::uint64_t a = g.next();
    SplitMix64 h(a ^ (stream_id + 0x632BE59BD9B4E019ull));
    return SplitMix64(h.next());
  }

 private:
  std::uint64_t state_;
};

}  // namespace poploc

#endif  // POPLOC_RNG_HPP
