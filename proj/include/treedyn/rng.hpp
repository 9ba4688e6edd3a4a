#ifndef TREEDYN_RNG_HPP
#define TREEDYN_RNG_HPP

#include <cstdint>

namespace treedyn {

// Counter-based generator: the SplitMix64 finalizer applied to
// key + (counter+1) * GOLDEN.  Stateless, bit-reproducible across
// platforms; sub-streams are derived by re-keying with mix(key ^ mix(id)).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t at(std::uint64_t counter) const {
    return mix(key_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
  }

  CounterRng substream(std::uint64_t stream_id) const {
    return CounterRng(mix(key_ ^ mix(stream_id)));
  }

  // Uniform in [0,1) with 53 bits.
  double unit(std::uint64_t counter) const {
    return static_cast<double>(at(counter) >> 11) * 0x1.0p-53;
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace treedyn

#endif
