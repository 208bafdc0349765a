#pragma once

#include <cstdint>

namespace rcf {

// Counter-based generator built on the splitmix64 finalizer.  Each (seed,
// stream) pair is an independent stream; draw i of a stream is a pure
// function of (seed, stream, i), so parallel consumers stay reproducible
// across platforms and thread counts.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed + kGolden) ^ mix(stream))) {}

  std::uint64_t next_u64() {
    counter_ += kGolden;
    return mix(key_ ^ counter_);
  }

  // uniform on the open interval (0,1)
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rcf
