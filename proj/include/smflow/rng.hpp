#pragma once

#include <array>
#include <cstdint>

namespace smflow {

// Stream tags keep the independent sources of randomness of one replicate
// apart: two streams with the same (seed, replicate) but different tags never
// overlap.
enum class StreamTag : std::uint32_t {
  kData = 1,       // SGD data indices theta_n
  kNoise = 2,      // Brownian / cylindrical increments
  kInitial = 3,    // initial particle positions
  kSubsample = 4,  // subsampling for unequal-size W2 comparisons
  kReference = 5,  // reference runs in mean-field studies
};

// Philox4x32-10 counter-based generator.  A stream is addressed by
// (seed, replicate, tag); the 64-bit block counter advances as draws are
// consumed, so identical addresses replay identical sequences regardless of
// which thread runs them.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t replicate, StreamTag tag = StreamTag::kData);

  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1).
  double uniform();

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal();

  std::uint64_t seed() const { return key_[0] | (std::uint64_t{key_[1]} << 32); }

  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  // One Philox4x32-10 bijection; exposed for known-answer tests.
  static Block philox(Block counter, Key key);

 private:
  void refill();

  Key key_;
  Block counter_;
  Block buffer_{};
  int buffered_ = 0;  // number of unread 64-bit halves in buffer_
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace smflow
