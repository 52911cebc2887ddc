#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "smflow/rng.hpp"

using smflow::RandomStream;
using smflow::StreamTag;

TEST_CASE("philox known answers") {
  const auto zero = RandomStream::philox({0, 0, 0, 0}, {0, 0});
  CHECK(zero == RandomStream::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto ones = RandomStream::philox({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                         {0xffffffffu, 0xffffffffu});
  CHECK(ones == RandomStream::Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
}

TEST_CASE("identical addresses replay identical sequences") {
  RandomStream a(42, 7, StreamTag::kNoise);
  RandomStream b(42, 7, StreamTag::kNoise);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(a.seed() == 42u);
}

TEST_CASE("streams differ across seed, replicate and tag") {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed : {1u, 2u}) {
    for (std::uint64_t rep : {0u, 1u, 1u << 20}) {
      for (auto tag : {StreamTag::kData, StreamTag::kNoise, StreamTag::kInitial}) {
        firsts.insert(RandomStream(seed, rep, tag).next_u64());
      }
    }
  }
  CHECK(firsts.size() == 18);
}

TEST_CASE("uniform draws lie in the open unit interval with the right mean") {
  RandomStream rng(3, 0);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normal draws have unit variance") {
  RandomStream rng(5, 1);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0, sum_4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
    sum_4 += z * z * z * z;
  }
  CHECK(std::abs(sum / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(sum_sq / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(sum_4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}
