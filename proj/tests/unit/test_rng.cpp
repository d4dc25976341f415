#include <gtest/gtest.h>

#include <cmath>

#include "tome/rng.hpp"

using namespace tome;

TEST(Philox, KnownAnswerZero) {
  const auto r = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r, (std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto r = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(r, (std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPiDigits) {
  const auto r = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r, (std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(NormalStream, SameSeedAndStreamReproduce) {
  NormalStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs_stream |= x != c.normal();
    differs_seed |= x != d.normal();
  }
  EXPECT_TRUE(differs_stream);
  EXPECT_TRUE(differs_seed);
}

TEST(NormalStream, UniformRange) {
  NormalStream s(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
  }
}

TEST(NormalStream, MomentsOfStandardNormal) {
  NormalStream s(2024, 3);
  const int n = 1000000;
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    m1 += x;
    m2 += x * x;
    m3 += x * x * x;
    m4 += x * x * x * x;
  }
  m1 /= n, m2 /= n, m3 /= n, m4 /= n;
  // Standard errors of the sample moments of N(0,1): sqrt(Var(x^k)/n).
  EXPECT_LT(std::abs(m1), 5 * std::sqrt(1.0 / n));
  EXPECT_LT(std::abs(m2 - 1), 5 * std::sqrt(2.0 / n));
  EXPECT_LT(std::abs(m3), 5 * std::sqrt(15.0 / n));
  EXPECT_LT(std::abs(m4 - 3), 5 * std::sqrt(96.0 / n));
}

TEST(NormalStream, StreamsAreUncorrelated) {
  NormalStream a(5, 0), b(5, 1);
  const int n = 1000000;
  double c = 0;
  for (int i = 0; i < n; ++i) c += a.normal() * b.normal();
  EXPECT_LT(std::abs(c / n), 5.0 / std::sqrt(n));
}

TEST(NormalStream, SuccessiveDrawsAreUncorrelated) {
  NormalStream s(9, 0);
  const int n = 1000000;
  double prev = s.normal(), c = 0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    c += x * prev;
    prev = x;
  }
  EXPECT_LT(std::abs(c / n), 5.0 / std::sqrt(n));
}
