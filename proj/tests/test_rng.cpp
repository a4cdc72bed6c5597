#include <bit>
#include <cmath>
#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "dvcover/rng.hpp"

using namespace dvcover;

TEST(DeriveStream, GoldenValues)
{
    // Pinned outputs; a change here breaks reproducibility of every stored run.
    EXPECT_EQ(derive_stream(0, 0, 0), 0x7322815082cd7547ULL);
    EXPECT_EQ(derive_stream(1, 2, 3), 0xf436f31aac2eab99ULL);
    EXPECT_EQ(derive_stream(42, 7, 11), 0x01c66dd90d9c6b62ULL);
    auto g = make_stream(1, 0, 0);
    EXPECT_EQ(g(), 0x4ef7661bfbf74b5dULL);
    EXPECT_EQ(g(), 0x33947f044d6998adULL);
    auto h = make_stream(1, 0, 0);
    EXPECT_DOUBLE_EQ(uniform01(h), 0.30846250708779366);
    EXPECT_DOUBLE_EQ(exponential(h, 2.0), 0.11250052618385498);
    EXPECT_DOUBLE_EQ(standard_normal(h), 0.25162894963656013);
}

TEST(DeriveStream, AvalancheOnReplicateIndex)
{
    double bits = 0.0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        const auto a = derive_stream(12345, static_cast<std::uint64_t>(i), 17);
        const auto b = derive_stream(12345, static_cast<std::uint64_t>(i) + 1, 17);
        bits += std::popcount(a ^ b);
    }
    EXPECT_GE(bits / trials, 20.0);
    EXPECT_NEAR(bits / trials, 32.0, 1.0);
}

TEST(DeriveStream, NoCollisionsInTenMillion)
{
    std::vector<std::uint64_t> seen;
    seen.reserve(10'000'000);
    for (std::uint64_t r = 0; r < 10'000; ++r)
        for (std::uint64_t a = 0; a < 1'000; ++a) seen.push_back(derive_stream(99, r, a));
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
}

TEST(Xoshiro, Deterministic)
{
    auto a = make_stream(1, 2, 3), b = make_stream(1, 2, 3);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Variates, UniformAndExponentialMoments)
{
    auto g = make_stream(5, 0, 0);
    const int n = 200000;
    double su = 0, se = 0;
    for (int i = 0; i < n; ++i) {
        const double u = uniform01(g);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        se += exponential(g, 4.0);
    }
    EXPECT_NEAR(su / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
    EXPECT_NEAR(se / n, 0.25, 4 * 0.25 / std::sqrt(n));
}

TEST(Variates, StandardNormalMoments)
{
    auto g = make_stream(6, 0, 0);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = standard_normal(g);
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 4 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 4 * std::sqrt(2.0 / n));
}
