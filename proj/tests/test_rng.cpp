#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "wiretap/rng.hpp"

using namespace wiretap;

TEST(Rng, Deterministic) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedStreamsDifferByPurposeAndIndex) {
    const Rng root(1);
    std::set<std::uint64_t> firsts;
    for (const char* p : {"train", "eval", "noise", "messages"}) firsts.insert(root.derive(p).next_u64());
    for (std::uint64_t i = 0; i < 8; ++i) firsts.insert(root.derive("chunk", i).next_u64());
    EXPECT_EQ(firsts.size(), 12U);
    EXPECT_EQ(root.derive("eval").next_u64(), Rng(1).derive("eval").next_u64());
}

TEST(Rng, BelowIsUnbiased) {
    Rng rng(5);
    std::vector<int> counts(3, 0);
    const int draws = 300000;
    for (int i = 0; i < draws; ++i) ++counts[rng.below(3)];
    for (int c : counts) EXPECT_NEAR(c / static_cast<double>(draws), 1.0 / 3.0, 0.005);
}

TEST(Rng, NormalMoments) {
    Rng rng(9);
    const int draws = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < draws; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    EXPECT_NEAR(sum / draws, 0.0, 0.01);
    EXPECT_NEAR(sum2 / draws, 1.0, 0.015);
}

TEST(Rng, UniformRange) {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform(-2.0, 3.0);
        ASSERT_GE(u, -2.0);
        ASSERT_LT(u, 3.0);
    }
}
