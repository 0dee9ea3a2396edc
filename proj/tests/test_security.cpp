#include <gtest/gtest.h>

#include <map>

#include "wiretap/security.hpp"

using namespace wiretap;

TEST(BitStrings, ParseFormatRoundTrip) {
    const BitString b = parse_bits("0001");
    EXPECT_EQ(b.value, 1U);
    EXPECT_EQ(b.width, 4U);
    EXPECT_EQ(format_bits(b), "0001");
    EXPECT_EQ(format_bits(parse_bits("1000000001")), "1000000001");
    EXPECT_EQ(parse_bits("10").value, 2U);  // left-most character is the MSB
    EXPECT_THROW(parse_bits(""), usage_error);
    EXPECT_THROW(parse_bits("012"), usage_error);
    EXPECT_THROW(make_bits(4, 2), usage_error);
}

TEST(BitStrings, ConcatPutsSecretInLeadingBits) {
    const BitString v = concat(parse_bits("1"), parse_bits("010"));
    EXPECT_EQ(format_bits(v), "1010");
}

TEST(Seeds, Validation) {
    EXPECT_THROW(Seed(0, 4), usage_error);
    EXPECT_THROW(Seed(16, 4), usage_error);
    EXPECT_THROW(Seed(1, 17), usage_error);
    EXPECT_EQ(Seed::parse("000001").width(), 6U);
    EXPECT_EQ(Seed::parse("0101").to_string(), "0101");
}

TEST(Hash, IdentitySeedPassesThrough) {
    // lambda = 1: phi is the plain concatenation and psi takes the leading bits.
    const gf2::FieldSpec f(4);
    const Seed one = Seed::parse("0001");
    const BitString v = encode_phi(parse_bits("1"), parse_bits("011"), one, f);
    EXPECT_EQ(format_bits(v), "1011");
    EXPECT_EQ(format_bits(decode_psi(v, one, 1, f)), "1");
}

TEST(Hash, RoundTripAllSeedsUpToQ10) {
    for (unsigned q1 = 1; q1 <= 10; ++q1) {
        const gf2::FieldSpec f(q1);
        for (std::uint32_t lambda = 1; lambda < f.order(); ++lambda) {
            const Seed seed(lambda, q1);
            for (unsigned k1 : {0U, 1U, q1 / 2, q1}) {
                const HashPair pair(seed, k1);
                for (std::uint32_t s = 0; s < (1U << k1); ++s)
                    for (std::uint32_t b = 0; b < (1U << (q1 - k1)); ++b)
                        ASSERT_EQ(pair.psi(pair.phi(s, b)), s) << "q1=" << q1 << " lambda=" << lambda;
            }
        }
    }
}

TEST(Hash, TablesMatchFieldArithmetic) {
    for (unsigned q1 : {4U, 6U}) {
        const gf2::FieldSpec f(q1);
        for (std::uint32_t lambda = 1; lambda < f.order(); ++lambda) {
            const Seed seed(lambda, q1);
            const unsigned k1 = 2;
            const HashPair pair(seed, k1);
            for (std::uint32_t s = 0; s < 4; ++s)
                for (std::uint32_t b = 0; b < (1U << (q1 - k1)); ++b) {
                    const BitString v = encode_phi(make_bits(s, k1), make_bits(b, q1 - k1), seed, f);
                    ASSERT_EQ(v.value, pair.phi(s, b));
                    ASSERT_EQ(decode_psi(v, seed, k1, f).value, pair.psi(v.value));
                }
        }
    }
}

TEST(Hash, PhiIsABijection) {
    const HashPair pair(Seed(0b1011, 4), 1);
    std::uint32_t seen = 0;
    for (std::uint32_t s = 0; s < 2; ++s)
        for (std::uint32_t b = 0; b < 8; ++b) seen |= 1U << pair.phi(s, b);
    EXPECT_EQ(seen, 0xFFFFU);
}

// P_lambda[psi(x) = psi(x')] <= 2^-k1 for every x != x', lambda uniform over nonzero seeds.
TEST(Hash, TwoUniversalityBruteForce) {
    for (unsigned q1 = 2; q1 <= 8; ++q1) {
        for (unsigned k1 = 1; k1 <= q1; ++k1) {
            const std::uint32_t order = 1U << q1;
            std::vector<std::vector<std::uint32_t>> tables;
            for (std::uint32_t lambda = 1; lambda < order; ++lambda) {
                const HashPair pair(Seed(lambda, q1), k1);
                std::vector<std::uint32_t> t(order);
                for (std::uint32_t v = 0; v < order; ++v) t[v] = pair.psi(v);
                tables.push_back(std::move(t));
            }
            std::size_t worst = 0;
            for (std::uint32_t x = 0; x < order; ++x)
                for (std::uint32_t y = x + 1; y < order; ++y) {
                    std::size_t collisions = 0;
                    for (const auto& t : tables) collisions += t[x] == t[y] ? 1 : 0;
                    worst = std::max(worst, collisions);
                }
            const double bound = 1.0 / static_cast<double>(1U << k1);
            EXPECT_LE(static_cast<double>(worst) / static_cast<double>(tables.size()), bound)
                << "q1=" << q1 << " k1=" << k1;
        }
    }
}

TEST(Hash, CodewordUniformGivenSecret) {
    // With b uniform, phi(s, .) covers 2^(q1-k1) distinct values for each s.
    const HashPair pair(Seed(0b110101, 6), 2);
    for (std::uint32_t s = 0; s < 4; ++s) {
        std::map<std::uint32_t, int> hits;
        for (std::uint32_t b = 0; b < 16; ++b) ++hits[pair.phi(s, b)];
        EXPECT_EQ(hits.size(), 16U);
    }
}

TEST(Hash, WidthErrors) {
    const gf2::FieldSpec f(4);
    EXPECT_THROW(encode_phi(parse_bits("1"), parse_bits("01"), Seed(1, 4), f), usage_error);
    EXPECT_THROW(encode_phi(parse_bits("1"), parse_bits("011"), Seed(1, 5), f), usage_error);
    EXPECT_THROW(decode_psi(parse_bits("101"), Seed(1, 4), 1, f), usage_error);
    EXPECT_THROW(decode_psi(parse_bits("1011"), Seed(1, 4), 5, f), usage_error);
    EXPECT_THROW(HashPair(Seed(1, 4), 5), usage_error);
}

TEST(SeedSelection, ArgminWithSmallestLambdaOnTies) {
    const auto candidates = seed_candidates(4);
    ASSERT_EQ(candidates.size(), 15U);
    const Seed best = select_seed(candidates, [](const Seed& s) { return s.value() == 9 ? 0.1 : 0.5; });
    EXPECT_EQ(best.value(), 9U);
    const Seed tie = select_seed(candidates, [](const Seed& s) { return s.value() >= 5 ? 0.2 : 0.3; });
    EXPECT_EQ(tie.value(), 5U);
    EXPECT_THROW(select_seed({}, [](const Seed&) { return 0.0; }), usage_error);
}

TEST(SeedSelection, LargeFieldsUseConfiguredSubset) {
    EXPECT_EQ(seed_candidates(8).size(), 1U);
    EXPECT_EQ(seed_candidates(8).front().value(), 1U);
    EXPECT_EQ(seed_candidates(8, {Seed(3, 8), Seed(7, 8)}).size(), 2U);
    EXPECT_THROW(seed_candidates(8, {Seed(3, 6)}), usage_error);
}

TEST(LocalRandomness, WidthAndRange) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const BitString b = draw_local_randomness(rng, 6, 2);
        ASSERT_EQ(b.width, 4U);
        ASSERT_LT(b.value, 16U);
    }
}
