#pragma once

// Hash-based security layer.
//
// For a nonzero seed lambda in GF(2^q1):
//   phi_lambda(s, b) = lambda^-1 * (s || b)       (encoder side, q1 bits out)
//   psi_lambda(v)    = left-most k1 bits of lambda * v
// so psi_lambda(phi_lambda(s, b)) = s for every s, b. The family
// {psi_lambda} is 2-universal over lambda != 0.
//
// Bit order: index 0 of a bit-string is its left-most bit, which is the most
// significant bit of the stored integer. "s || b" places s in the high bits.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "wiretap/error.hpp"
#include "wiretap/gf2.hpp"
#include "wiretap/rng.hpp"

namespace wiretap {

struct BitString {
    std::uint32_t value = 0;
    unsigned width = 0;

    friend bool operator==(const BitString&, const BitString&) = default;
};

inline BitString make_bits(std::uint32_t value, unsigned width) {
    if (width > 32 || (width < 32 && value >= (1ULL << width)))
        throw usage_error("bit-string value " + std::to_string(value) + " does not fit in " + std::to_string(width) + " bits");
    return {value, width};
}

// "0101" -> {5, 4}. Left-most character is bit index 0.
inline BitString parse_bits(std::string_view text) {
    if (text.empty() || text.size() > 32) throw usage_error("bit-string must have 1..32 characters");
    std::uint32_t value = 0;
    for (char c : text) {
        if (c != '0' && c != '1') throw usage_error("bit-string may only contain '0' and '1': " + std::string(text));
        value = (value << 1) | static_cast<std::uint32_t>(c - '0');
    }
    return {value, static_cast<unsigned>(text.size())};
}

inline std::string format_bits(const BitString& bits) {
    std::string out(bits.width, '0');
    for (unsigned i = 0; i < bits.width; ++i) {
        if ((bits.value >> (bits.width - 1 - i)) & 1U) out[i] = '1';
    }
    return out;
}

// Nonzero element of GF(2^q1).
class Seed {
public:
    Seed(std::uint32_t lambda, unsigned q1) : lambda_{lambda, q1} {
        if (q1 < 1 || q1 > gf2::max_degree) throw usage_error("seed width must be in 1..16");
        if (lambda == 0) throw usage_error("seed must be nonzero");
        if (lambda >= (1U << q1)) throw usage_error("seed does not fit in " + std::to_string(q1) + " bits");
    }

    static Seed parse(std::string_view text) {
        const BitString bits = parse_bits(text);
        return Seed(bits.value, bits.width);
    }

    const gf2::FieldElement& lambda() const { return lambda_; }
    std::uint32_t value() const { return lambda_.value; }
    unsigned width() const { return lambda_.width; }
    std::string to_string() const { return format_bits({lambda_.value, lambda_.width}); }

    friend bool operator==(const Seed&, const Seed&) = default;

private:
    gf2::FieldElement lambda_;
};

// (s || b): s occupies the k1 left-most bits.
inline BitString concat(const BitString& s, const BitString& b) {
    if (s.width + b.width > 32) throw usage_error("concatenation wider than 32 bits");
    return {(s.value << b.width) | b.value, s.width + b.width};
}

inline BitString encode_phi(const BitString& s, const BitString& b, const Seed& seed, const gf2::FieldSpec& field) {
    const unsigned q1 = field.q();
    if (seed.width() != q1) throw usage_error("encode_phi: seed width does not match field degree");
    if (s.width > q1 || s.width + b.width != q1)
        throw usage_error("encode_phi: widths of s (" + std::to_string(s.width) + ") and b (" + std::to_string(b.width) +
                          ") must add to q1=" + std::to_string(q1));
    const BitString joined = concat(s, b);
    const gf2::FieldElement v = gf2::gf_mul(gf2::gf_inv(seed.lambda(), field), field.element(joined.value), field);
    return {v.value, q1};
}

inline BitString decode_psi(const BitString& v, const Seed& seed, unsigned k1, const gf2::FieldSpec& field) {
    const unsigned q1 = field.q();
    if (seed.width() != q1) throw usage_error("decode_psi: seed width does not match field degree");
    if (v.width != q1) throw usage_error("decode_psi: input width must equal q1=" + std::to_string(q1));
    if (k1 > q1) throw usage_error("decode_psi: k1 exceeds q1");
    const gf2::FieldElement product = gf2::gf_mul(seed.lambda(), field.element(v.value), field);
    return {product.value >> (q1 - k1), k1};
}

// Precomputed phi/psi for one seed: the reliability layer evaluates these once
// per simulated message, so the field arithmetic is folded into two tables.
class HashPair {
public:
    HashPair(const Seed& seed, unsigned k1) : seed_(seed), field_(seed.width()), k1_(k1) {
        const unsigned q1 = seed.width();
        if (k1 > q1) throw usage_error("secret width k1=" + std::to_string(k1) + " exceeds q1=" + std::to_string(q1));
        const std::uint32_t size = field_.order();
        const gf2::FieldElement inverse = gf2::gf_inv(seed.lambda(), field_);
        phi_.resize(size);
        psi_.resize(size);
        for (std::uint32_t x = 0; x < size; ++x) {
            phi_[x] = gf2::gf_mul(inverse, field_.element(x), field_).value;
            psi_[x] = gf2::gf_mul(seed.lambda(), field_.element(x), field_).value >> (q1 - k1);
        }
    }

    const Seed& seed() const { return seed_; }
    unsigned q1() const { return field_.q(); }
    unsigned k1() const { return k1_; }

    std::uint32_t phi(std::uint32_t s, std::uint32_t b) const {
        return phi_.at((s << (q1() - k1_)) | b);
    }
    std::uint32_t psi(std::uint32_t v) const { return psi_.at(v); }

private:
    Seed seed_;
    gf2::FieldSpec field_;
    unsigned k1_;
    std::vector<std::uint32_t> phi_;
    std::vector<std::uint32_t> psi_;
};

// Fresh local randomness b, uniform on {0,1}^(q1-k1).
inline BitString draw_local_randomness(Rng& rng, unsigned q1, unsigned k1) {
    const unsigned width = q1 - k1;
    return {static_cast<std::uint32_t>(rng.below(1ULL << width)), width};
}

// Argmin of the leakage oracle; ties go to the numerically smallest lambda.
inline Seed select_seed(const std::vector<Seed>& candidates, const std::function<double(const Seed&)>& leakage_oracle) {
    if (candidates.empty()) throw usage_error("select_seed: candidate list is empty");
    const Seed* best = nullptr;
    double best_leakage = std::numeric_limits<double>::infinity();
    for (const Seed& candidate : candidates) {
        const double leakage = leakage_oracle(candidate);
        if (best == nullptr || leakage < best_leakage ||
            (leakage == best_leakage && candidate.value() < best->value())) {
            best = &candidate;
            best_leakage = leakage;
        }
    }
    return *best;
}

// Every nonzero lambda when q1 <= 6; otherwise the supplied subset (the
// identity seed when none is given).
inline std::vector<Seed> seed_candidates(unsigned q1, const std::vector<Seed>& configured = {}) {
    std::vector<Seed> out;
    if (q1 <= 6) {
        for (std::uint32_t lambda = 1; lambda < (1U << q1); ++lambda) out.emplace_back(lambda, q1);
        return out;
    }
    if (configured.empty()) return {Seed(1, q1)};
    for (const Seed& s : configured) {
        if (s.width() != q1) throw usage_error("seed_candidates: candidate width does not match q1");
        out.push_back(s);
    }
    return out;
}

}  // namespace wiretap
