#pragma once

// Arithmetic in GF(2^q), 1 <= q <= 16.
//
// Elements are bit-strings of width q stored in the low bits of an integer.
// Bit q-1 of the integer is the left-most bit of the string. Multiplication
// is shift-and-XOR with inline reduction; no tables are needed.
//
// Default reduction polynomial for each degree is the numerically smallest
// irreducible polynomial of that degree (x^4+x+1 for q=4, x^8+x^4+x^3+x+1 for
// q=8, ...). See default_modulus().

#include <cstdint>
#include <string>

#include "wiretap/error.hpp"

namespace wiretap::gf2 {

inline constexpr unsigned max_degree = 16;

// Carry-less product of two polynomials of degree < 32 (result fits in 64 bits).
constexpr std::uint64_t clmul(std::uint32_t a, std::uint32_t b) {
    std::uint64_t result = 0;
    std::uint64_t shifted = a;
    while (b != 0) {
        if (b & 1U) result ^= shifted;
        shifted <<= 1;
        b >>= 1;
    }
    return result;
}

constexpr int poly_degree(std::uint64_t p) {
    int degree = -1;
    while (p != 0) {
        ++degree;
        p >>= 1;
    }
    return degree;
}

// Remainder of a modulo m over GF(2).
constexpr std::uint64_t poly_mod(std::uint64_t a, std::uint64_t m) {
    const int dm = poly_degree(m);
    for (int da = poly_degree(a); da >= dm; da = poly_degree(a)) a ^= m << (da - dm);
    return a;
}

// Exhaustive trial division by every polynomial of degree 1..deg/2.
constexpr bool is_irreducible(std::uint32_t poly) {
    const int degree = poly_degree(poly);
    if (degree < 1) return false;
    for (int d = 1; 2 * d <= degree; ++d) {
        for (std::uint64_t divisor = 1ULL << d; divisor < (1ULL << (d + 1)); ++divisor) {
            if (poly_mod(poly, divisor) == 0) return false;
        }
    }
    return true;
}

constexpr std::uint32_t default_modulus(unsigned q) {
    if (q < 1 || q > max_degree) throw usage_error("gf2: degree must be in 1..16");
    for (std::uint32_t candidate = 1U << q; candidate < (2U << q); ++candidate) {
        if (is_irreducible(candidate)) return candidate;
    }
    throw domain_error("gf2: no irreducible polynomial found");
}

struct FieldElement {
    std::uint32_t value = 0;
    unsigned width = 0;

    friend bool operator==(const FieldElement&, const FieldElement&) = default;
};

class FieldSpec {
public:
    explicit FieldSpec(unsigned q) : FieldSpec(q, default_modulus(q)) {}

    FieldSpec(unsigned q, std::uint32_t modulus) : q_(q), modulus_(modulus) {
        if (q < 1 || q > max_degree) throw usage_error("gf2: degree must be in 1..16, got " + std::to_string(q));
        if (poly_degree(modulus) != static_cast<int>(q))
            throw usage_error("gf2: modulus degree does not match field degree " + std::to_string(q));
        if (!is_irreducible(modulus)) throw usage_error("gf2: modulus " + std::to_string(modulus) + " is reducible");
    }

    unsigned q() const { return q_; }
    std::uint32_t modulus() const { return modulus_; }
    std::uint32_t order() const { return 1U << q_; }

    FieldElement element(std::uint32_t value) const {
        if (value >= order())
            throw usage_error("gf2: value " + std::to_string(value) + " does not fit in " + std::to_string(q_) + " bits");
        return {value, q_};
    }
    FieldElement zero() const { return {0, q_}; }
    FieldElement one() const { return {1, q_}; }

    friend bool operator==(const FieldSpec&, const FieldSpec&) = default;

private:
    unsigned q_;
    std::uint32_t modulus_;
};

inline void check_width(const FieldElement& a, const FieldSpec& spec, const char* op) {
    if (a.width != spec.q() || a.value >= spec.order())
        throw usage_error(std::string(op) + ": element width " + std::to_string(a.width) + " does not match field degree " +
                          std::to_string(spec.q()));
}

// Reduction folded into the shift loop: each doubling of the multiplicand is
// reduced immediately, so intermediates never exceed q bits.
inline FieldElement gf_mul(const FieldElement& a, const FieldElement& b, const FieldSpec& spec) {
    check_width(a, spec, "gf_mul");
    check_width(b, spec, "gf_mul");
    const std::uint32_t top = 1U << spec.q();
    const std::uint32_t mod = spec.modulus();
    std::uint32_t acc = 0;
    std::uint32_t x = a.value;
    std::uint32_t y = b.value;
    while (y != 0) {
        if (y & 1U) acc ^= x;
        y >>= 1;
        x <<= 1;
        if (x & top) x ^= mod;
    }
    return {acc, spec.q()};
}

// a^(2^q - 2) by square-and-multiply.
inline FieldElement gf_inv(const FieldElement& a, const FieldSpec& spec) {
    check_width(a, spec, "gf_inv");
    if (a.value == 0) throw domain_error("gf_inv: zero has no multiplicative inverse");
    FieldElement result = spec.one();
    FieldElement base = a;
    std::uint32_t exponent = spec.order() - 2;
    while (exponent != 0) {
        if (exponent & 1U) result = gf_mul(result, base, spec);
        base = gf_mul(base, base, spec);
        exponent >>= 1;
    }
    return result;
}

inline FieldElement gf_add(const FieldElement& a, const FieldElement& b, const FieldSpec& spec) {
    check_width(a, spec, "gf_add");
    check_width(b, spec, "gf_add");
    return {a.value ^ b.value, spec.q()};
}

}  // namespace wiretap::gf2
