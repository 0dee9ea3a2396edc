#pragma once

// Gaussian multiple-access channels to the legitimate receiver and to the
// eavesdropper:
//   Y = sum_l sqrt(h_l) X_l + N_Y,   Z = sum_l sqrt(g_l) X_l + N_Z.
// Gains are stored as power gains h, g; codewords are scaled by their square root.

#include <cmath>
#include <string>
#include <vector>

#include "wiretap/error.hpp"
#include "wiretap/mlp.hpp"
#include "wiretap/rng.hpp"

namespace wiretap {

struct ChannelParams {
    std::vector<double> h;   // main-channel gains per user
    std::vector<double> g;   // eavesdropper gains per user
    double sigma2_Y = 1.0;
    double sigma2_Z = 1.0;
    // Exact zero noise on both outputs; test-only path.
    bool noise_disabled = false;

    void validate() const {
        if (h.size() != g.size()) throw usage_error("channel: h and g must list the same number of users");
        for (double v : h)
            if (!(v >= 0.0)) throw usage_error("channel: gains must be non-negative");
        for (double v : g)
            if (!(v >= 0.0)) throw usage_error("channel: gains must be non-negative");
        if (!noise_disabled && !(sigma2_Y > 0.0 && sigma2_Z > 0.0))
            throw usage_error("channel: noise variances must be positive");
    }
};

inline std::vector<double> noise_sample(Rng& rng, double variance, std::size_t n) {
    if (!(variance > 0.0)) throw usage_error("noise_sample: variance must be positive");
    const double stddev = std::sqrt(variance);
    std::vector<double> out(n);
    for (double& v : out) v = stddev * rng.normal();
    return out;
}

// Adds i.i.d. N(0, variance) to every entry, row-major order.
inline void add_noise(Tensor2D& signal, Rng& rng, double variance) {
    if (!(variance > 0.0)) throw usage_error("add_noise: variance must be positive");
    const double stddev = std::sqrt(variance);
    for (Eigen::Index i = 0; i < signal.size(); ++i) signal.data()[i] += stddev * rng.normal();
}

namespace detail {

// Batched superposition: each codeword entry is a (batch x n) matrix.
inline Tensor2D superpose(const std::vector<Tensor2D>& codewords, const std::vector<double>& gains) {
    if (codewords.size() != gains.size())
        throw usage_error("channel: " + std::to_string(codewords.size()) + " codewords for " +
                          std::to_string(gains.size()) + " users");
    if (codewords.empty()) throw usage_error("channel: no codewords");
    const Eigen::Index rows = codewords.front().rows();
    const Eigen::Index n = codewords.front().cols();
    Tensor2D sum = Tensor2D::Zero(rows, n);
    for (std::size_t l = 0; l < codewords.size(); ++l) {
        if (codewords[l].rows() != rows || codewords[l].cols() != n)
            throw usage_error("channel: codeword " + std::to_string(l) + " has mismatched length");
        if (gains[l] != 0.0) sum += std::sqrt(gains[l]) * codewords[l];
    }
    return sum;
}

}  // namespace detail

inline Tensor2D transmit_main(const std::vector<Tensor2D>& codewords, const ChannelParams& params, Rng& rng) {
    Tensor2D y = detail::superpose(codewords, params.h);
    if (!params.noise_disabled) add_noise(y, rng, params.sigma2_Y);
    return y;
}

inline Tensor2D transmit_eve(const std::vector<Tensor2D>& codewords, const ChannelParams& params, Rng& rng) {
    Tensor2D z = detail::superpose(codewords, params.g);
    if (!params.noise_disabled) add_noise(z, rng, params.sigma2_Z);
    return z;
}

}  // namespace wiretap
