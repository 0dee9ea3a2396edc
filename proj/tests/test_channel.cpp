#include <gtest/gtest.h>

#include <cmath>

#include "wiretap/channel.hpp"

using namespace wiretap;

namespace {

ChannelParams params(std::vector<double> h, std::vector<double> g, double sy = 1.0, double sz = 1.0) {
    ChannelParams p;
    p.h = std::move(h);
    p.g = std::move(g);
    p.sigma2_Y = sy;
    p.sigma2_Z = sz;
    return p;
}

}  // namespace

TEST(Channel, NoiselessSuperpositionUsesSquareRootGains) {
    ChannelParams p = params({4.0, 0.25}, {1.0, 0.0});
    p.noise_disabled = true;
    Tensor2D x1(1, 2), x2(1, 2);
    x1 << 1.0, -1.0;
    x2 << 2.0, 2.0;
    Rng rng(1);
    const Tensor2D y = transmit_main({x1, x2}, p, rng);
    EXPECT_DOUBLE_EQ(y(0, 0), 2.0 + 1.0);
    EXPECT_DOUBLE_EQ(y(0, 1), -2.0 + 1.0);
    const Tensor2D z = transmit_eve({x1, x2}, p, rng);
    EXPECT_DOUBLE_EQ(z(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(z(0, 1), -1.0);
}

TEST(Channel, NoiseMomentsMonteCarlo) {
    const ChannelParams p = params({1.0}, {1.0}, 0.5, 2.0);
    Rng rng(2);
    const Tensor2D x = Tensor2D::Zero(20000, 8);
    const Tensor2D y = transmit_main({x}, p, rng);
    const Tensor2D z = transmit_eve({x}, p, rng);
    const double n = static_cast<double>(y.size());
    EXPECT_NEAR(y.sum() / n, 0.0, 0.01);
    EXPECT_NEAR(y.squaredNorm() / n, 0.5, 0.01);
    EXPECT_NEAR(z.squaredNorm() / n, 2.0, 0.04);
    // main and eavesdropper noise are independent
    EXPECT_NEAR(y.cwiseProduct(z).sum() / n, 0.0, 0.01);
}

TEST(Channel, ReceivedPowerMatchesGainTimesPower) {
    const ChannelParams p = params({0.3}, {1.0}, 1.0, 1.0);
    Rng rng(3);
    const Tensor2D x = Tensor2D::Constant(20000, 4, std::sqrt(5.0));
    const Tensor2D y = transmit_main({x}, p, rng);
    EXPECT_NEAR(y.squaredNorm() / static_cast<double>(y.size()), 0.3 * 5.0 + 1.0, 0.05);
}

TEST(Channel, Errors) {
    ChannelParams p = params({1.0, 1.0}, {1.0});
    EXPECT_THROW(p.validate(), usage_error);
    p = params({-1.0}, {1.0});
    EXPECT_THROW(p.validate(), usage_error);
    p = params({1.0}, {1.0}, 0.0);
    EXPECT_THROW(p.validate(), usage_error);
    p = params({1.0, 1.0}, {1.0, 1.0});
    Rng rng(1);
    EXPECT_THROW(transmit_main({Tensor2D::Zero(1, 4)}, p, rng), usage_error);
    EXPECT_THROW(transmit_main({Tensor2D::Zero(1, 4), Tensor2D::Zero(1, 5)}, p, rng), usage_error);
    EXPECT_THROW(noise_sample(rng, 0.0, 3), usage_error);
}
