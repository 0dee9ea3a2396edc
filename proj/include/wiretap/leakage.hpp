#pragma once

// Neural estimates of the leakage I(S; Z^n).
//
// MINE: statistics network T(s, z) trained on the Donsker-Varadhan bound
//         I >= E_joint[T] - log E_marginal[exp T],
//       marginal pairs formed by shuffling z along the batch axis. The gradient of
//       the log term uses a moving-average denominator (decay 0.99).
// CLUB: Gaussian variational model q(z|s) = N(mu(s), diag sigma^2(s)) fitted by
//       maximum likelihood on 80% of the pairs, then
//         I_CLUB = mean_i log q(z_i|s_i) - mean_{i,j} log q(z_j|s_i)
//       evaluated on the held-out 20%.
//
// Secret bits enter the networks as +-1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "wiretap/channel.hpp"
#include "wiretap/config.hpp"
#include "wiretap/error.hpp"
#include "wiretap/mlp.hpp"
#include "wiretap/reliability.hpp"
#include "wiretap/rng.hpp"
#include "wiretap/security.hpp"

namespace wiretap {

struct SampleSet {
    Tensor2D secrets;       // l x k, entries 0/1, left-most bit first
    Tensor2D observations;  // l x n

    std::size_t size() const { return static_cast<std::size_t>(secrets.rows()); }
    Eigen::Index secret_bits() const { return secrets.cols(); }
    Eigen::Index blocklength() const { return observations.cols(); }

    void validate() const {
        if (secrets.rows() != observations.rows()) throw usage_error("SampleSet: secrets and observations are not row-aligned");
        if (secrets.rows() == 0) throw usage_error("SampleSet: empty");
        if (secrets.cols() == 0 || observations.cols() == 0) throw usage_error("SampleSet: zero-width columns");
    }
};

struct MineConfig {
    std::vector<Eigen::Index> hidden{128, 128};
    unsigned steps = 2000;        // optimizer steps ("epochs" of one batch each)
    unsigned batch_size = 500;
    double learning_rate = 1e-3;
    double ema_decay = 0.99;
    unsigned eval_interval = 10;  // steps between evaluations
    unsigned eval_window = 50;    // final value = median of this many last evaluations
    unsigned eval_batch = 4000;
};

struct ClubConfig {
    std::vector<Eigen::Index> hidden{128, 128};
    unsigned steps = 2000;
    unsigned batch_size = 500;
    double learning_rate = 1e-3;
    double train_fraction = 0.8;
};

struct EstimatorPreset {
    std::string name;
    std::size_t samples = 20000;
    MineConfig mine;
    ClubConfig club;
};

inline EstimatorPreset estimator_preset(const std::string& name) {
    EstimatorPreset p;
    p.name = name;
    if (name == "desk") return p;
    if (name == "smoke") {
        p.samples = 4000;
        p.mine.hidden = {32, 32};
        p.mine.steps = 400;
        p.mine.batch_size = 256;
        p.mine.eval_batch = 2000;
        p.mine.eval_window = 20;
        p.club.hidden = {32, 32};
        p.club.steps = 400;
        p.club.batch_size = 256;
        return p;
    }
    if (name == "full") {
        p.samples = 20000;
        p.mine.hidden = {400, 400, 400, 400};
        p.mine.steps = 100000;
        p.mine.batch_size = 2500;
        p.mine.learning_rate = 1e-4;
        p.mine.eval_batch = 20000;
        p.club.hidden = {400, 400, 400};
        p.club.steps = 500000;
        p.club.batch_size = 2000;
        p.club.learning_rate = 8e-4;
        return p;
    }
    throw usage_error("unknown estimator preset '" + name + "' (expected smoke, desk or full)");
}

// Runs secrets -> phi -> encoders -> eavesdropper channel l times.
// Secrets of all transmitters are concatenated (S1 || S2).
inline SampleSet collect_samples(const CodecSet& set, std::size_t l, Rng rng) {
    if (!set.trained) throw usage_error("collect_samples: codecs are not trained");
    if (l == 0) throw usage_error("collect_samples: sample count must be positive");
    const CodeConfig& config = set.config;
    if (set.codecs.size() != config.L()) throw usage_error("collect_samples: one codec per user is required");
    std::vector<HashPair> hashes;
    unsigned total_bits = 0;
    for (std::size_t i = 0; i < config.T; ++i) {
        hashes.emplace_back(config.seeds[i], config.k[i]);
        total_bits += config.k[i];
    }
    if (total_bits == 0) throw usage_error("collect_samples: transmitters carry no secret bits");

    Rng secret_rng = rng.derive("secrets");
    Rng local_rng = rng.derive("local_randomness");
    Rng helper_rng = rng.derive("helper_messages");
    Rng noise_rng = rng.derive("eve_noise");

    SampleSet out;
    out.secrets.resize(static_cast<Eigen::Index>(l), total_bits);
    out.observations.resize(static_cast<Eigen::Index>(l), config.n);
    constexpr std::size_t chunk = 4096;
    for (std::size_t done = 0; done < l; done += chunk) {
        const std::size_t rows = std::min(chunk, l - done);
        std::vector<Tensor2D> x(config.L());
        unsigned column = 0;
        for (std::size_t user = 0; user < config.L(); ++user) {
            std::vector<std::uint32_t> v(rows);
            if (config.is_transmitter(user)) {
                const HashPair& hash = hashes[user];
                const unsigned k = hash.k1();
                for (std::size_t r = 0; r < rows; ++r) {
                    const auto s = static_cast<std::uint32_t>(secret_rng.below(1ULL << k));
                    const auto b = static_cast<std::uint32_t>(local_rng.below(1ULL << (hash.q1() - k)));
                    v[r] = hash.phi(s, b);
                    for (unsigned bit = 0; bit < k; ++bit)
                        out.secrets(static_cast<Eigen::Index>(done + r), column + bit) = (s >> (k - 1 - bit)) & 1U;
                }
                column += k;
            } else {
                v = detail::draw_messages(helper_rng, config.cardinality(user), rows);
            }
            x[user] = encode_messages(set.codecs[user], v);
        }
        out.observations.middleRows(static_cast<Eigen::Index>(done), static_cast<Eigen::Index>(rows)) =
            transmit_eve(x, config.channel, noise_rng);
    }
    return out;
}

namespace detail {

inline Tensor2D signed_bits(const Tensor2D& bits) { return (2.0 * bits.array() - 1.0).matrix(); }

inline std::vector<std::size_t> permutation(std::size_t size, Rng& rng) {
    std::vector<std::size_t> p(size);
    std::iota(p.begin(), p.end(), 0);
    for (std::size_t i = size; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
    return p;
}

// Rows [joint; marginal]: joint pairs (s_i, z_i), marginal pairs (s_i, z_perm(i)).
inline Tensor2D mine_inputs(const Tensor2D& s, const Tensor2D& z, const std::vector<std::size_t>& rows, Rng& rng) {
    const auto b = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index k = s.cols();
    const Eigen::Index n = z.cols();
    const auto shuffled = permutation(rows.size(), rng);
    Tensor2D in(2 * b, k + n);
    for (Eigen::Index r = 0; r < b; ++r) {
        const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
        const auto j = static_cast<Eigen::Index>(rows[shuffled[static_cast<std::size_t>(r)]]);
        in.row(r).head(k) = s.row(i);
        in.row(r).tail(n) = z.row(i);
        in.row(b + r).head(k) = s.row(i);
        in.row(b + r).tail(n) = z.row(j);
    }
    return in;
}

inline std::vector<std::size_t> draw_rows(std::size_t count, std::size_t population, Rng& rng) {
    std::vector<std::size_t> rows(count);
    for (auto& r : rows) r = rng.below(population);
    return rows;
}

// log of mean of exp over a column vector, shifted for stability.
inline double log_mean_exp(const Eigen::Ref<const Eigen::VectorXd>& t) {
    const double peak = t.maxCoeff();
    return peak + std::log((t.array() - peak).exp().mean());
}

inline double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    double m = values[mid];
    if (values.size() % 2 == 0) {
        const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lower);
    }
    return m;
}

}  // namespace detail

struct LeakageEstimate {
    double value = 0.0;         // max(0, raw)
    double raw = 0.0;
    double ci_halfwidth = 0.0;  // 1.96 * standard error over the smoothing window
    std::size_t samples = 0;
    std::size_t floored = 0;    // CLUB: variance entries floored at 1e-6
    std::vector<double> trace;  // MINE: evaluation history
};

inline LeakageEstimate mine_estimate(const SampleSet& samples, const MineConfig& cfg, Rng rng) {
    samples.validate();
    if (cfg.batch_size == 0 || cfg.steps == 0 || cfg.eval_interval == 0 || cfg.eval_window == 0)
        throw usage_error("mine_estimate: batch, steps and evaluation settings must be positive");
    const Tensor2D s = detail::signed_bits(samples.secrets);
    const Tensor2D& z = samples.observations;
    const std::size_t l = samples.size();
    Rng init_rng = rng.derive("init");
    Rng batch_rng = rng.derive("batches");
    Rng eval_rng = rng.derive("evaluation");
    MlpModel net = MlpModel::build(s.cols() + z.cols(), cfg.hidden, 1, Activation::linear, init_rng);
    AdamState state(net, AdamConfig{cfg.learning_rate});
    ForwardCache cache;
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, l);
    const std::size_t eval_batch = std::min<std::size_t>(cfg.eval_batch, l);
    const auto b = static_cast<Eigen::Index>(batch);
    double moving_average = 0.0;

    LeakageEstimate result;
    result.samples = l;
    for (unsigned step = 0; step < cfg.steps; ++step) {
        const Tensor2D in = detail::mine_inputs(s, z, detail::draw_rows(batch, l, batch_rng), batch_rng);
        const Tensor2D t = forward(net, in, &cache);
        const auto joint = t.col(0).head(b);
        const auto marginal = t.col(0).tail(b);
        const double peak = marginal.maxCoeff();
        const Eigen::VectorXd shifted = (marginal.array() - peak).exp();
        const double mean_exp = std::exp(peak) * shifted.mean();
        moving_average = step == 0 ? mean_exp : cfg.ema_decay * moving_average + (1.0 - cfg.ema_decay) * mean_exp;
        if (!std::isfinite(moving_average) || !t.allFinite())
            throw training_error("mine_estimate: statistics network diverged at step " + std::to_string(step + 1) +
                                 " (moving average " + std::to_string(moving_average) + ")");
        Tensor2D grad(2 * b, 1);
        grad.col(0).head(b).setConstant(-1.0 / static_cast<double>(batch));
        grad.col(0).tail(b) = (marginal.array().exp() / (static_cast<double>(batch) * moving_average)).matrix();
        adam_step(net, backward(net, cache, grad), state, "mine_estimate");

        if ((step + 1) % cfg.eval_interval == 0) {
            const Tensor2D eval_in = detail::mine_inputs(s, z, detail::draw_rows(eval_batch, l, eval_rng), eval_rng);
            const Tensor2D te = forward(net, eval_in);
            const auto eb = static_cast<Eigen::Index>(eval_batch);
            result.trace.push_back(te.col(0).head(eb).mean() - detail::log_mean_exp(te.col(0).tail(eb)));
        }
    }
    if (result.trace.empty()) throw usage_error("mine_estimate: steps shorter than one evaluation interval");
    const std::size_t window = std::min<std::size_t>(cfg.eval_window, result.trace.size());
    const std::vector<double> tail(result.trace.end() - static_cast<std::ptrdiff_t>(window), result.trace.end());
    result.raw = detail::median(tail);
    result.value = std::max(0.0, result.raw);
    const double mean = std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(window);
    double var = 0.0;
    for (double v : tail) var += (v - mean) * (v - mean);
    var /= std::max<std::size_t>(1, window - 1);
    result.ci_halfwidth = 1.96 * std::sqrt(var / static_cast<double>(window));
    return result;
}

inline constexpr double club_variance_floor = 1e-6;

// Gaussian variational model q(z|s) used by CLUB.
struct ClubModel {
    MlpModel mean;
    MlpModel log_variance;

    // log q(z|s) rows summed over coordinates; variances floored at 1e-6.
    struct Prediction {
        Tensor2D mu;
        Tensor2D logvar;
        std::size_t floored = 0;
    };

    Prediction predict(const Tensor2D& signed_secrets) const {
        Prediction p;
        p.mu = forward(mean, signed_secrets);
        p.logvar = forward(log_variance, signed_secrets);
        const double floor = std::log(club_variance_floor);
        for (Eigen::Index i = 0; i < p.logvar.size(); ++i) {
            if (p.logvar.data()[i] < floor) {
                p.logvar.data()[i] = floor;
                ++p.floored;
            }
        }
        return p;
    }
};

// First term of I_CLUB: mean over positive pairs of log q(z_i | s_i).
inline double club_positive_term(const Tensor2D& z, const Tensor2D& mu, const Tensor2D& logvar) {
    const Eigen::Index n = z.cols();
    const double log2pi = std::log(2.0 * std::numbers::pi);
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const auto inv_var = (-logvar.row(i).array()).exp();
        total += -0.5 * (((z.row(i) - mu.row(i)).array().square() * inv_var).sum() + logvar.row(i).sum() +
                         static_cast<double>(n) * log2pi);
    }
    return total / static_cast<double>(z.rows());
}

// Second term: mean over all (i, j) of log q(z_j | s_i). The inner sum over j
// uses sum_j (z_j - mu_i)^2 = S2 - 2 mu_i S1 + l mu_i^2 with column sums S1, S2.
inline double club_negative_term(const Tensor2D& z, const Tensor2D& mu, const Tensor2D& logvar) {
    const Eigen::Index n = z.cols();
    const auto l = static_cast<double>(z.rows());
    const double log2pi = std::log(2.0 * std::numbers::pi);
    const Eigen::RowVectorXd s1 = z.colwise().sum();
    const Eigen::RowVectorXd s2 = z.array().square().matrix().colwise().sum();
    double total = 0.0;
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
        const auto inv_var = (-logvar.row(i).array()).exp();
        const auto spread = s2.array() - 2.0 * mu.row(i).array() * s1.array() + l * mu.row(i).array().square();
        total += -0.5 * ((spread * inv_var).sum() / l + logvar.row(i).sum() + static_cast<double>(n) * log2pi);
    }
    return total / static_cast<double>(mu.rows());
}

inline ClubModel fit_club_model(const Tensor2D& signed_secrets, const Tensor2D& z, const ClubConfig& cfg, Rng rng,
                                std::size_t* floored = nullptr) {
    Rng init_rng = rng.derive("init");
    Rng batch_rng = rng.derive("batches");
    ClubModel model;
    model.mean = MlpModel::build(signed_secrets.cols(), cfg.hidden, z.cols(), Activation::linear, init_rng);
    model.log_variance = MlpModel::build(signed_secrets.cols(), cfg.hidden, z.cols(), Activation::linear, init_rng);
    AdamState mean_state(model.mean, AdamConfig{cfg.learning_rate});
    AdamState var_state(model.log_variance, AdamConfig{cfg.learning_rate});
    const std::size_t l = static_cast<std::size_t>(z.rows());
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, l);
    const double floor = std::log(club_variance_floor);
    ForwardCache mean_cache, var_cache;
    std::size_t floor_hits = 0;
    for (unsigned step = 0; step < cfg.steps; ++step) {
        const auto rows = detail::draw_rows(batch, l, batch_rng);
        Tensor2D s_batch(static_cast<Eigen::Index>(batch), signed_secrets.cols());
        Tensor2D z_batch(static_cast<Eigen::Index>(batch), z.cols());
        for (std::size_t r = 0; r < batch; ++r) {
            s_batch.row(static_cast<Eigen::Index>(r)) = signed_secrets.row(static_cast<Eigen::Index>(rows[r]));
            z_batch.row(static_cast<Eigen::Index>(r)) = z.row(static_cast<Eigen::Index>(rows[r]));
        }
        const Tensor2D mu = forward(model.mean, s_batch, &mean_cache);
        Tensor2D logvar = forward(model.log_variance, s_batch, &var_cache);
        Tensor2D grad_mu(mu.rows(), mu.cols());
        Tensor2D grad_logvar(mu.rows(), mu.cols());
        const double scale = 1.0 / static_cast<double>(batch);
        for (Eigen::Index i = 0; i < mu.size(); ++i) {
            double lv = logvar.data()[i];
            const bool clipped = lv < floor;
            if (clipped) {
                lv = floor;
                ++floor_hits;
            }
            const double inv_var = std::exp(-lv);
            const double diff = z_batch.data()[i] - mu.data()[i];
            // negative log-likelihood: 0.5 (diff^2 / var + logvar + log 2pi)
            grad_mu.data()[i] = -diff * inv_var * scale;
            grad_logvar.data()[i] = clipped ? 0.0 : 0.5 * (1.0 - diff * diff * inv_var) * scale;
        }
        adam_step(model.mean, backward(model.mean, mean_cache, grad_mu), mean_state, "club_estimate");
        adam_step(model.log_variance, backward(model.log_variance, var_cache, grad_logvar), var_state, "club_estimate");
    }
    if (floored != nullptr) *floored += floor_hits;
    return model;
}

inline LeakageEstimate club_estimate(const SampleSet& samples, const ClubConfig& cfg, Rng rng) {
    samples.validate();
    if (cfg.batch_size == 0 || cfg.steps == 0) throw usage_error("club_estimate: batch and steps must be positive");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw usage_error("club_estimate: train_fraction must lie in (0,1)");
    const std::size_t l = samples.size();
    const auto train_rows = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(l)));
    if (train_rows == 0 || train_rows == l) throw usage_error("club_estimate: too few samples for a train/eval split");

    Rng split_rng = rng.derive("split");
    const auto order = detail::permutation(l, split_rng);
    const Tensor2D s_all = detail::signed_bits(samples.secrets);
    auto gather = [&](const Tensor2D& m, std::size_t begin, std::size_t end) {
        Tensor2D out(static_cast<Eigen::Index>(end - begin), m.cols());
        for (std::size_t r = begin; r < end; ++r) out.row(static_cast<Eigen::Index>(r - begin)) = m.row(static_cast<Eigen::Index>(order[r]));
        return out;
    };
    const Tensor2D s_train = gather(s_all, 0, train_rows);
    const Tensor2D z_train = gather(samples.observations, 0, train_rows);
    const Tensor2D s_eval = gather(s_all, train_rows, l);
    const Tensor2D z_eval = gather(samples.observations, train_rows, l);

    LeakageEstimate result;
    result.samples = l;
    const ClubModel model = fit_club_model(s_train, z_train, cfg, rng.derive("fit"), &result.floored);
    const auto prediction = model.predict(s_eval);
    result.floored += prediction.floored;
    result.raw = club_positive_term(z_eval, prediction.mu, prediction.logvar) -
                 club_negative_term(z_eval, prediction.mu, prediction.logvar);
    result.value = std::max(0.0, result.raw);
    return result;
}

}  // namespace wiretap
