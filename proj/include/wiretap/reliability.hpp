#pragma once

// Reliability layer: one neural encoder/decoder pair per user.
//
//   encoder: one-hot(2^q) -> relu hidden layers -> n outputs -> power normalization (|x|^2 = nP)
//   decoder: n inputs -> relu hidden layers -> softmax over 2^q messages
//
// Two training procedures share the same models:
//   train_sic  all pairs trained jointly on the sum of losses; decoder l sees the
//              channel output minus the re-encoded estimates of every user decoded
//              before it.
//   train_ptp  each pair trained on its own loss; a user's decoder sees its own
//              codeword plus the codewords of all weaker users as interference.
// Test-time decoding is always successive interference cancellation.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wiretap/channel.hpp"
#include "wiretap/config.hpp"
#include "wiretap/error.hpp"
#include "wiretap/mlp.hpp"
#include "wiretap/rng.hpp"

namespace wiretap {

struct CodecPair {
    MlpModel encoder;
    MlpModel decoder;
};

enum class TrainAlgorithm { sic, ptp };

inline std::string to_string(TrainAlgorithm a) { return a == TrainAlgorithm::sic ? "sic" : "ptp"; }

inline TrainAlgorithm parse_algorithm(const std::string& name) {
    if (name == "sic") return TrainAlgorithm::sic;
    if (name == "ptp") return TrainAlgorithm::ptp;
    throw usage_error("unknown training algorithm '" + name + "' (expected sic or ptp)");
}

struct CodecSet {
    CodeConfig config;
    std::vector<CodecPair> codecs;
    TrainAlgorithm algorithm = TrainAlgorithm::ptp;
    bool trained = false;
    double training_seconds = 0.0;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
};

// Called once per epoch with (epoch index, mean summed loss over the epoch).
using EpochCallback = std::function<void(unsigned, double)>;

inline CodecPair build_codec(const CodeConfig& config, std::size_t user, Rng& init_rng) {
    const auto card = static_cast<Eigen::Index>(config.cardinality(user));
    const auto width = static_cast<Eigen::Index>(config.train.width_for(config.cardinality(user)));
    const std::vector<Eigen::Index> hidden(config.train.hidden_layers, width);
    CodecPair pair;
    pair.encoder =
        MlpModel::build(card, hidden, config.n, Activation::power_norm, init_rng, config.power.at(user));
    pair.decoder = MlpModel::build(config.n, hidden, card, Activation::softmax, init_rng);
    return pair;
}

inline std::vector<CodecPair> build_codecs(const CodeConfig& config, Rng& init_rng) {
    std::vector<CodecPair> out;
    for (std::size_t l = 0; l < config.L(); ++l) out.push_back(build_codec(config, l, init_rng));
    return out;
}

inline Tensor2D encode_messages(const CodecPair& codec, const std::vector<std::uint32_t>& messages,
                                ForwardCache* cache = nullptr) {
    return forward(codec.encoder, one_hot_batch(messages, static_cast<std::size_t>(codec.encoder.input_dim())), cache);
}

namespace detail {

inline std::vector<std::uint32_t> draw_messages(Rng& rng, std::uint32_t cardinality, std::size_t count) {
    std::vector<std::uint32_t> out(count);
    for (auto& m : out) m = static_cast<std::uint32_t>(rng.below(cardinality));
    return out;
}

inline void check_loss(double loss, const std::string& context) {
    if (!std::isfinite(loss)) throw training_error(context + ": loss is not finite");
}

struct TrainingStreams {
    Rng init, messages, noise;
    explicit TrainingStreams(std::uint64_t seed)
        : init(Rng(seed).derive("init")), messages(Rng(seed).derive("messages")), noise(Rng(seed).derive("noise")) {}
};

inline unsigned batches_per_epoch(const TrainConfig& t) { return std::max(1U, t.messages_per_epoch / t.batch_size); }

}  // namespace detail

// Successive-interference-cancellation training on the sum of per-user losses.
inline CodecSet train_sic(const CodeConfig& config, const EpochCallback& on_epoch = {}) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    detail::TrainingStreams streams(config.train.seed);
    CodecSet set;
    set.config = config;
    set.algorithm = TrainAlgorithm::sic;
    set.codecs = build_codecs(config, streams.init);

    const std::size_t L = config.L();
    const AdamConfig adam{config.train.learning_rate};
    std::vector<AdamState> enc_state, dec_state;
    for (const auto& c : set.codecs) {
        enc_state.emplace_back(c.encoder, adam);
        dec_state.emplace_back(c.decoder, adam);
    }
    const auto order = config.decoding_order();
    const std::size_t batch = config.train.batch_size;
    const unsigned batches = detail::batches_per_epoch(config.train);

    std::vector<std::vector<std::uint32_t>> msgs(L);
    std::vector<ForwardCache> enc_cache(L), reenc_cache(L), dec_cache(L);
    std::vector<Tensor2D> codewords(L);
    std::vector<CrossEntropyResult> losses(L);

    for (unsigned epoch = 0; epoch < config.train.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (unsigned b = 0; b < batches; ++b) {
            for (std::size_t l = 0; l < L; ++l) {
                msgs[l] = detail::draw_messages(streams.messages, config.cardinality(l), batch);
                codewords[l] = encode_messages(set.codecs[l], msgs[l], &enc_cache[l]);
            }
            Tensor2D residual = transmit_main(codewords, config.channel, streams.noise);

            double total = 0.0;
            for (std::size_t s = 0; s < L; ++s) {
                const std::size_t u = order[s];
                const Tensor2D probs = forward(set.codecs[u].decoder, residual, &dec_cache[u]);
                losses[u] = cross_entropy_loss(probs, msgs[u]);
                total += losses[u].loss;
                if (s + 1 < L) {
                    const auto estimates = argmax_rows(probs);
                    const Tensor2D reencoded = encode_messages(set.codecs[u], estimates, &reenc_cache[u]);
                    residual -= std::sqrt(config.channel.h[u]) * reencoded;
                }
            }
            detail::check_loss(total, "train_sic epoch " + std::to_string(epoch + 1));
            epoch_loss += total;

            std::vector<MlpGradients> enc_grads(L), dec_grads(L);
            for (std::size_t l = 0; l < L; ++l) enc_grads[l] = MlpGradients::zeros_like(set.codecs[l].encoder);
            Tensor2D grad_next = Tensor2D::Zero(static_cast<Eigen::Index>(batch), config.n);
            for (std::size_t s = L; s-- > 0;) {
                const std::size_t u = order[s];
                dec_grads[u] = backward(set.codecs[u].decoder, dec_cache[u], losses[u].grad_logits,
                                        GradientAt::terminal_pre_activation);
                if (s + 1 < L) {
                    const Tensor2D grad_hat = -std::sqrt(config.channel.h[u]) * grad_next;
                    enc_grads[u] += backward(set.codecs[u].encoder, reenc_cache[u], grad_hat);
                }
                grad_next += dec_grads[u].input;
            }
            for (std::size_t l = 0; l < L; ++l) {
                const Tensor2D grad_x = std::sqrt(config.channel.h[l]) * grad_next;
                enc_grads[l] += backward(set.codecs[l].encoder, enc_cache[l], grad_x);
            }
            const std::string ctx = "train_sic epoch " + std::to_string(epoch + 1);
            for (std::size_t l = 0; l < L; ++l) {
                adam_step(set.codecs[l].encoder, enc_grads[l], enc_state[l], ctx);
                adam_step(set.codecs[l].decoder, dec_grads[l], dec_state[l], ctx);
            }
        }
        set.final_loss = epoch_loss / batches;
        if (on_epoch) on_epoch(epoch, set.final_loss);
    }
    set.trained = true;
    set.training_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return set;
}

// Independent point-to-point training: each user minimizes its own loss and
// treats the codewords of all weaker users as noise.
inline CodecSet train_ptp(const CodeConfig& config, const EpochCallback& on_epoch = {}) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    detail::TrainingStreams streams(config.train.seed);
    CodecSet set;
    set.config = config;
    set.algorithm = TrainAlgorithm::ptp;
    set.codecs = build_codecs(config, streams.init);

    const std::size_t L = config.L();
    const AdamConfig adam{config.train.learning_rate};
    std::vector<AdamState> enc_state, dec_state;
    for (const auto& c : set.codecs) {
        enc_state.emplace_back(c.encoder, adam);
        dec_state.emplace_back(c.decoder, adam);
    }
    auto ascending = config.decoding_order();
    std::reverse(ascending.begin(), ascending.end());
    const std::size_t batch = config.train.batch_size;
    const unsigned batches = detail::batches_per_epoch(config.train);

    std::vector<std::vector<std::uint32_t>> msgs(L);
    std::vector<ForwardCache> enc_cache(L);
    ForwardCache dec_cache;
    std::vector<Tensor2D> codewords(L);

    for (unsigned epoch = 0; epoch < config.train.epochs; ++epoch) {
        double epoch_loss = 0.0;
        const std::string ctx = "train_ptp epoch " + std::to_string(epoch + 1);
        for (unsigned b = 0; b < batches; ++b) {
            for (std::size_t l = 0; l < L; ++l) {
                msgs[l] = detail::draw_messages(streams.messages, config.cardinality(l), batch);
                codewords[l] = encode_messages(set.codecs[l], msgs[l], &enc_cache[l]);
            }
            Tensor2D interference = Tensor2D::Zero(static_cast<Eigen::Index>(batch), config.n);
            double total = 0.0;
            for (std::size_t r = 0; r < L; ++r) {
                const std::size_t u = ascending[r];
                const double amplitude = std::sqrt(config.channel.h[u]);
                Tensor2D received = interference + amplitude * codewords[u];
                if (!config.channel.noise_disabled) add_noise(received, streams.noise, config.channel.sigma2_Y);
                const Tensor2D probs = forward(set.codecs[u].decoder, received, &dec_cache);
                const CrossEntropyResult ce = cross_entropy_loss(probs, msgs[u]);
                detail::check_loss(ce.loss, ctx);
                total += ce.loss;
                const MlpGradients dec_grad =
                    backward(set.codecs[u].decoder, dec_cache, ce.grad_logits, GradientAt::terminal_pre_activation);
                const MlpGradients enc_grad =
                    backward(set.codecs[u].encoder, enc_cache[u], amplitude * dec_grad.input);
                adam_step(set.codecs[u].decoder, dec_grad, dec_state[u], ctx);
                adam_step(set.codecs[u].encoder, enc_grad, enc_state[u], ctx);
                interference += amplitude * codewords[u];
            }
            epoch_loss += total;
        }
        set.final_loss = epoch_loss / batches;
        if (on_epoch) on_epoch(epoch, set.final_loss);
    }
    set.trained = true;
    set.training_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return set;
}

inline CodecSet train(const CodeConfig& config, TrainAlgorithm algorithm, const EpochCallback& on_epoch = {}) {
    return algorithm == TrainAlgorithm::sic ? train_sic(config, on_epoch) : train_ptp(config, on_epoch);
}

// Batched SIC decoding: users in decoding order, each estimate re-encoded and
// its contribution sqrt(h) * x_hat removed before the next stage.
// Returns estimates indexed by user.
inline std::vector<std::vector<std::uint32_t>> decode_sic(const std::vector<CodecPair>& codecs, const Tensor2D& y,
                                                          const CodeConfig& config) {
    if (codecs.size() != config.L()) throw usage_error("decode_sic: one codec per user is required");
    if (y.cols() != static_cast<Eigen::Index>(config.n)) throw usage_error("decode_sic: observation length must be n");
    const auto order = config.decoding_order();
    std::vector<std::vector<std::uint32_t>> estimates(config.L());
    Tensor2D residual = y;
    for (std::size_t s = 0; s < order.size(); ++s) {
        const std::size_t u = order[s];
        estimates[u] = argmax_rows(forward(codecs[u].decoder, residual));
        if (s + 1 < order.size()) residual -= std::sqrt(config.channel.h[u]) * encode_messages(codecs[u], estimates[u]);
    }
    return estimates;
}

// Single observation convenience overload.
inline std::vector<std::uint32_t> decode_sic_one(const std::vector<CodecPair>& codecs, const std::vector<double>& y,
                                                 const CodeConfig& config) {
    Tensor2D row(1, static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = y[i];
    const auto batch = decode_sic(codecs, row, config);
    std::vector<std::uint32_t> out;
    for (const auto& user : batch) out.push_back(user.front());
    return out;
}

// Joint message error rate of the reliability layer alone (no hashing).
inline double joint_error_rate(const std::vector<CodecPair>& codecs, const CodeConfig& config, std::size_t trials,
                               Rng rng, std::size_t chunk = 4096) {
    if (trials == 0) throw usage_error("joint_error_rate: trials must be positive");
    Rng msg_rng = rng.derive("messages");
    Rng noise_rng = rng.derive("noise");
    std::size_t errors = 0;
    for (std::size_t done = 0; done < trials; done += chunk) {
        const std::size_t rows = std::min(chunk, trials - done);
        std::vector<std::vector<std::uint32_t>> msgs(config.L());
        std::vector<Tensor2D> x(config.L());
        for (std::size_t l = 0; l < config.L(); ++l) {
            msgs[l] = detail::draw_messages(msg_rng, config.cardinality(l), rows);
            x[l] = encode_messages(codecs[l], msgs[l]);
        }
        const auto decoded = decode_sic(codecs, transmit_main(x, config.channel, noise_rng), config);
        for (std::size_t r = 0; r < rows; ++r) {
            bool wrong = false;
            for (std::size_t l = 0; l < config.L(); ++l) wrong = wrong || decoded[l][r] != msgs[l][r];
            errors += wrong ? 1 : 0;
        }
    }
    return static_cast<double>(errors) / static_cast<double>(trials);
}

// ---------------------------------------------------------------- baselines

struct TimeSharingConfig {
    double alpha = 0.5;  // n1 / n
    unsigned n1 = 0;
    unsigned n2 = 0;

    static TimeSharingConfig from_alpha(double alpha, unsigned n) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw usage_error("time sharing: alpha must lie in (0,1)");
        TimeSharingConfig ts;
        ts.n1 = static_cast<unsigned>(std::lround(alpha * n));
        if (ts.n1 < 1 || ts.n1 >= n)
            throw usage_error("time sharing: alpha=" + std::to_string(alpha) + " gives an empty subframe for n=" +
                              std::to_string(n));
        ts.n2 = n - ts.n1;
        ts.alpha = static_cast<double>(ts.n1) / n;
        return ts;
    }

    double boosted_power_first(double p1) const { return p1 / alpha; }
    double boosted_power_second(double p2) const { return p2 / (1.0 - alpha); }
};

struct TimeSharingPoint {
    TimeSharingConfig split;
    double pe_first = 0.0;
    double pe_second = 0.0;
    double pe_joint = 0.0;
};

struct TimeSharingResult {
    std::vector<TimeSharingPoint> points;
    std::size_t best = 0;
    const TimeSharingPoint& best_point() const { return points.at(best); }
};

// Single-user code of length n at power P over the main channel of `user`.
inline CodeConfig point_to_point_config(const CodeConfig& base, std::size_t user, unsigned n, double power) {
    CodeConfig c;
    c.n = n;
    c.T = 1;
    c.q = {base.q.at(user)};
    c.k = {0};
    c.seeds = {Seed(1, base.q.at(user))};
    c.power = {power};
    c.channel = base.channel;
    c.channel.h = {base.channel.h.at(user)};
    c.channel.g = {base.channel.g.at(user)};
    c.train = base.train;
    return c;
}

inline TimeSharingResult baseline_time_sharing(const CodeConfig& config, const std::vector<double>& alphas,
                                               std::size_t trials, Rng rng) {
    if (config.L() != 2) throw usage_error("time sharing baseline needs exactly two users");
    if (alphas.empty()) throw usage_error("time sharing baseline needs a nonempty alpha grid");
    TimeSharingResult result;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        TimeSharingPoint point;
        point.split = TimeSharingConfig::from_alpha(alphas[i], config.n);
        const CodeConfig first =
            point_to_point_config(config, 0, point.split.n1, point.split.boosted_power_first(config.power[0]));
        const CodeConfig second =
            point_to_point_config(config, 1, point.split.n2, point.split.boosted_power_second(config.power[1]));
        const CodecSet a = train_ptp(first);
        const CodecSet b = train_ptp(second);
        const Rng eval = rng.derive("time_sharing", i);
        point.pe_first = joint_error_rate(a.codecs, first, trials, eval.derive("first"));
        point.pe_second = joint_error_rate(b.codecs, second, trials, eval.derive("second"));
        // Subframes see independent noise, so errors are independent.
        point.pe_joint = 1.0 - (1.0 - point.pe_first) * (1.0 - point.pe_second);
        result.points.push_back(point);
        if (point.pe_joint < result.points[result.best].pe_joint) result.best = result.points.size() - 1;
    }
    return result;
}

// Single receiver network with a shared trunk and one softmax head per user.
struct JointDecoder {
    MlpModel trunk;
    std::vector<MlpModel> heads;
};

struct JointDecodingCodec {
    CodeConfig config;
    std::vector<MlpModel> encoders;
    JointDecoder decoder;
    double training_seconds = 0.0;

    std::vector<Tensor2D> head_probabilities(const Tensor2D& y) const {
        const Tensor2D features = forward(decoder.trunk, y);
        std::vector<Tensor2D> out;
        for (const auto& head : decoder.heads) out.push_back(forward(head, features));
        return out;
    }
};

inline JointDecodingCodec baseline_joint_decoding(const CodeConfig& config, const EpochCallback& on_epoch = {}) {
    config.validate();
    if (config.L() != 2) throw usage_error("joint decoding baseline needs exactly two users");
    const auto start = std::chrono::steady_clock::now();
    detail::TrainingStreams streams(config.train.seed);
    JointDecodingCodec codec;
    codec.config = config;
    const std::uint32_t widest = std::max(config.cardinality(0), config.cardinality(1));
    const auto width = static_cast<Eigen::Index>(config.train.width_for(widest));
    const std::vector<Eigen::Index> hidden(config.train.hidden_layers, width);
    for (std::size_t l = 0; l < 2; ++l) {
        codec.encoders.push_back(MlpModel::build(config.cardinality(l), hidden, config.n, Activation::power_norm,
                                                 streams.init, config.power[l]));
    }
    const std::vector<Eigen::Index> trunk_hidden(hidden.begin(), hidden.end() - 1);
    codec.decoder.trunk = MlpModel::build(config.n, trunk_hidden, width, Activation::relu, streams.init);
    for (std::size_t l = 0; l < 2; ++l)
        codec.decoder.heads.push_back(MlpModel::build(width, {}, config.cardinality(l), Activation::softmax, streams.init));

    const AdamConfig adam{config.train.learning_rate};
    std::vector<AdamState> enc_state{{codec.encoders[0], adam}, {codec.encoders[1], adam}};
    std::vector<AdamState> head_state{{codec.decoder.heads[0], adam}, {codec.decoder.heads[1], adam}};
    AdamState trunk_state(codec.decoder.trunk, adam);
    const std::size_t batch = config.train.batch_size;
    const unsigned batches = detail::batches_per_epoch(config.train);
    std::vector<ForwardCache> enc_cache(2), head_cache(2);
    ForwardCache trunk_cache;

    for (unsigned epoch = 0; epoch < config.train.epochs; ++epoch) {
        double epoch_loss = 0.0;
        const std::string ctx = "joint decoding epoch " + std::to_string(epoch + 1);
        for (unsigned b = 0; b < batches; ++b) {
            std::vector<std::vector<std::uint32_t>> msgs(2);
            std::vector<Tensor2D> x(2);
            for (std::size_t l = 0; l < 2; ++l) {
                msgs[l] = detail::draw_messages(streams.messages, config.cardinality(l), batch);
                x[l] = forward(codec.encoders[l], one_hot_batch(msgs[l], config.cardinality(l)), &enc_cache[l]);
            }
            const Tensor2D y = transmit_main(x, config.channel, streams.noise);
            const Tensor2D features = forward(codec.decoder.trunk, y, &trunk_cache);
            Tensor2D grad_features = Tensor2D::Zero(features.rows(), features.cols());
            std::vector<MlpGradients> head_grads(2);
            double total = 0.0;
            for (std::size_t l = 0; l < 2; ++l) {
                const Tensor2D probs = forward(codec.decoder.heads[l], features, &head_cache[l]);
                const CrossEntropyResult ce = cross_entropy_loss(probs, msgs[l]);
                total += ce.loss;
                head_grads[l] =
                    backward(codec.decoder.heads[l], head_cache[l], ce.grad_logits, GradientAt::terminal_pre_activation);
                grad_features += head_grads[l].input;
            }
            detail::check_loss(total, ctx);
            epoch_loss += total;
            const MlpGradients trunk_grad = backward(codec.decoder.trunk, trunk_cache, grad_features);
            for (std::size_t l = 0; l < 2; ++l) {
                const MlpGradients enc_grad =
                    backward(codec.encoders[l], enc_cache[l], std::sqrt(config.channel.h[l]) * trunk_grad.input);
                adam_step(codec.encoders[l], enc_grad, enc_state[l], ctx);
                adam_step(codec.decoder.heads[l], head_grads[l], head_state[l], ctx);
            }
            adam_step(codec.decoder.trunk, trunk_grad, trunk_state, ctx);
        }
        if (on_epoch) on_epoch(epoch, epoch_loss / batches);
    }
    codec.training_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return codec;
}

inline double joint_decoding_error_rate(const JointDecodingCodec& codec, std::size_t trials, Rng rng,
                                        std::size_t chunk = 4096) {
    if (trials == 0) throw usage_error("joint_decoding_error_rate: trials must be positive");
    const CodeConfig& config = codec.config;
    Rng msg_rng = rng.derive("messages");
    Rng noise_rng = rng.derive("noise");
    std::size_t errors = 0;
    for (std::size_t done = 0; done < trials; done += chunk) {
        const std::size_t rows = std::min(chunk, trials - done);
        std::vector<std::vector<std::uint32_t>> msgs(2);
        std::vector<Tensor2D> x(2);
        for (std::size_t l = 0; l < 2; ++l) {
            msgs[l] = detail::draw_messages(msg_rng, config.cardinality(l), rows);
            x[l] = forward(codec.encoders[l], one_hot_batch(msgs[l], config.cardinality(l)));
        }
        const auto probs = codec.head_probabilities(transmit_main(x, config.channel, noise_rng));
        const auto d0 = argmax_rows(probs[0]);
        const auto d1 = argmax_rows(probs[1]);
        for (std::size_t r = 0; r < rows; ++r) errors += (d0[r] != msgs[0][r] || d1[r] != msgs[1][r]) ? 1 : 0;
    }
    return static_cast<double>(errors) / static_cast<double>(trials);
}

}  // namespace wiretap
