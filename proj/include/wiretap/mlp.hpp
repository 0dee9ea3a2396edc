#pragma once

// Dense-network engine used by every encoder, decoder and estimator.
// 64-bit floats throughout; batches are rows of a row-major matrix.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "wiretap/error.hpp"
#include "wiretap/rng.hpp"

namespace wiretap {

using Tensor2D = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class Activation { relu, linear, softmax, power_norm };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::linear: return "linear";
        case Activation::softmax: return "softmax";
        case Activation::power_norm: return "power_norm";
    }
    return "?";
}

inline Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "linear") return Activation::linear;
    if (name == "softmax") return Activation::softmax;
    if (name == "power_norm") return Activation::power_norm;
    throw usage_error("unknown activation tag '" + name + "'");
}

// Stabilizer inside the square root of the power-normalization layer.
inline constexpr double power_norm_epsilon = 1e-12;

inline Tensor2D one_hot(std::size_t index, std::size_t cardinality) {
    if (index >= cardinality)
        throw usage_error("one_hot: index " + std::to_string(index) + " out of range for cardinality " +
                          std::to_string(cardinality));
    Tensor2D row = Tensor2D::Zero(1, static_cast<Eigen::Index>(cardinality));
    row(0, static_cast<Eigen::Index>(index)) = 1.0;
    return row;
}

template <typename Index>
Tensor2D one_hot_batch(const std::vector<Index>& indices, std::size_t cardinality) {
    Tensor2D out = Tensor2D::Zero(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(cardinality));
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (static_cast<std::size_t>(indices[r]) >= cardinality) throw usage_error("one_hot_batch: index out of range");
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(indices[r])) = 1.0;
    }
    return out;
}

// Scales each row to squared norm n*P exactly. Zero rows are rejected.
inline Tensor2D power_normalize(const Tensor2D& x, double power) {
    if (power < 0.0) throw usage_error("power_normalize: power must be non-negative");
    const double target = std::sqrt(static_cast<double>(x.cols()) * power);
    Tensor2D out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double norm = x.row(r).norm();
        if (norm == 0.0) throw degenerate_input_error("power_normalize: zero vector cannot be normalized");
        out.row(r) = x.row(r) * (target / norm);
    }
    return out;
}

struct DenseLayer {
    Tensor2D weights;  // in x out
    RowVector bias;    // out
    Activation activation = Activation::linear;
    double power = 0.0;  // power_norm only: per-symbol power P

    Eigen::Index in_dim() const { return weights.rows(); }
    Eigen::Index out_dim() const { return weights.cols(); }
};

class MlpModel {
public:
    MlpModel() = default;

    explicit MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

    // Dense stack: hidden layers with relu, then one terminal layer.
    // Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
    static MlpModel build(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden, Eigen::Index output_dim,
                          Activation terminal, Rng& init_rng, double power = 0.0) {
        std::vector<DenseLayer> layers;
        Eigen::Index fan_in = input_dim;
        auto add = [&](Eigen::Index fan_out, Activation act) {
            DenseLayer layer;
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            layer.weights.resize(fan_in, fan_out);
            for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = init_rng.uniform(-limit, limit);
            layer.bias = RowVector::Zero(fan_out);
            layer.activation = act;
            layers.push_back(std::move(layer));
            fan_in = fan_out;
        };
        for (Eigen::Index width : hidden) add(width, Activation::relu);
        add(output_dim, terminal);
        if (terminal == Activation::power_norm) layers.back().power = power;
        return MlpModel(std::move(layers));
    }

    Eigen::Index input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
    Eigen::Index output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
    bool empty() const { return layers_.empty(); }

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& mutable_layers() {
        ++version_;
        return layers_;
    }

    // Bumped on every parameter mutation so stale forward caches are detected.
    std::uint64_t version() const { return version_; }
    void touch() { ++version_; }

    std::size_t parameter_count() const {
        std::size_t count = 0;
        for (const auto& l : layers_) count += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return count;
    }

    void validate() const {
        if (layers_.empty()) throw usage_error("MlpModel: no layers");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const DenseLayer& l = layers_[i];
            if (l.bias.size() != l.out_dim()) throw usage_error("MlpModel: bias size does not match layer width");
            if (i > 0 && layers_[i - 1].out_dim() != l.in_dim())
                throw usage_error("MlpModel: layer " + std::to_string(i) + " input does not chain with previous output");
            const bool terminal = i + 1 == layers_.size();
            if (!terminal && (l.activation == Activation::softmax || l.activation == Activation::power_norm))
                throw usage_error("MlpModel: " + to_string(l.activation) + " is only allowed on the terminal layer");
            if (l.activation == Activation::power_norm && l.power < 0.0)
                throw usage_error("MlpModel: power_norm layer needs non-negative power");
        }
    }

    friend bool operator==(const MlpModel& a, const MlpModel& b) {
        if (a.layers_.size() != b.layers_.size()) return false;
        for (std::size_t i = 0; i < a.layers_.size(); ++i) {
            const auto& x = a.layers_[i];
            const auto& y = b.layers_[i];
            if (x.activation != y.activation || x.power != y.power) return false;
            if (x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols()) return false;
            if (x.weights != y.weights || x.bias != y.bias) return false;
        }
        return true;
    }

private:
    std::vector<DenseLayer> layers_;
    std::uint64_t version_ = 0;
};

struct ForwardCache {
    std::vector<Tensor2D> inputs;       // input to layer i
    std::vector<Tensor2D> pre;          // pre-activation of layer i
    std::vector<Tensor2D> outputs;      // post-activation of layer i
    const MlpModel* model = nullptr;
    std::uint64_t version = 0;
};

namespace detail {

inline void softmax_rows(Tensor2D& z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        const double peak = row.maxCoeff();
        row = (row.array() - peak).exp();
        row /= row.sum();
    }
}

inline Tensor2D apply_activation(const DenseLayer& layer, const Tensor2D& pre) {
    switch (layer.activation) {
        case Activation::relu: return pre.cwiseMax(0.0);
        case Activation::linear: return pre;
        case Activation::softmax: {
            Tensor2D out = pre;
            softmax_rows(out);
            return out;
        }
        case Activation::power_norm: {
            const double target = std::sqrt(static_cast<double>(pre.cols()) * layer.power);
            Tensor2D out(pre.rows(), pre.cols());
            for (Eigen::Index r = 0; r < pre.rows(); ++r) {
                const double radius = std::sqrt(pre.row(r).squaredNorm() + power_norm_epsilon);
                out.row(r) = pre.row(r) * (target / radius);
            }
            return out;
        }
    }
    return pre;
}

// Gradient w.r.t. pre-activation given gradient w.r.t. the layer output.
inline Tensor2D activation_backward(const DenseLayer& layer, const Tensor2D& pre, const Tensor2D& out,
                                    const Tensor2D& upstream) {
    switch (layer.activation) {
        case Activation::relu: return (pre.array() > 0.0).select(upstream, 0.0);
        case Activation::linear: return upstream;
        case Activation::softmax: {
            Tensor2D g(upstream.rows(), upstream.cols());
            for (Eigen::Index r = 0; r < upstream.rows(); ++r) {
                const double dot = upstream.row(r).dot(out.row(r));
                g.row(r) = out.row(r).cwiseProduct((upstream.row(r).array() - dot).matrix());
            }
            return g;
        }
        case Activation::power_norm: {
            // y = c z / r, r = sqrt(|z|^2 + eps):  dz = (c / r) (g - (z.g) z / r^2)
            const double target = std::sqrt(static_cast<double>(pre.cols()) * layer.power);
            Tensor2D g(upstream.rows(), upstream.cols());
            for (Eigen::Index r = 0; r < upstream.rows(); ++r) {
                const double r2 = pre.row(r).squaredNorm() + power_norm_epsilon;
                const double radius = std::sqrt(r2);
                const double zg = pre.row(r).dot(upstream.row(r));
                g.row(r) = (target / radius) * (upstream.row(r) - (zg / r2) * pre.row(r));
            }
            return g;
        }
    }
    return upstream;
}

}  // namespace detail

inline Tensor2D forward(const MlpModel& model, const Tensor2D& input, ForwardCache* cache = nullptr) {
    if (model.empty()) throw usage_error("forward: model has no layers");
    if (input.cols() != model.input_dim())
        throw usage_error("forward: input has " + std::to_string(input.cols()) + " columns, model expects " +
                          std::to_string(model.input_dim()));
    const auto& layers = model.layers();
    if (cache != nullptr) {
        cache->inputs.resize(layers.size());
        cache->pre.resize(layers.size());
        cache->outputs.resize(layers.size());
        cache->model = &model;
        cache->version = model.version();
    }
    Tensor2D current = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const DenseLayer& layer = layers[i];
        Tensor2D pre(current.rows(), layer.out_dim());
        pre.noalias() = current * layer.weights;
        pre.rowwise() += layer.bias;
        Tensor2D out = detail::apply_activation(layer, pre);
        if (cache != nullptr) {
            cache->inputs[i] = std::move(current);
            cache->pre[i] = std::move(pre);
            cache->outputs[i] = out;
        }
        current = std::move(out);
    }
    return current;
}

struct MlpGradients {
    std::vector<Tensor2D> weights;
    std::vector<RowVector> biases;
    Tensor2D input;  // gradient w.r.t. the network input

    static MlpGradients zeros_like(const MlpModel& model) {
        MlpGradients g;
        for (const auto& l : model.layers()) {
            g.weights.push_back(Tensor2D::Zero(l.in_dim(), l.out_dim()));
            g.biases.push_back(RowVector::Zero(l.out_dim()));
        }
        return g;
    }

    MlpGradients& operator+=(const MlpGradients& other) {
        if (weights.size() != other.weights.size()) throw usage_error("MlpGradients: shape mismatch in accumulation");
        for (std::size_t i = 0; i < weights.size(); ++i) {
            weights[i] += other.weights[i];
            biases[i] += other.biases[i];
        }
        return *this;
    }

    MlpGradients& operator*=(double scale) {
        for (auto& w : weights) w *= scale;
        for (auto& b : biases) b *= scale;
        input *= scale;
        return *this;
    }

    bool all_finite() const {
        for (const auto& w : weights)
            if (!w.allFinite()) return false;
        for (const auto& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }
};

// Where the upstream gradient handed to backward() is taken.
enum class GradientAt {
    output,              // w.r.t. the network output (post-activation)
    terminal_pre_activation  // w.r.t. the last layer's pre-activation (e.g. softmax+CE logits)
};

inline MlpGradients backward(const MlpModel& model, const ForwardCache& cache, const Tensor2D& upstream,
                             GradientAt at = GradientAt::output) {
    if (cache.model != &model || cache.version != model.version())
        throw usage_error("backward: forward cache is stale or belongs to another model");
    const auto& layers = model.layers();
    if (cache.outputs.size() != layers.size()) throw usage_error("backward: cache does not match model depth");
    const Tensor2D& final_out = cache.outputs.back();
    if (upstream.rows() != final_out.rows() || upstream.cols() != final_out.cols())
        throw usage_error("backward: upstream gradient shape does not match model output");

    MlpGradients grads;
    grads.weights.resize(layers.size());
    grads.biases.resize(layers.size());
    Tensor2D grad_out = upstream;
    for (std::size_t k = layers.size(); k-- > 0;) {
        const DenseLayer& layer = layers[k];
        Tensor2D grad_pre = (k + 1 == layers.size() && at == GradientAt::terminal_pre_activation)
                                ? std::move(grad_out)
                                : detail::activation_backward(layer, cache.pre[k], cache.outputs[k], grad_out);
        grads.weights[k].noalias() = cache.inputs[k].transpose() * grad_pre;
        grads.biases[k] = grad_pre.colwise().sum();
        Tensor2D grad_in(grad_pre.rows(), layer.in_dim());
        grad_in.noalias() = grad_pre * layer.weights.transpose();
        grad_out = std::move(grad_in);
    }
    grads.input = std::move(grad_out);
    return grads;
}

struct CrossEntropyResult {
    double loss = 0.0;
    Tensor2D grad_logits;       // (p - onehot) / batch
    std::size_t clipped = 0;    // rows whose label probability was clipped at 1e-30
};

inline constexpr double probability_floor = 1e-30;

// Mean over the batch of -log p_label.
template <typename Index>
CrossEntropyResult cross_entropy_loss(const Tensor2D& probs, const std::vector<Index>& labels) {
    if (static_cast<std::size_t>(probs.rows()) != labels.size())
        throw usage_error("cross_entropy_loss: label count does not match batch size");
    CrossEntropyResult result;
    result.grad_logits = probs;
    const double batch = static_cast<double>(probs.rows());
    double total = 0.0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        const auto label = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)]);
        if (label < 0 || label >= probs.cols()) throw usage_error("cross_entropy_loss: label out of range");
        double p = probs(r, label);
        if (p < probability_floor) {
            p = probability_floor;
            ++result.clipped;
        }
        total -= std::log(p);
        result.grad_logits(r, label) -= 1.0;
    }
    result.grad_logits /= batch;
    result.loss = total / batch;
    return result;
}

template <typename Index = std::uint32_t>
std::vector<Index> argmax_rows(const Tensor2D& probs) {
    std::vector<Index> out(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        Eigen::Index best = 0;
        probs.row(r).maxCoeff(&best);
        out[static_cast<std::size_t>(r)] = static_cast<Index>(best);
    }
    return out;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<Tensor2D> m_weights, v_weights;
    std::vector<RowVector> m_biases, v_biases;

    AdamState() = default;
    AdamState(const MlpModel& model, AdamConfig cfg) : config(cfg) {
        for (const auto& l : model.layers()) {
            m_weights.push_back(Tensor2D::Zero(l.in_dim(), l.out_dim()));
            v_weights.push_back(Tensor2D::Zero(l.in_dim(), l.out_dim()));
            m_biases.push_back(RowVector::Zero(l.out_dim()));
            v_biases.push_back(RowVector::Zero(l.out_dim()));
        }
    }
};

namespace detail {

template <typename Param, typename Grad>
void adam_update(Param& param, const Grad& grad, Param& m, Param& v, const AdamConfig& c, double correction1,
                 double correction2) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseAbs2();
    const double step_size = c.learning_rate / correction1;
    const double root_correction2 = std::sqrt(correction2);
    param.array() -= step_size * m.array() / ((v.array().sqrt() / root_correction2) + c.epsilon);
}

}  // namespace detail

// Bias-corrected Adam. `context` is prefixed to the error when a gradient is not finite.
inline void adam_step(MlpModel& model, const MlpGradients& grads, AdamState& state, const std::string& context = "") {
    auto& layers = model.mutable_layers();
    if (grads.weights.size() != layers.size() || state.m_weights.size() != layers.size())
        throw usage_error("adam_step: gradient/state shapes do not match the model");
    if (!grads.all_finite())
        throw training_error((context.empty() ? std::string() : context + ": ") + "non-finite gradient at Adam step " +
                             std::to_string(state.step + 1));
    ++state.step;
    const auto t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.config.beta1, t);
    const double c2 = 1.0 - std::pow(state.config.beta2, t);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (grads.weights[i].rows() != layers[i].weights.rows() || grads.weights[i].cols() != layers[i].weights.cols())
            throw usage_error("adam_step: gradient shape mismatch at layer " + std::to_string(i));
        detail::adam_update(layers[i].weights, grads.weights[i], state.m_weights[i], state.v_weights[i], state.config, c1,
                            c2);
        detail::adam_update(layers[i].bias, grads.biases[i], state.m_biases[i], state.v_biases[i], state.config, c1, c2);
    }
}

}  // namespace wiretap
