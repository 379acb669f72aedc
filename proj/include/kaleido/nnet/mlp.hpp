#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/core/rng.hpp"

namespace kaleido::nnet {

enum class Activation { tanh, silu, identity };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::silu: return "silu";
        case Activation::identity: return "identity";
    }
    return "identity";
}

inline Activation activation_from_string(std::string_view name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "silu") return Activation::silu;
    if (name == "identity") return Activation::identity;
    throw ContractViolation("unknown activation '" + std::string(name) + "'");
}

/// Named view over a contiguous parameter (or gradient) tensor.
struct ParamSpan {
    std::string name;
    std::span<double> values;
};

struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
    Activation activation = Activation::identity;
};

/// Feed-forward network. Layer i maps in_i -> out_i and out_i == in_{i+1}.
class Mlp {
public:
    Mlp() = default;

    explicit Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

    /// Glorot-uniform weights, zero biases. `dims` = {in, hidden..., out};
    /// hidden layers use `hidden`, the last layer is identity.
    static Mlp random(std::span<const int> dims, Activation hidden, Rng& rng) {
        require(dims.size() >= 2, "Mlp needs at least input and output dimensions");
        std::vector<Layer> layers;
        for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
            const int in = dims[i];
            const int out = dims[i + 1];
            require(in > 0 && out > 0, "Mlp dimensions must be positive");
            const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
            std::uniform_real_distribution<double> u(-limit, limit);
            Layer layer;
            layer.weight.resize(out, in);
            for (Eigen::Index r = 0; r < out; ++r)
                for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
            layer.bias = Eigen::VectorXd::Zero(out);
            layer.activation = (i + 2 == dims.size()) ? Activation::identity : hidden;
            layers.push_back(std::move(layer));
        }
        return Mlp(std::move(layers));
    }

    const std::vector<Layer>& layers() const { return layers_; }
    std::size_t depth() const { return layers_.size(); }
    Eigen::Index in_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
    Eigen::Index out_dim() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }

    /// Mutable views in a fixed order: layer0.weight, layer0.bias, layer1.weight, ...
    std::vector<ParamSpan> parameters() {
        std::vector<ParamSpan> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            auto& l = layers_[i];
            out.push_back({"layer" + std::to_string(i) + ".weight",
                           {l.weight.data(), static_cast<std::size_t>(l.weight.size())}});
            out.push_back({"layer" + std::to_string(i) + ".bias",
                           {l.bias.data(), static_cast<std::size_t>(l.bias.size())}});
        }
        return out;
    }

    Layer& layer(std::size_t i) { return layers_.at(i); }
    const Layer& layer(std::size_t i) const { return layers_.at(i); }

    void validate() const {
        require(!layers_.empty(), "Mlp has no layers");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            require(l.bias.size() == l.weight.rows(),
                    "layer " + std::to_string(i) + ": bias length != weight rows");
            if (i > 0)
                require(layers_[i - 1].weight.rows() == l.weight.cols(),
                        "layer " + std::to_string(i) + ": input dim does not chain");
        }
    }

    bool same_shape(const Mlp& other) const {
        if (layers_.size() != other.layers_.size()) return false;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (layers_[i].weight.rows() != other.layers_[i].weight.rows() ||
                layers_[i].weight.cols() != other.layers_[i].weight.cols())
                return false;
        }
        return true;
    }

    bool all_finite() const {
        for (const auto& l : layers_)
            if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
        return true;
    }

private:
    std::vector<Layer> layers_;
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void activate_inplace(Eigen::MatrixXd& z, Activation a) {
    switch (a) {
        case Activation::tanh: z = z.array().tanh().matrix(); break;
        case Activation::silu: z = z.unaryExpr([](double v) { return v * sigmoid(v); }); break;
        case Activation::identity: break;
    }
}

/// d activation / d pre-activation, elementwise.
inline Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& pre, Activation a) {
    switch (a) {
        case Activation::tanh: {
            Eigen::ArrayXXd t = pre.array().tanh();
            return (1.0 - t * t).matrix();
        }
        case Activation::silu:
            return pre.unaryExpr([](double v) {
                const double s = sigmoid(v);
                return s * (1.0 + v * (1.0 - s));
            });
        case Activation::identity: return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
    }
    return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

}  // namespace detail

/// Column-batched evaluation: `inputs` is in_dim x B.
inline Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs) {
    require(inputs.rows() == net.in_dim(),
            "forward: input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                std::to_string(net.in_dim()));
    Eigen::MatrixXd h = inputs;
    for (const auto& l : net.layers()) {
        Eigen::MatrixXd z = l.weight * h;
        z.colwise() += l.bias;
        detail::activate_inplace(z, l.activation);
        h = std::move(z);
    }
    return h;
}

inline Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input) {
    return forward_batch(net, Eigen::MatrixXd(input)).col(0);
}

/// Intermediates kept by forward_trace for the reverse pass.
struct ForwardTrace {
    std::vector<Eigen::MatrixXd> layer_inputs;
    std::vector<Eigen::MatrixXd> pre_activations;
    Eigen::MatrixXd output;
};

inline ForwardTrace forward_trace(const Mlp& net, const Eigen::MatrixXd& inputs) {
    require(inputs.rows() == net.in_dim(), "forward: input dimension mismatch");
    ForwardTrace trace;
    trace.layer_inputs.reserve(net.depth());
    trace.pre_activations.reserve(net.depth());
    Eigen::MatrixXd h = inputs;
    for (const auto& l : net.layers()) {
        Eigen::MatrixXd z = l.weight * h;
        z.colwise() += l.bias;
        trace.layer_inputs.push_back(std::move(h));
        trace.pre_activations.push_back(z);
        detail::activate_inplace(z, l.activation);
        h = std::move(z);
    }
    trace.output = std::move(h);
    return trace;
}

/// Per-parameter gradient accumulator with the same shapes as an Mlp.
struct GradBuffer {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Eigen::MatrixXd input;  // d(loss)/d(input), in_dim x B

    static GradBuffer zeros_like(const Mlp& net) {
        GradBuffer g;
        for (const auto& l : net.layers()) {
            g.weights.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
            g.biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        }
        g.input = Eigen::MatrixXd::Zero(net.in_dim(), 1);
        return g;
    }

    void set_zero() {
        for (auto& w : weights) w.setZero();
        for (auto& b : biases) b.setZero();
        input.setZero();
    }

    GradBuffer& operator+=(const GradBuffer& other) {
        require(weights.size() == other.weights.size(), "GradBuffer shape mismatch");
        for (std::size_t i = 0; i < weights.size(); ++i) {
            weights[i] += other.weights[i];
            biases[i] += other.biases[i];
        }
        return *this;
    }

    GradBuffer& operator*=(double s) {
        for (auto& w : weights) w *= s;
        for (auto& b : biases) b *= s;
        input *= s;
        return *this;
    }

    std::vector<ParamSpan> spans() {
        std::vector<ParamSpan> out;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            out.push_back({"layer" + std::to_string(i) + ".weight",
                           {weights[i].data(), static_cast<std::size_t>(weights[i].size())}});
            out.push_back({"layer" + std::to_string(i) + ".bias",
                           {biases[i].data(), static_cast<std::size_t>(biases[i].size())}});
        }
        return out;
    }

    bool all_zero() const {
        for (const auto& w : weights)
            if (!w.isZero(0.0)) return false;
        for (const auto& b : biases)
            if (!b.isZero(0.0)) return false;
        return true;
    }
};

/// Reverse pass. Returns gradients of sum_b <output_b, upstream_b> with
/// respect to every parameter (summed over the batch) and to the inputs.
inline GradBuffer backward_batch(const Mlp& net, const ForwardTrace& trace,
                                 const Eigen::MatrixXd& upstream) {
    require(upstream.rows() == net.out_dim() && upstream.cols() == trace.output.cols(),
            "backward: upstream gradient shape does not match network output");
    GradBuffer grads;
    grads.weights.resize(net.depth());
    grads.biases.resize(net.depth());
    Eigen::MatrixXd delta = upstream;
    for (std::size_t k = net.depth(); k-- > 0;) {
        const auto& l = net.layer(k);
        if (l.activation != Activation::identity)
            delta = delta.cwiseProduct(detail::activation_derivative(trace.pre_activations[k], l.activation));
        grads.weights[k] = delta * trace.layer_inputs[k].transpose();
        grads.biases[k] = delta.rowwise().sum();
        delta = l.weight.transpose() * delta;
    }
    grads.input = std::move(delta);
    return grads;
}

inline GradBuffer backward(const Mlp& net, const Eigen::VectorXd& input, const Eigen::VectorXd& upstream) {
    require(input.size() == net.in_dim(), "backward: input dimension mismatch");
    require(upstream.size() == net.out_dim(), "backward: upstream gradient length != output dimension");
    const auto trace = forward_trace(net, Eigen::MatrixXd(input));
    return backward_batch(net, trace, Eigen::MatrixXd(upstream));
}

}  // namespace kaleido::nnet
