#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/nnet/mlp.hpp"

namespace kaleido::nnet {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
    double learning_rate = 1e-4;
};

/// First/second moment buffers aligned with a parameter span list.
struct AdamState {
    AdamConfig config;
    std::vector<Eigen::VectorXd> first_moment;
    std::vector<Eigen::VectorXd> second_moment;
    std::int64_t step = 0;

    static AdamState zeros_for(std::span<const ParamSpan> params, AdamConfig config = {}) {
        AdamState s;
        s.config = config;
        for (const auto& p : params) {
            s.first_moment.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.values.size())));
            s.second_moment.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.values.size())));
        }
        return s;
    }
};

inline void check_finite(std::span<const ParamSpan> tensors, std::string_view what) {
    for (const auto& t : tensors)
        for (double v : t.values)
            if (!std::isfinite(v))
                throw NonFiniteError("non-finite " + std::string(what) + " in tensor '" + t.name + "'");
}

inline double global_norm(std::span<const ParamSpan> tensors) {
    double sq = 0.0;
    for (const auto& t : tensors)
        for (double v : t.values) sq += v * v;
    return std::sqrt(sq);
}

struct AdamStepResult {
    double grad_norm = 0.0;     // before clipping
    double clipped_norm = 0.0;  // norm of the gradient that entered the update
};

/// One bias-corrected Adam update. The global gradient norm is clipped to
/// `clip_norm` first (clip_norm <= 0 disables clipping). Gradients are read only.
inline AdamStepResult adam_step(std::span<const ParamSpan> params, std::span<const ParamSpan> grads,
                                AdamState& state, double lr, double clip_norm) {
    require(lr > 0.0, "adam_step: learning rate must be positive");
    require(params.size() == grads.size() && params.size() == state.first_moment.size(),
            "adam_step: parameter/gradient/state tensor counts differ");
    for (std::size_t i = 0; i < params.size(); ++i)
        require(params[i].values.size() == grads[i].values.size() &&
                    static_cast<Eigen::Index>(params[i].values.size()) == state.first_moment[i].size(),
                "adam_step: shape mismatch for tensor '" + params[i].name + "'");
    check_finite(grads, "gradient");

    AdamStepResult result;
    result.grad_norm = global_norm(grads);
    double scale = 1.0;
    if (clip_norm > 0.0 && result.grad_norm > clip_norm) scale = clip_norm / result.grad_norm;
    result.clipped_norm = result.grad_norm * scale;

    state.step += 1;
    const auto& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto g = grads[i].values;
        auto p = params[i].values;
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = g[j] * scale;
            const auto jj = static_cast<Eigen::Index>(j);
            m[jj] = c.beta1 * m[jj] + (1.0 - c.beta1) * gj;
            v[jj] = c.beta2 * v[jj] + (1.0 - c.beta2) * gj * gj;
            const double m_hat = m[jj] / bc1;
            const double v_hat = v[jj] / bc2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
    check_finite(params, "parameter");
    return result;
}

inline AdamStepResult adam_step(Mlp& net, GradBuffer& grads, AdamState& state, double lr, double clip_norm) {
    const auto p = net.parameters();
    const auto g = grads.spans();
    if (state.first_moment.empty()) state = AdamState::zeros_for(p, state.config);
    return adam_step(p, g, state, lr, clip_norm);
}

/// target <- decay * target + (1 - decay) * source, elementwise.
inline void ema_update(std::span<const ParamSpan> target, std::span<const ParamSpan> source, double decay) {
    require(decay >= 0.0 && decay <= 1.0, "ema_update: decay must lie in [0, 1]");
    require(target.size() == source.size(), "ema_update: tensor counts differ");
    for (std::size_t i = 0; i < target.size(); ++i) {
        require(target[i].values.size() == source[i].values.size(),
                "ema_update: shape mismatch for tensor '" + target[i].name + "'");
        auto t = target[i].values;
        const auto s = source[i].values;
        for (std::size_t j = 0; j < t.size(); ++j) t[j] = decay * t[j] + (1.0 - decay) * s[j];
    }
}

inline void ema_update(Mlp& target, Mlp& source, double decay) {
    require(target.same_shape(source), "ema_update: networks differ in shape");
    ema_update(target.parameters(), source.parameters(), decay);
}

}  // namespace kaleido::nnet
