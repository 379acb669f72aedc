#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/core/rng.hpp"
#include "kaleido/diffusion/condition.hpp"
#include "kaleido/diffusion/schedule.hpp"
#include "kaleido/nnet/mlp.hpp"

namespace kaleido::diffusion {

enum class LossWeighting { unit, preconditioned };

inline std::string to_string(LossWeighting w) { return w == LossWeighting::unit ? "unit" : "preconditioned"; }

inline LossWeighting loss_weighting_from_string(std::string_view s) {
    if (s == "unit") return LossWeighting::unit;
    if (s == "preconditioned") return LossWeighting::preconditioned;
    throw ContractViolation("unknown loss weighting '" + std::string(s) + "'");
}

/// Input/skip/output scales of the x0-predictor at one noise level, for data
/// of scale s_d: x0_hat = c_skip x_t + c_out F(c_in x_t, ...).
struct Preconditioning {
    double c_in = 1.0;
    double c_skip = 0.0;
    double c_out = 1.0;
};

inline Preconditioning preconditioning(double alpha, double sigma, double data_scale) {
    const double sd2 = data_scale * data_scale;
    const double v = alpha * alpha * sd2 + sigma * sigma;
    return {1.0 / std::sqrt(v), alpha * sd2 / v, sigma * data_scale / std::sqrt(v)};
}

/// omega_t of the denoising loss. `preconditioned` is 1 / c_out^2, which
/// gives every noise level a unit-scale regression target for F.
inline double loss_weight(LossWeighting w, const NoiseSchedule& sched, int t, double data_scale) {
    if (w == LossWeighting::unit) return 1.0;
    const double c_out = preconditioning(sched.alpha(t), sched.sigma(t), data_scale).c_out;
    return 1.0 / (c_out * c_out);
}

inline constexpr int kTimeFeatures = 6;

/// Features of the noise level: u = log(sigma/alpha)/4 with a few harmonics, and t/T.
inline Eigen::VectorXd time_features(const NoiseSchedule& sched, int t) {
    const double u = std::log(sched.sigma(t) / sched.alpha(t)) / 4.0;
    const double pi = std::numbers::pi;
    Eigen::VectorXd f(kTimeFeatures);
    f << u, std::cos(pi * u), std::sin(pi * u), std::cos(2.0 * pi * u), std::sin(2.0 * pi * u),
        static_cast<double>(t) / sched.steps;
    return f;
}

struct DenoiserConfig {
    int data_dim = 2;
    std::vector<int> hidden{128, 128};
    nnet::Activation activation = nnet::Activation::tanh;
    int num_classes = 2;
    int class_embed_dim = 4;
    int latent_dim = 8;
    double data_scale = 3.0;
    double embed_init_scale = 0.1;

    int input_dim() const { return data_dim + kTimeFeatures + class_embed_dim + latent_dim; }
};

/// Network input layout: [c_in x_t, time features, class embedding, latent embedding].
struct DenoiserNet {
    DenoiserConfig config;
    nnet::Mlp mlp;
    Eigen::MatrixXd class_embedding;  // class_embed_dim x (num_classes + 1); last column is the null class
    Eigen::VectorXd null_latent;      // latent_dim

    static DenoiserNet init(const DenoiserConfig& cfg, Rng& rng) {
        require(cfg.data_dim >= 1 && cfg.num_classes >= 1 && cfg.class_embed_dim >= 1 && cfg.latent_dim >= 1,
                "denoiser dimensions must be positive");
        require(cfg.data_scale > 0.0, "denoiser data scale must be positive");
        DenoiserNet net;
        net.config = cfg;
        std::vector<int> dims{cfg.input_dim()};
        dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
        dims.push_back(cfg.data_dim);
        net.mlp = nnet::Mlp::random(dims, cfg.activation, rng);
        net.class_embedding.resize(cfg.class_embed_dim, cfg.num_classes + 1);
        for (Eigen::Index i = 0; i < net.class_embedding.size(); ++i)
            net.class_embedding.data()[i] = cfg.embed_init_scale * standard_normal(rng);
        net.null_latent.resize(cfg.latent_dim);
        for (Eigen::Index i = 0; i < net.null_latent.size(); ++i)
            net.null_latent[i] = cfg.embed_init_scale * standard_normal(rng);
        return net;
    }

    int dim() const { return config.data_dim; }

    int class_column(int class_id) const {
        if (class_id == kNullClass) return config.num_classes;
        require(class_id >= 0 && class_id < config.num_classes, "class " + std::to_string(class_id) + " out of range");
        return class_id;
    }

    /// Network input and preconditioning of every column.
    Eigen::MatrixXd assemble(const Eigen::MatrixXd& xt, std::span<const int> timesteps, std::span<const int> classes,
                             const Eigen::MatrixXd& latents, const NoiseSchedule& sched,
                             std::vector<Preconditioning>& pre) const {
        const Eigen::Index b = xt.cols();
        require(xt.rows() == config.data_dim, "denoiser: data dimension mismatch");
        require(static_cast<Eigen::Index>(timesteps.size()) == b && static_cast<Eigen::Index>(classes.size()) == b,
                "denoiser: one timestep and class per column");
        require(latents.rows() == config.latent_dim && latents.cols() == b, "denoiser: latent block has the wrong shape");
        const int d = config.data_dim;
        const int e = config.class_embed_dim;
        Eigen::MatrixXd in(config.input_dim(), b);
        pre.resize(static_cast<std::size_t>(b));
        for (Eigen::Index j = 0; j < b; ++j) {
            const int t = timesteps[static_cast<std::size_t>(j)];
            sched.check_timestep(t);
            const auto p = preconditioning(sched.alpha(t), sched.sigma(t), config.data_scale);
            pre[static_cast<std::size_t>(j)] = p;
            in.col(j).head(d) = p.c_in * xt.col(j);
            in.col(j).segment(d, kTimeFeatures) = time_features(sched, t);
            in.col(j).segment(d + kTimeFeatures, e) = class_embedding.col(class_column(classes[static_cast<std::size_t>(j)]));
        }
        in.bottomRows(config.latent_dim) = latents;
        return in;
    }

    /// x0 predictions for columns of x_t with per-column timesteps, classes
    /// (kNullClass for the null sentinel) and latent embeddings.
    Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& xt, std::span<const int> timesteps,
                                  std::span<const int> classes, const Eigen::MatrixXd& latents,
                                  const NoiseSchedule& sched) const {
        std::vector<Preconditioning> pre;
        const Eigen::MatrixXd f = nnet::forward_batch(mlp, assemble(xt, timesteps, classes, latents, sched, pre));
        Eigen::MatrixXd out(xt.rows(), xt.cols());
        for (Eigen::Index j = 0; j < xt.cols(); ++j) {
            const auto& p = pre[static_cast<std::size_t>(j)];
            out.col(j) = p.c_skip * xt.col(j) + p.c_out * f.col(j);
        }
        return out;
    }

    bool all_finite() const { return mlp.all_finite() && class_embedding.allFinite() && null_latent.allFinite(); }
};

/// One optimization batch with its diffusion draws fixed.
struct DenoiserBatch {
    Eigen::MatrixXd x0;                 // d x B
    std::vector<int> classes;           // kNullClass when dropped
    Eigen::MatrixXd latents;            // latent_dim x B; ignored where latent_is_null
    std::vector<char> latent_is_null;
    std::vector<int> timesteps;         // each in 1..T
    Eigen::MatrixXd noise;              // d x B

    Eigen::Index size() const { return x0.cols(); }
};

struct DenoiserGrads {
    nnet::GradBuffer mlp;
    Eigen::MatrixXd class_embedding;
    Eigen::VectorXd null_latent;
    Eigen::MatrixXd latents;  // d loss / d latent column; zero where latent_is_null

    static DenoiserGrads zeros_like(const DenoiserNet& net, Eigen::Index batch) {
        return {nnet::GradBuffer::zeros_like(net.mlp),
                Eigen::MatrixXd::Zero(net.class_embedding.rows(), net.class_embedding.cols()),
                Eigen::VectorXd::Zero(net.null_latent.size()), Eigen::MatrixXd::Zero(net.config.latent_dim, batch)};
    }
};

struct DenoiseLossResult {
    double loss = 0.0;
    DenoiserGrads grads;
};

inline void check_batch(const DenoiserBatch& b, int latent_dim, const NoiseSchedule& sched) {
    require(b.size() >= 1, "denoise_loss: empty batch");
    const auto n = static_cast<std::size_t>(b.size());
    require(b.classes.size() == n && b.timesteps.size() == n && b.latent_is_null.size() == n,
            "denoise_loss: per-sample fields have different lengths");
    require(b.noise.rows() == b.x0.rows() && b.noise.cols() == b.size(), "denoise_loss: noise has the wrong shape");
    require(b.latents.rows() == latent_dim && b.latents.cols() == b.size(), "denoise_loss: latents have the wrong shape");
    for (int t : b.timesteps) require(t >= 1 && t <= sched.steps, "denoise_loss: timestep outside 1..T");
}

/// Mean over the batch of omega_t ||x0_hat - x0||^2 for any batched predictor
/// `predict(x_t, timesteps) -> x0_hat`.
template <class Predict>
double denoise_loss_value(Predict&& predict, const Eigen::MatrixXd& x0, std::span<const int> timesteps,
                          const Eigen::MatrixXd& noise, const NoiseSchedule& sched, LossWeighting weighting,
                          double data_scale) {
    require(x0.cols() >= 1, "denoise_loss: empty batch");
    Eigen::MatrixXd xt(x0.rows(), x0.cols());
    for (Eigen::Index j = 0; j < x0.cols(); ++j) {
        const int t = timesteps[static_cast<std::size_t>(j)];
        xt.col(j) = sched.alpha(t) * x0.col(j) + sched.sigma(t) * noise.col(j);
    }
    const Eigen::MatrixXd pred = predict(xt, timesteps);
    double total = 0.0;
    for (Eigen::Index j = 0; j < x0.cols(); ++j)
        total += loss_weight(weighting, sched, timesteps[static_cast<std::size_t>(j)], data_scale) *
                 (pred.col(j) - x0.col(j)).squaredNorm();
    return total / static_cast<double>(x0.cols());
}

/// Denoising loss and its exact gradient with respect to the network, the
/// class embeddings, the null latent and the supplied latent columns.
inline DenoiseLossResult denoise_loss(const DenoiserNet& net, const DenoiserBatch& batch, const NoiseSchedule& sched,
                                      LossWeighting weighting) {
    check_batch(batch, net.config.latent_dim, sched);
    const Eigen::Index b = batch.size();
    Eigen::MatrixXd xt(batch.x0.rows(), b);
    Eigen::MatrixXd lat = batch.latents;
    for (Eigen::Index j = 0; j < b; ++j) {
        const int t = batch.timesteps[static_cast<std::size_t>(j)];
        xt.col(j) = sched.alpha(t) * batch.x0.col(j) + sched.sigma(t) * batch.noise.col(j);
        if (batch.latent_is_null[static_cast<std::size_t>(j)]) lat.col(j) = net.null_latent;
    }
    std::vector<Preconditioning> pre;
    const auto trace = nnet::forward_trace(net.mlp, net.assemble(xt, batch.timesteps, batch.classes, lat, sched, pre));

    DenoiseLossResult result{0.0, DenoiserGrads::zeros_like(net, b)};
    Eigen::MatrixXd upstream(net.config.data_dim, b);
    const double inv_b = 1.0 / static_cast<double>(b);
    for (Eigen::Index j = 0; j < b; ++j) {
        const auto& p = pre[static_cast<std::size_t>(j)];
        const double w = loss_weight(weighting, sched, batch.timesteps[static_cast<std::size_t>(j)], net.config.data_scale);
        const Eigen::VectorXd r = p.c_skip * xt.col(j) + p.c_out * trace.output.col(j) - batch.x0.col(j);
        result.loss += w * r.squaredNorm();
        upstream.col(j) = 2.0 * w * p.c_out * inv_b * r;
    }
    result.loss *= inv_b;

    auto g = nnet::backward_batch(net.mlp, trace, upstream);
    const int d = net.config.data_dim;
    const int e = net.config.class_embed_dim;
    for (Eigen::Index j = 0; j < b; ++j) {
        result.grads.class_embedding.col(net.class_column(batch.classes[static_cast<std::size_t>(j)])) +=
            g.input.col(j).segment(d + kTimeFeatures, e);
        const auto gl = g.input.col(j).tail(net.config.latent_dim);
        if (batch.latent_is_null[static_cast<std::size_t>(j)])
            result.grads.null_latent += gl;
        else
            result.grads.latents.col(j) = gl;
    }
    result.grads.mlp = std::move(g);
    return result;
}

/// Uniform timesteps in 1..T and standard normal noise for a batch.
inline void draw_diffusion_noise(Rng& rng, const NoiseSchedule& sched, DenoiserBatch& batch) {
    std::uniform_int_distribution<int> pick(1, sched.steps);
    const auto b = batch.size();
    batch.timesteps.resize(static_cast<std::size_t>(b));
    batch.noise.resize(batch.x0.rows(), b);
    for (Eigen::Index j = 0; j < b; ++j) {
        batch.timesteps[static_cast<std::size_t>(j)] = pick(rng);
        batch.noise.col(j) = normal_vector(rng, static_cast<int>(batch.x0.rows()));
    }
}

}  // namespace kaleido::diffusion
