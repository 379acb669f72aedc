#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kaleido/core/error.hpp"
#include "kaleido/core/io.hpp"
#include "kaleido/core/rng.hpp"
#include "kaleido/data/gmm.hpp"
#include "kaleido/diffusion/denoiser.hpp"
#include "kaleido/latents/prior.hpp"
#include "kaleido/nnet/adam.hpp"
#include "kaleido/nnet/serialize.hpp"
#include "kaleido/train/config.hpp"
#include "kaleido/train/model.hpp"

namespace kaleido::train {

/// Closed-form tabular prior over a labelled latent corpus.
inline latents::ArPrior fit_tabular_prior(std::span<const int> classes, std::span<const latents::LatentSequence> corpus,
                                          const latents::LatentVocab& vocab, int window, double smoothing) {
    return latents::fit_tabular(classes, corpus, vocab.size(), vocab.spec().num_classes, vocab.scheme(), window,
                                smoothing);
}

/// One training batch with every random draw fixed.
struct JointBatch {
    diffusion::DenoiserBatch dm;                       // classes already dropped to kNullClass
    std::vector<const latents::LatentSequence*> latents;  // per sample; nullptr for the baseline
    std::vector<int> true_classes;                     // prior targets are never dropped
};

/// Assembles a batch from dataset rows, applying condition dropout to (c, z) together.
inline JointBatch make_joint_batch(const Model& model, std::span<const data::LabeledSample> samples,
                                   std::span<const latents::LatentSequence> latents, std::span<const int> rows,
                                   std::span<const char> dropped) {
    require(!rows.empty() && rows.size() == dropped.size(), "make_joint_batch: one dropout flag per row");
    require(!model.kaleido() || latents.size() == samples.size(), "kaleido training needs one latent per sample");
    const auto b = static_cast<Eigen::Index>(rows.size());
    JointBatch batch;
    batch.dm.x0.resize(model.dim(), b);
    batch.dm.latents = Eigen::MatrixXd::Zero(model.denoiser.config.latent_dim, b);
    for (Eigen::Index j = 0; j < b; ++j) {
        const int r = rows[static_cast<std::size_t>(j)];
        require(r >= 0 && static_cast<std::size_t>(r) < samples.size(), "batch row out of range");
        const auto& s = samples[static_cast<std::size_t>(r)];
        const bool drop = dropped[static_cast<std::size_t>(j)] != 0;
        batch.dm.x0.col(j) = s.x;
        batch.dm.classes.push_back(drop ? diffusion::kNullClass : s.class_id);
        batch.true_classes.push_back(s.class_id);
        const latents::LatentSequence* z = model.kaleido() ? &latents[static_cast<std::size_t>(r)] : nullptr;
        batch.latents.push_back(z);
        const bool null_latent = drop || z == nullptr;
        batch.dm.latent_is_null.push_back(null_latent ? 1 : 0);
        if (!null_latent) batch.dm.latents.col(j) = latents::embed_latents(*z, model.embedding_table());
    }
    return batch;
}

struct JointLoss {
    double l_dm = 0.0;
    double l_ar = 0.0;
    double total = 0.0;
    ModelGrads grads;
};

/// L = L_DM + eta L_AR and its gradient over every trainable parameter.
inline JointLoss compute_joint_loss(const Model& model, const JointBatch& batch, const TrainConfig& cfg) {
    auto dm = diffusion::denoise_loss(model.denoiser, batch.dm, model.sched, cfg.loss_weighting);
    JointLoss out;
    out.l_dm = dm.loss;
    out.grads.denoiser = std::move(dm.grads);
    if (model.kaleido()) {
        const auto& table = model.embedding_table();
        out.grads.table = Eigen::MatrixXd::Zero(table.rows(), table.cols());
        for (Eigen::Index j = 0; j < batch.dm.size(); ++j)
            if (!batch.dm.latent_is_null[static_cast<std::size_t>(j)])
                latents::accumulate_embed_grad(*batch.latents[static_cast<std::size_t>(j)],
                                               out.grads.denoiser.latents.col(j), out.grads.table);
        const double inv_b = 1.0 / static_cast<double>(batch.latents.size());
        if (model.neural_prior()) {
            auto ar = latents::neural_nll_batch(model.prior, batch.true_classes, batch.latents, cfg.eta * inv_b);
            out.l_ar = ar.nll * inv_b;
            out.grads.table += ar.grads.token_embedding;
            out.grads.prior = std::move(ar.grads);
        } else {
            double nll = 0.0;
            for (std::size_t j = 0; j < batch.latents.size(); ++j)
                nll += latents::ar_nll(model.prior, *batch.latents[j], batch.true_classes[j]);
            out.l_ar = nll * inv_b;
        }
    }
    out.total = model.kaleido() ? out.l_dm + cfg.eta * out.l_ar : out.l_dm;
    return out;
}

struct TrainRecord {
    std::int64_t step = 0;
    double l_dm = 0.0;
    double l_ar = 0.0;
    double total = 0.0;
    double grad_norm = 0.0;
    double wallclock = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;

    std::string to_csv() const {
        std::string out = "step,l_dm,l_ar,total,grad_norm,wallclock_s\n";
        for (const auto& r : records)
            out += std::to_string(r.step) + "," + format_double(r.l_dm) + "," + format_double(r.l_ar) + "," +
                   format_double(r.total) + "," + format_double(r.grad_norm) + "," + format_double(r.wallclock) + "\n";
        return out;
    }
};

struct TrainState {
    TrainConfig config;
    std::uint64_t seed = 0;
    Model live;
    Model ema;
    nnet::AdamState adam;
    std::int64_t step = 0;
    Rng data_rng;
    Rng diffusion_rng;
    Rng dropout_rng;

    static TrainState start(const TrainConfig& cfg, Model model, std::uint64_t seed) {
        TrainState s;
        s.config = cfg;
        s.seed = seed;
        s.live = std::move(model);
        s.ema = s.live;
        nnet::AdamConfig ac{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.learning_rate};
        s.adam = nnet::AdamState::zeros_for(model_parameters(s.live), ac);
        s.data_rng = make_rng(seed, Stream::data_order);
        s.diffusion_rng = make_rng(seed, Stream::diffusion);
        s.dropout_rng = make_rng(seed, Stream::dropout);
        return s;
    }
};

inline double learning_rate_at(const TrainConfig& cfg, std::int64_t step) {
    if (cfg.warmup_steps <= 0) return cfg.learning_rate;
    return cfg.learning_rate * std::min(1.0, static_cast<double>(step + 1) / cfg.warmup_steps);
}

struct StepResult {
    JointLoss loss;
    nnet::AdamStepResult adam;
};

/// Loss, Adam update with clipping, EMA update.
inline StepResult joint_step(TrainState& state, const JointBatch& batch) {
    StepResult r{compute_joint_loss(state.live, batch, state.config), {}};
    if (!std::isfinite(r.loss.total))
        throw NonFiniteError("non-finite loss at step " + std::to_string(state.step));
    auto params = model_parameters(state.live);
    auto grads = r.loss.grads.spans();
    r.adam = nnet::adam_step(params, grads, state.adam, learning_rate_at(state.config, state.step),
                             state.config.clip_norm);
    nnet::ema_update(model_parameters(state.ema), model_parameters(state.live), state.config.ema_decay);
    ++state.step;
    return r;
}

/// Draws the next batch from the state's streams. The draws do not depend on
/// the variant, so a baseline/kaleido pair from one seed sees the same rows,
/// dropout flags, timesteps and noise.
inline JointBatch next_batch(TrainState& state, std::span<const data::LabeledSample> samples,
                             std::span<const latents::LatentSequence> latents) {
    const int b = state.config.batch_size;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(samples.size()) - 1);
    std::vector<int> rows(static_cast<std::size_t>(b));
    for (auto& r : rows) r = pick(state.data_rng);
    std::vector<char> dropped(static_cast<std::size_t>(b));
    for (auto& d : dropped) d = uniform01(state.dropout_rng) < state.config.p_uncond ? 1 : 0;
    auto batch = make_joint_batch(state.live, samples, latents, rows, dropped);
    diffusion::draw_diffusion_noise(state.diffusion_rng, state.live.sched, batch.dm);
    return batch;
}

inline constexpr const char* kCheckpointFormat = "kaleido-checkpoint-1";

inline Json checkpoint_json(const TrainState& s) {
    return Json{{"format", kCheckpointFormat},
                {"config", to_json(s.config)},
                {"seed", s.seed},
                {"step", s.step},
                {"latent_context", to_json(s.live.latent_ctx)},
                {"live", parameters_to_json(s.live)},
                {"ema", parameters_to_json(s.ema)},
                {"adam", nnet::to_json(s.adam)}};
}

struct Checkpoint {
    TrainConfig config;
    std::uint64_t seed = 0;
    std::int64_t step = 0;
    Model live;
    Model ema;
    nnet::AdamState adam;
};

inline Checkpoint checkpoint_from_json(const Json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) throw IoError("unsupported checkpoint format");
        Checkpoint c;
        c.config = train_config_from_json(j.at("config"));
        c.seed = j.at("seed").get<std::uint64_t>();
        c.step = j.at("step").get<std::int64_t>();
        const auto ctx = latent_context_from_json(j.at("latent_context"));
        c.live = model_from_json(c.config, ctx, j.at("live"));
        c.ema = model_from_json(c.config, ctx, j.at("ema"));
        c.adam = nnet::adam_from_json(j.at("adam"));
        return c;
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed checkpoint: ") + e.what());
    }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return checkpoint_from_json(Json::parse(read_text(path)));
    } catch (const Json::parse_error& e) {
        throw IoError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
}

struct TrainOptions {
    std::optional<std::filesystem::path> checkpoint_path;
    std::function<void(const TrainRecord&)> on_log;
};

struct TrainResult {
    TrainState state;
    TrainLog log;
};

/// Full training run. Kaleido runs with a tabular prior fit it in closed form
/// first. On a non-finite loss or update the run aborts; the last periodic
/// checkpoint on disk is left untouched.
inline TrainResult train(const TrainConfig& cfg, std::uint64_t seed, std::span<const data::LabeledSample> samples,
                         std::span<const latents::LatentSequence> latents, const latents::LatentContext& ctx,
                         const TrainOptions& options = {}) {
    cfg.validate();
    require(!samples.empty(), "train: empty dataset");
    Model model = make_model(cfg, ctx, seed);
    if (model.kaleido() && cfg.prior_backend == latents::PriorBackend::tabular) {
        std::vector<int> classes;
        for (const auto& s : samples) classes.push_back(s.class_id);
        model.prior = fit_tabular_prior(classes, latents, ctx.vocab, cfg.context_window, cfg.smoothing);
    }
    TrainResult result{TrainState::start(cfg, std::move(model), seed), {}};
    auto& state = result.state;
    const auto t0 = std::chrono::steady_clock::now();
    auto save = [&] {
        if (options.checkpoint_path) atomic_write_text(*options.checkpoint_path, checkpoint_json(state).dump());
    };
    for (int it = 0; it < cfg.steps; ++it) {
        const auto batch = next_batch(state, samples, latents);
        StepResult r;
        try {
            r = joint_step(state, batch);
        } catch (const NonFiniteError& e) {
            throw NonFiniteError(std::string("training aborted at step ") + std::to_string(state.step) + ": " +
                                 e.what() +
                                 (options.checkpoint_path ? "; last good checkpoint kept at " +
                                                                options.checkpoint_path->string()
                                                          : std::string()));
        }
        if (state.step % cfg.log_every == 0 || it + 1 == cfg.steps) {
            TrainRecord rec{state.step, r.loss.l_dm, r.loss.l_ar, r.loss.total, r.adam.grad_norm,
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
            result.log.records.push_back(rec);
            if (options.on_log) options.on_log(rec);
        }
        if (state.step % cfg.checkpoint_every == 0) save();
    }
    save();
    return result;
}

/// Trains a neural prior alone by maximum likelihood (Adam, minibatches).
inline void fit_neural_prior(latents::ArPrior& prior, std::span<const int> classes,
                             std::span<const latents::LatentSequence> corpus, int steps, int batch_size, double lr,
                             std::uint64_t seed) {
    require(prior.backend == latents::PriorBackend::neural, "fit_neural_prior needs the neural backend");
    require(!corpus.empty() && classes.size() == corpus.size(), "fit_neural_prior: empty or unlabelled corpus");
    auto& np = prior.neural;
    auto params = [&] {
        std::vector<nnet::ParamSpan> out{
            {"token_embedding", {np.token_embedding.data(), static_cast<std::size_t>(np.token_embedding.size())}},
            {"class_embedding", {np.class_embedding.data(), static_cast<std::size_t>(np.class_embedding.size())}}};
        for (auto& s : np.mlp.parameters()) out.push_back(s);
        return out;
    };
    auto state = nnet::AdamState::zeros_for(params(), {0.9, 0.99, 1e-8, lr});
    Rng rng = make_rng(seed, Stream::prior, 1);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(corpus.size()) - 1);
    for (int it = 0; it < steps; ++it) {
        std::vector<int> cls;
        std::vector<const latents::LatentSequence*> seqs;
        for (int b = 0; b < batch_size; ++b) {
            const int r = pick(rng);
            cls.push_back(classes[static_cast<std::size_t>(r)]);
            seqs.push_back(&corpus[static_cast<std::size_t>(r)]);
        }
        auto res = latents::neural_nll_batch(prior, cls, seqs, 1.0 / batch_size);
        std::vector<nnet::ParamSpan> grads{
            {"token_embedding", {res.grads.token_embedding.data(), static_cast<std::size_t>(res.grads.token_embedding.size())}},
            {"class_embedding", {res.grads.class_embedding.data(), static_cast<std::size_t>(res.grads.class_embedding.size())}}};
        for (auto& s : res.grads.mlp.spans()) grads.push_back(s);
        nnet::adam_step(params(), grads, state, lr, 0.0);
    }
}

}  // namespace kaleido::train
