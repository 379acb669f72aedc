#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kaleido/core/error.hpp"
#include "kaleido/data/canvas.hpp"
#include "kaleido/data/dataset_io.hpp"
#include "kaleido/data/gmm.hpp"
#include "kaleido/diffusion/denoiser.hpp"
#include "kaleido/diffusion/schedule.hpp"
#include "kaleido/latents/grammar.hpp"
#include "kaleido/latents/prior.hpp"
#include "kaleido/latents/vocab.hpp"

namespace kaleido::train {

using Json = nlohmann::json;

enum class Variant { baseline, kaleido };

inline std::string to_string(Variant v) { return v == Variant::baseline ? "baseline" : "kaleido"; }

inline Variant variant_from_string(std::string_view s) {
    if (s == "baseline") return Variant::baseline;
    if (s == "kaleido") return Variant::kaleido;
    throw ContractViolation("unknown variant '" + std::string(s) + "'");
}

enum class DatasetKind { gmm, canvas };

inline std::string to_string(DatasetKind k) { return k == DatasetKind::gmm ? "gmm" : "canvas"; }

inline DatasetKind dataset_kind_from_string(std::string_view s) {
    if (s == "gmm") return DatasetKind::gmm;
    if (s == "canvas") return DatasetKind::canvas;
    throw ContractViolation("unknown dataset kind '" + std::string(s) + "'");
}

struct DataConfig {
    DatasetKind kind = DatasetKind::gmm;
    data::WeightVariant weights = data::WeightVariant::unequal;
    data::CanvasSpec canvas;
    int n = 10000;
    latents::Scheme scheme = latents::Scheme::text;
    int codebook_size = 16;
    int voken_count = 4;
    latents::BlobQuantizer quantizer;
};

struct TrainConfig {
    Variant variant = Variant::kaleido;
    latents::PriorBackend prior_backend = latents::PriorBackend::tabular;
    double eta = 1.0;
    double p_uncond = 0.1;
    int batch_size = 128;
    int steps = 20000;
    double learning_rate = 1e-3;
    int warmup_steps = 500;
    double ema_decay = 0.999;
    double clip_norm = 2.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_eps = 1e-8;
    diffusion::ScheduleKind schedule = diffusion::ScheduleKind::cosine;
    int schedule_steps = 250;
    diffusion::LossWeighting loss_weighting = diffusion::LossWeighting::preconditioned;
    diffusion::DenoiserConfig denoiser;
    latents::NeuralPriorConfig prior;
    int context_window = 8;
    double smoothing = 1.0;
    int log_every = 100;
    int checkpoint_every = 5000;

    void validate() const {
        require(p_uncond >= 0.0 && p_uncond < 1.0, "p_uncond must lie in [0, 1)");
        require(eta >= 0.0, "eta must be >= 0");
        require(batch_size >= 1 && steps >= 0 && warmup_steps >= 0, "batch size, steps and warmup must be valid");
        require(learning_rate > 0.0 && clip_norm >= 0.0, "learning rate must be positive, clip norm non-negative");
        require(ema_decay >= 0.0 && ema_decay <= 1.0, "ema decay must lie in [0, 1]");
        require(schedule_steps >= 1, "schedule needs T >= 1");
        require(context_window >= 1 && smoothing >= 0.0, "prior window must be >= 1 and smoothing >= 0");
        require(log_every >= 1 && checkpoint_every >= 1, "log and checkpoint intervals must be >= 1");
        require(prior.embed_dim == denoiser.latent_dim,
                "neural prior embedding dimension must equal the denoiser latent dimension");
    }
};

struct SampleConfig {
    int steps = 250;
    bool clip = true;
    double clip_min = -4.5;
    double clip_max = 4.5;
    bool cfg_drops_latent = true;
    double temperature = 1.0;
    int n = 5000;
    int class_id = 0;
    std::vector<double> guidance{1.0, 2.0, 4.0, 8.0};
    int knn_k = 3;
    int min_count = 10;
    int n_real = 5000;
};

struct ExperimentConfig {
    DataConfig data;
    TrainConfig train;
    SampleConfig sample;
};

// JSON. Readers require every field so config files carry no hidden defaults.

inline Json to_json(const latents::BlobQuantizer& q) {
    return Json{{"position_bins", q.position_bins}, {"radius_bins", q.radius_bins}, {"angle_bins", q.angle_bins},
                {"range", q.range}};
}

inline latents::BlobQuantizer quantizer_from_json(const Json& j) {
    latents::BlobQuantizer q;
    q.position_bins = j.at("position_bins").get<int>();
    q.radius_bins = j.at("radius_bins").get<int>();
    q.angle_bins = j.at("angle_bins").get<int>();
    q.range = j.at("range").get<double>();
    q.validate();
    return q;
}

inline Json to_json(const DataConfig& c) {
    return Json{{"kind", to_string(c.kind)},
                {"weights", data::to_string(c.weights)},
                {"canvas", data::to_json(c.canvas)},
                {"n", c.n},
                {"scheme", latents::to_string(c.scheme)},
                {"codebook_size", c.codebook_size},
                {"voken_count", c.voken_count},
                {"blob_quantizer", to_json(c.quantizer)}};
}

inline DataConfig data_config_from_json(const Json& j) {
    DataConfig c;
    c.kind = dataset_kind_from_string(j.at("kind").get<std::string>());
    c.weights = data::weight_variant_from_string(j.at("weights").get<std::string>());
    c.canvas = data::canvas_from_json(j.at("canvas"));
    c.n = j.at("n").get<int>();
    c.scheme = latents::scheme_from_string(j.at("scheme").get<std::string>());
    c.codebook_size = j.at("codebook_size").get<int>();
    c.voken_count = j.at("voken_count").get<int>();
    c.quantizer = quantizer_from_json(j.at("blob_quantizer"));
    require(c.n >= 1, "dataset size must be >= 1");
    require(c.codebook_size >= 1 && c.voken_count >= 1, "codebook size and voken count must be >= 1");
    return c;
}

inline Json to_json(const diffusion::DenoiserConfig& c) {
    return Json{{"data_dim", c.data_dim},
                {"hidden", c.hidden},
                {"activation", nnet::to_string(c.activation)},
                {"num_classes", c.num_classes},
                {"class_embed_dim", c.class_embed_dim},
                {"latent_dim", c.latent_dim},
                {"data_scale", c.data_scale},
                {"embed_init_scale", c.embed_init_scale}};
}

inline diffusion::DenoiserConfig denoiser_config_from_json(const Json& j) {
    diffusion::DenoiserConfig c;
    c.data_dim = j.at("data_dim").get<int>();
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.activation = nnet::activation_from_string(j.at("activation").get<std::string>());
    c.num_classes = j.at("num_classes").get<int>();
    c.class_embed_dim = j.at("class_embed_dim").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.data_scale = j.at("data_scale").get<double>();
    c.embed_init_scale = j.at("embed_init_scale").get<double>();
    return c;
}

inline Json to_json(const latents::NeuralPriorConfig& c) {
    return Json{{"embed_dim", c.embed_dim},
                {"class_embed_dim", c.class_embed_dim},
                {"hidden", c.hidden},
                {"activation", nnet::to_string(c.activation)}};
}

inline latents::NeuralPriorConfig prior_config_from_json(const Json& j) {
    latents::NeuralPriorConfig c;
    c.embed_dim = j.at("embed_dim").get<int>();
    c.class_embed_dim = j.at("class_embed_dim").get<int>();
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.activation = nnet::activation_from_string(j.at("activation").get<std::string>());
    return c;
}

inline Json to_json(const TrainConfig& c) {
    return Json{{"variant", to_string(c.variant)},
                {"prior_backend", latents::to_string(c.prior_backend)},
                {"eta", c.eta},
                {"p_uncond", c.p_uncond},
                {"batch_size", c.batch_size},
                {"steps", c.steps},
                {"learning_rate", c.learning_rate},
                {"warmup_steps", c.warmup_steps},
                {"ema_decay", c.ema_decay},
                {"clip_norm", c.clip_norm},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"schedule", diffusion::to_string(c.schedule)},
                {"schedule_steps", c.schedule_steps},
                {"loss_weighting", diffusion::to_string(c.loss_weighting)},
                {"denoiser", to_json(c.denoiser)},
                {"prior", to_json(c.prior)},
                {"context_window", c.context_window},
                {"smoothing", c.smoothing},
                {"log_every", c.log_every},
                {"checkpoint_every", c.checkpoint_every}};
}

inline TrainConfig train_config_from_json(const Json& j) {
    TrainConfig c;
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.prior_backend = latents::prior_backend_from_string(j.at("prior_backend").get<std::string>());
    c.eta = j.at("eta").get<double>();
    c.p_uncond = j.at("p_uncond").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.steps = j.at("steps").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.warmup_steps = j.at("warmup_steps").get<int>();
    c.ema_decay = j.at("ema_decay").get<double>();
    c.clip_norm = j.at("clip_norm").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.schedule = diffusion::schedule_kind_from_string(j.at("schedule").get<std::string>());
    c.schedule_steps = j.at("schedule_steps").get<int>();
    c.loss_weighting = diffusion::loss_weighting_from_string(j.at("loss_weighting").get<std::string>());
    c.denoiser = denoiser_config_from_json(j.at("denoiser"));
    c.prior = prior_config_from_json(j.at("prior"));
    c.context_window = j.at("context_window").get<int>();
    c.smoothing = j.at("smoothing").get<double>();
    c.log_every = j.at("log_every").get<int>();
    c.checkpoint_every = j.at("checkpoint_every").get<int>();
    c.validate();
    return c;
}

inline Json to_json(const SampleConfig& c) {
    return Json{{"steps", c.steps},         {"clip", c.clip},         {"clip_min", c.clip_min},
                {"clip_max", c.clip_max},   {"cfg_drops_latent", c.cfg_drops_latent},
                {"temperature", c.temperature}, {"n", c.n},           {"class", c.class_id},
                {"guidance", c.guidance},   {"knn_k", c.knn_k},       {"min_count", c.min_count},
                {"n_real", c.n_real}};
}

inline SampleConfig sample_config_from_json(const Json& j) {
    SampleConfig c;
    c.steps = j.at("steps").get<int>();
    c.clip = j.at("clip").get<bool>();
    c.clip_min = j.at("clip_min").get<double>();
    c.clip_max = j.at("clip_max").get<double>();
    c.cfg_drops_latent = j.at("cfg_drops_latent").get<bool>();
    c.temperature = j.at("temperature").get<double>();
    c.n = j.at("n").get<int>();
    c.class_id = j.at("class").get<int>();
    c.guidance = j.at("guidance").get<std::vector<double>>();
    c.knn_k = j.at("knn_k").get<int>();
    c.min_count = j.at("min_count").get<int>();
    c.n_real = j.at("n_real").get<int>();
    require(c.steps >= 1 && c.temperature > 0.0 && c.n >= 1 && c.knn_k >= 1 && c.min_count >= 1 && c.n_real >= 1,
            "sample config has out-of-range values");
    for (double g : c.guidance) require(g >= 0.0, "guidance scales must be >= 0");
    return c;
}

inline Json to_json(const ExperimentConfig& c) {
    return Json{{"data", to_json(c.data)}, {"train", to_json(c.train)}, {"sample", to_json(c.sample)}};
}

inline ExperimentConfig experiment_from_json(const Json& j) {
    try {
        ExperimentConfig c;
        c.data = data_config_from_json(j.at("data"));
        c.train = train_config_from_json(j.at("train"));
        c.sample = sample_config_from_json(j.at("sample"));
        return c;
    } catch (const Json::exception& e) {
        throw ContractViolation(std::string("invalid config: ") + e.what());
    }
}

/// Shipped toy-GMM experiment.
inline ExperimentConfig toy_experiment() { return {}; }

}  // namespace kaleido::train
