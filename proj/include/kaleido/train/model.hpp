#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kaleido/core/error.hpp"
#include "kaleido/core/rng.hpp"
#include "kaleido/data/dataset_io.hpp"
#include "kaleido/diffusion/condition.hpp"
#include "kaleido/diffusion/denoiser.hpp"
#include "kaleido/diffusion/schedule.hpp"
#include "kaleido/latents/extract.hpp"
#include "kaleido/latents/prior.hpp"
#include "kaleido/nnet/serialize.hpp"
#include "kaleido/train/config.hpp"

namespace kaleido::train {

/// Denoiser plus (for kaleido) the latent prior and the token embedding table
/// used for latent conditioning. With a neural prior the table is the prior's
/// own, so both losses train it.
struct Model {
    Variant variant = Variant::kaleido;
    latents::LatentContext latent_ctx;
    diffusion::NoiseSchedule sched;
    diffusion::DenoiserNet denoiser;
    latents::ArPrior prior;
    Eigen::MatrixXd token_embedding;  // latent_dim x V; used only with a tabular prior

    bool kaleido() const { return variant == Variant::kaleido; }
    bool neural_prior() const { return kaleido() && prior.backend == latents::PriorBackend::neural; }

    const Eigen::MatrixXd& embedding_table() const {
        return neural_prior() ? prior.neural.token_embedding : token_embedding;
    }
    Eigen::MatrixXd& embedding_table() { return neural_prior() ? prior.neural.token_embedding : token_embedding; }

    int dim() const { return denoiser.dim(); }

    /// Embedded latent per condition; baseline models ignore latents.
    Eigen::MatrixXd latent_block(std::span<const diffusion::Condition> conds) const {
        Eigen::MatrixXd lat(denoiser.config.latent_dim, static_cast<Eigen::Index>(conds.size()));
        for (std::size_t j = 0; j < conds.size(); ++j) {
            const auto& c = conds[j];
            lat.col(static_cast<Eigen::Index>(j)) =
                kaleido() && c.latent ? latents::embed_latents(*c.latent, embedding_table()) : denoiser.null_latent;
        }
        return lat;
    }

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x, int t, std::span<const diffusion::Condition> conds) const {
        require(static_cast<std::size_t>(x.cols()) == conds.size(), "predict: one condition per column");
        std::vector<int> ts(conds.size(), t);
        std::vector<int> classes;
        classes.reserve(conds.size());
        for (const auto& c : conds) classes.push_back(c.class_id);
        return denoiser.predict_batch(x, ts, classes, latent_block(conds), sched);
    }
};

static_assert(diffusion::Denoiser<Model>);

/// Fresh model. Each part draws from its own stream so baseline and kaleido
/// models from one seed start with identical denoisers.
inline Model make_model(const TrainConfig& cfg, latents::LatentContext ctx, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.variant = cfg.variant;
    m.latent_ctx = std::move(ctx);
    m.sched = diffusion::make_schedule(cfg.schedule, cfg.schedule_steps);
    Rng init = make_rng(seed, Stream::init);
    m.denoiser = diffusion::DenoiserNet::init(cfg.denoiser, init);
    if (!m.kaleido()) return m;
    const int V = m.latent_ctx.vocab.size();
    const int C = cfg.denoiser.num_classes;
    if (cfg.prior_backend == latents::PriorBackend::neural) {
        Rng prng = make_rng(seed, Stream::prior);
        m.prior = latents::make_neural_prior(cfg.prior, V, C, m.latent_ctx.scheme(), cfg.context_window, prng);
        m.prior.neural.token_embedding *= cfg.denoiser.embed_init_scale;
    } else {
        m.prior.backend = latents::PriorBackend::tabular;
        m.prior.scheme = m.latent_ctx.scheme();
        m.prior.vocab_size = V;
        m.prior.num_classes = C;
        m.prior.window = cfg.context_window;
        m.prior.tabular.smoothing = cfg.smoothing;
        Rng erng = make_rng(seed, Stream::embedding);
        m.token_embedding.resize(cfg.denoiser.latent_dim, V);
        for (Eigen::Index i = 0; i < m.token_embedding.size(); ++i)
            m.token_embedding.data()[i] = cfg.denoiser.embed_init_scale * standard_normal(erng);
    }
    return m;
}

/// Gradient of the joint loss, aligned with model_parameters().
struct ModelGrads {
    diffusion::DenoiserGrads denoiser;
    Eigen::MatrixXd table;
    std::optional<latents::NeuralPriorGrads> prior;

    std::vector<nnet::ParamSpan> spans() {
        auto out = denoiser.mlp.spans();
        for (auto& s : out) s.name = "denoiser." + s.name;
        auto& d = denoiser;
        out.push_back({"denoiser.class_embedding", {d.class_embedding.data(), static_cast<std::size_t>(d.class_embedding.size())}});
        out.push_back({"denoiser.null_latent", {d.null_latent.data(), static_cast<std::size_t>(d.null_latent.size())}});
        if (table.size() > 0) out.push_back({"latent.token_embedding", {table.data(), static_cast<std::size_t>(table.size())}});
        if (prior) {
            out.push_back({"prior.class_embedding",
                           {prior->class_embedding.data(), static_cast<std::size_t>(prior->class_embedding.size())}});
            for (auto s : prior->mlp.spans()) {
                s.name = "prior." + s.name;
                out.push_back(std::move(s));
            }
        }
        return out;
    }
};

inline std::vector<nnet::ParamSpan> model_parameters(Model& m) {
    auto out = m.denoiser.mlp.parameters();
    for (auto& s : out) s.name = "denoiser." + s.name;
    auto& d = m.denoiser;
    out.push_back({"denoiser.class_embedding", {d.class_embedding.data(), static_cast<std::size_t>(d.class_embedding.size())}});
    out.push_back({"denoiser.null_latent", {d.null_latent.data(), static_cast<std::size_t>(d.null_latent.size())}});
    if (m.kaleido()) {
        auto& t = m.embedding_table();
        out.push_back({"latent.token_embedding", {t.data(), static_cast<std::size_t>(t.size())}});
    }
    if (m.neural_prior()) {
        auto& np = m.prior.neural;
        out.push_back({"prior.class_embedding", {np.class_embedding.data(), static_cast<std::size_t>(np.class_embedding.size())}});
        for (auto s : np.mlp.parameters()) {
            s.name = "prior." + s.name;
            out.push_back(std::move(s));
        }
    }
    return out;
}

// Checkpoint encoding.

inline Json to_json(const latents::LatentContext& c) {
    Json j{{"scheme", latents::to_string(c.scheme())},
           {"num_classes", c.vocab.spec().num_classes},
           {"modes_per_class", c.vocab.spec().modes_per_class},
           {"codebook_size", c.vocab.spec().codebook_size},
           {"voken_count", c.grammar.voken_count},
           {"blob_quantizer", to_json(c.grammar.quantizer)},
           {"bbox_threshold", c.bbox_threshold},
           {"object_threshold", c.object_threshold},
           {"gmm", c.gmm ? data::to_json(*c.gmm) : Json(nullptr)},
           {"canvas", c.canvas ? data::to_json(*c.canvas) : Json(nullptr)},
           {"codebook", c.codebook ? nnet::matrix_to_json(c.codebook->centroids) : Json(nullptr)}};
    return j;
}

inline latents::LatentContext latent_context_from_json(const Json& j) {
    latents::LatentContext c;
    latents::VocabSpec vs;
    vs.scheme = latents::scheme_from_string(j.at("scheme").get<std::string>());
    vs.num_classes = j.at("num_classes").get<int>();
    vs.modes_per_class = j.at("modes_per_class").get<int>();
    vs.codebook_size = j.at("codebook_size").get<int>();
    c.vocab = latents::LatentVocab::build(vs);
    c.grammar.voken_count = j.at("voken_count").get<int>();
    c.grammar.quantizer = quantizer_from_json(j.at("blob_quantizer"));
    c.bbox_threshold = j.at("bbox_threshold").get<double>();
    c.object_threshold = j.at("object_threshold").get<double>();
    if (!j.at("gmm").is_null()) c.gmm = data::gmm_from_json(j.at("gmm"));
    if (!j.at("canvas").is_null()) c.canvas = data::canvas_from_json(j.at("canvas"));
    if (!j.at("codebook").is_null()) c.codebook = latents::Codebook{nnet::matrix_from_json(j.at("codebook"))};
    return c;
}

inline Json to_json(const latents::ArPrior& p) {
    Json j{{"backend", latents::to_string(p.backend)},
           {"scheme", latents::to_string(p.scheme)},
           {"vocab_size", p.vocab_size},
           {"num_classes", p.num_classes},
           {"window", p.window}};
    if (p.backend == latents::PriorBackend::tabular) {
        Json rows = Json::array();
        for (const auto& [key, counts] : p.tabular.counts) rows.push_back({{"key", key}, {"counts", counts}});
        j["tabular"] = {{"smoothing", p.tabular.smoothing}, {"rows", rows}};
    } else {
        j["neural"] = {{"token_embedding", nnet::matrix_to_json(p.neural.token_embedding)},
                       {"class_embedding", nnet::matrix_to_json(p.neural.class_embedding)},
                       {"mlp", nnet::to_json(p.neural.mlp)}};
    }
    return j;
}

inline latents::ArPrior prior_from_json(const Json& j) {
    latents::ArPrior p;
    p.backend = latents::prior_backend_from_string(j.at("backend").get<std::string>());
    p.scheme = latents::scheme_from_string(j.at("scheme").get<std::string>());
    p.vocab_size = j.at("vocab_size").get<int>();
    p.num_classes = j.at("num_classes").get<int>();
    p.window = j.at("window").get<int>();
    if (p.backend == latents::PriorBackend::tabular) {
        const auto& t = j.at("tabular");
        p.tabular.smoothing = t.at("smoothing").get<double>();
        for (const auto& row : t.at("rows"))
            p.tabular.counts[row.at("key").get<std::vector<int>>()] = row.at("counts").get<std::vector<double>>();
    } else {
        const auto& n = j.at("neural");
        p.neural.token_embedding = nnet::matrix_from_json(n.at("token_embedding"));
        p.neural.class_embedding = nnet::matrix_from_json(n.at("class_embedding"));
        p.neural.mlp = nnet::mlp_from_json(n.at("mlp"));
    }
    return p;
}

/// Learned parameters only; configuration is stored once per checkpoint.
inline Json parameters_to_json(const Model& m) {
    Json j{{"denoiser_mlp", nnet::to_json(m.denoiser.mlp)},
           {"class_embedding", nnet::matrix_to_json(m.denoiser.class_embedding)},
           {"null_latent", nnet::vector_to_json(m.denoiser.null_latent)}};
    if (m.kaleido()) {
        j["prior"] = to_json(m.prior);
        j["token_embedding"] = nnet::matrix_to_json(m.token_embedding);
    }
    return j;
}

inline Model model_from_json(const TrainConfig& cfg, const latents::LatentContext& ctx, const Json& j) {
    Model m;
    m.variant = cfg.variant;
    m.latent_ctx = ctx;
    m.sched = diffusion::make_schedule(cfg.schedule, cfg.schedule_steps);
    m.denoiser.config = cfg.denoiser;
    m.denoiser.mlp = nnet::mlp_from_json(j.at("denoiser_mlp"));
    m.denoiser.class_embedding = nnet::matrix_from_json(j.at("class_embedding"));
    m.denoiser.null_latent = nnet::vector_from_json(j.at("null_latent"));
    require(m.denoiser.mlp.in_dim() == cfg.denoiser.input_dim() && m.denoiser.mlp.out_dim() == cfg.denoiser.data_dim,
            "checkpoint network does not match its configuration");
    if (m.kaleido()) {
        m.prior = prior_from_json(j.at("prior"));
        m.token_embedding = nnet::matrix_from_json(j.at("token_embedding"));
        require(m.prior.vocab_size == ctx.vocab.size(), "checkpoint prior vocabulary does not match the latent scheme");
    }
    return m;
}

}  // namespace kaleido::train
