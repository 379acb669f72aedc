#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"
#include "kaleido/core/rng.hpp"
#include "kaleido/latents/vocab.hpp"
#include "kaleido/nnet/mlp.hpp"

namespace kaleido::latents {

enum class PriorBackend { tabular, neural };

inline std::string to_string(PriorBackend b) { return b == PriorBackend::tabular ? "tabular" : "neural"; }

inline PriorBackend prior_backend_from_string(std::string_view s) {
    if (s == "tabular") return PriorBackend::tabular;
    if (s == "neural") return PriorBackend::neural;
    throw ContractViolation("unknown prior backend '" + std::string(s) + "'");
}

/// Below this temperature sampling is greedy.
inline constexpr double kGreedyTemperature = 1e-6;

/// Next-token count tables keyed by (class, truncated context).
struct TabularPrior {
    double smoothing = 1.0;
    std::map<std::vector<int>, std::vector<double>> counts;
};

/// Token embeddings of the last `window` tokens plus a class embedding feed
/// an Mlp that emits next-token logits.
struct NeuralPrior {
    Eigen::MatrixXd token_embedding;  // E x V
    Eigen::MatrixXd class_embedding;  // Ec x C
    nnet::Mlp mlp;

    int embed_dim() const { return static_cast<int>(token_embedding.rows()); }
};

struct ArPrior {
    PriorBackend backend = PriorBackend::tabular;
    Scheme scheme = Scheme::text;
    int vocab_size = 0;
    int num_classes = 0;
    int window = 8;
    TabularPrior tabular;
    NeuralPrior neural;

    void check_class(int c) const {
        require(c >= 0 && c < num_classes, "prior class " + std::to_string(c) + " out of range");
    }
};

/// Context for predicting position n: [<bos>, z_1..z_{n-1}] truncated to the
/// last `window` entries.
inline std::vector<int> context_of(std::span<const TokenId> prefix, int window) {
    std::vector<int> ctx;
    ctx.push_back(LatentVocab::kBos);
    ctx.insert(ctx.end(), prefix.begin(), prefix.end());
    if (static_cast<int>(ctx.size()) > window) ctx.erase(ctx.begin(), ctx.end() - window);
    return ctx;
}

namespace detail {

inline std::vector<int> tabular_key(int c, std::span<const int> ctx) {
    std::vector<int> key;
    key.reserve(ctx.size() + 1);
    key.push_back(c);
    key.insert(key.end(), ctx.begin(), ctx.end());
    return key;
}

/// Fixed-width context: left-padded with <bos>.
inline std::vector<int> padded_context(std::span<const int> ctx, int window) {
    std::vector<int> out(static_cast<std::size_t>(window) - std::min(ctx.size(), static_cast<std::size_t>(window)),
                         LatentVocab::kBos);
    out.insert(out.end(), ctx.end() - std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(ctx.size()), window),
               ctx.end());
    return out;
}

inline Eigen::VectorXd neural_input(const ArPrior& prior, int c, std::span<const int> ctx) {
    const auto& np = prior.neural;
    const int e = np.embed_dim();
    const auto padded = padded_context(ctx, prior.window);
    Eigen::VectorXd in(prior.window * e + np.class_embedding.rows());
    for (int i = 0; i < prior.window; ++i) in.segment(i * e, e) = np.token_embedding.col(padded[static_cast<std::size_t>(i)]);
    in.tail(np.class_embedding.rows()) = np.class_embedding.col(c);
    return in;
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - m).exp().matrix();
    return p / p.sum();
}

}  // namespace detail

/// Unnormalized log-probabilities of the next token.
inline Eigen::VectorXd next_token_logits(const ArPrior& prior, int c, std::span<const int> ctx) {
    prior.check_class(c);
    for (int t : ctx) require(t >= 0 && t < prior.vocab_size, "unknown token id " + std::to_string(t));
    if (prior.backend == PriorBackend::neural) return nnet::forward(prior.neural.mlp, detail::neural_input(prior, c, ctx));
    Eigen::VectorXd logits(prior.vocab_size);
    const auto it = prior.tabular.counts.find(detail::tabular_key(c, ctx));
    const double a = prior.tabular.smoothing;
    if (it == prior.tabular.counts.end()) return Eigen::VectorXd::Zero(prior.vocab_size);  // unseen: uniform
    double total = 0.0;
    for (double n : it->second) total += n + a;
    if (total <= 0.0) return Eigen::VectorXd::Zero(prior.vocab_size);
    for (int v = 0; v < prior.vocab_size; ++v) logits[v] = std::log(it->second[static_cast<std::size_t>(v)] + a);
    return logits;
}

/// Next-token distribution at temperature tau (logits / tau, then softmax).
inline Eigen::VectorXd next_token_probs(const ArPrior& prior, int c, std::span<const int> ctx, double tau = 1.0) {
    require(tau > 0.0, "temperature must be > 0");
    return detail::softmax(next_token_logits(prior, c, ctx) / tau);
}

/// -sum_n log P(z_n | z_{0:n-1}, c), including the <eos> term.
inline double ar_nll(const ArPrior& prior, const LatentSequence& seq, int c) {
    require(!seq.tokens.empty(), "ar_nll: empty sequence");
    double nll = 0.0;
    for (std::size_t n = 0; n < seq.tokens.size(); ++n) {
        const TokenId z = seq.tokens[n];
        require(z >= 0 && z < prior.vocab_size, "unknown token id " + std::to_string(z));
        const auto ctx = context_of(std::span(seq.tokens).first(n), prior.window);
        const Eigen::VectorXd logits = next_token_logits(prior, c, ctx);
        const double m = logits.maxCoeff();
        nll -= logits[z] - (m + std::log((logits.array() - m).exp().sum()));
    }
    return nll;
}

struct ArSample {
    LatentSequence seq;
    bool truncated = false;  // max_len reached before <eos>
};

inline ArSample ar_sample(const ArPrior& prior, int c, double tau, Rng& rng, int max_len) {
    require(tau > 0.0, "temperature must be > 0");
    require(max_len >= 1, "max_len must be >= 1");
    ArSample out;
    out.seq.scheme = prior.scheme;
    auto& toks = out.seq.tokens;
    while (static_cast<int>(toks.size()) < max_len) {
        const auto ctx = context_of(toks, prior.window);
        const Eigen::VectorXd logits = next_token_logits(prior, c, ctx);
        int z = 0;
        if (tau <= kGreedyTemperature) {
            Eigen::Index arg = 0;
            logits.maxCoeff(&arg);
            z = static_cast<int>(arg);
        } else {
            const Eigen::VectorXd p = detail::softmax(logits / tau);
            const double u = uniform01(rng);
            double acc = 0.0;
            z = prior.vocab_size - 1;
            for (int v = 0; v < prior.vocab_size; ++v) {
                acc += p[v];
                if (u < acc) {
                    z = v;
                    break;
                }
            }
        }
        toks.push_back(z);
        if (z == LatentVocab::kEos) return out;
    }
    out.truncated = true;
    return out;
}

/// Longest sequence a scheme can produce under the default grammar, plus slack.
inline int default_max_len(Scheme s, int voken_count) {
    const int bbox = 4 * 4 + 3;
    const int blob = 5 * 4 + 4;
    const int voken = 2 * voken_count - 1;
    switch (s) {
        case Scheme::text: return 4;
        case Scheme::bbox: return bbox + 4;
        case Scheme::blob: return blob + 4;
        case Scheme::voken: return voken + 4;
        case Scheme::combined: return 1 + 1 + bbox + 1 + voken + 4;
    }
    return 64;
}

/// Closed-form fit of a tabular prior: add-`smoothing` counts per (class, context).
inline ArPrior fit_tabular(std::span<const int> classes, std::span<const LatentSequence> corpus, int vocab_size,
                           int num_classes, Scheme scheme, int window, double smoothing) {
    require(!corpus.empty() && classes.size() == corpus.size(), "tabular prior needs a non-empty labelled corpus");
    require(window >= 1, "context window must be >= 1");
    require(smoothing >= 0.0, "smoothing must be >= 0");
    ArPrior prior;
    prior.backend = PriorBackend::tabular;
    prior.scheme = scheme;
    prior.vocab_size = vocab_size;
    prior.num_classes = num_classes;
    prior.window = window;
    prior.tabular.smoothing = smoothing;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        prior.check_class(classes[i]);
        const auto& toks = corpus[i].tokens;
        for (std::size_t n = 0; n < toks.size(); ++n) {
            require(toks[n] >= 0 && toks[n] < vocab_size, "unknown token id " + std::to_string(toks[n]));
            const auto ctx = context_of(std::span(toks).first(n), window);
            auto& row = prior.tabular.counts[detail::tabular_key(classes[i], ctx)];
            if (row.empty()) row.assign(static_cast<std::size_t>(vocab_size), 0.0);
            row[static_cast<std::size_t>(toks[n])] += 1.0;
        }
    }
    return prior;
}

struct NeuralPriorConfig {
    int embed_dim = 8;
    int class_embed_dim = 4;
    std::vector<int> hidden{64};
    nnet::Activation activation = nnet::Activation::tanh;
};

inline ArPrior make_neural_prior(const NeuralPriorConfig& cfg, int vocab_size, int num_classes, Scheme scheme,
                                 int window, Rng& rng) {
    require(cfg.embed_dim >= 1 && cfg.class_embed_dim >= 1 && window >= 1, "neural prior dimensions must be positive");
    ArPrior prior;
    prior.backend = PriorBackend::neural;
    prior.scheme = scheme;
    prior.vocab_size = vocab_size;
    prior.num_classes = num_classes;
    prior.window = window;
    auto& np = prior.neural;
    np.token_embedding.resize(cfg.embed_dim, vocab_size);
    for (Eigen::Index i = 0; i < np.token_embedding.size(); ++i) np.token_embedding.data()[i] = standard_normal(rng);
    np.class_embedding.resize(cfg.class_embed_dim, num_classes);
    for (Eigen::Index i = 0; i < np.class_embedding.size(); ++i) np.class_embedding.data()[i] = standard_normal(rng);
    std::vector<int> dims{window * cfg.embed_dim + cfg.class_embed_dim};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(vocab_size);
    np.mlp = nnet::Mlp::random(dims, cfg.activation, rng);
    return prior;
}

struct NeuralPriorGrads {
    nnet::GradBuffer mlp;
    Eigen::MatrixXd token_embedding;
    Eigen::MatrixXd class_embedding;

    static NeuralPriorGrads zeros_like(const NeuralPrior& np) {
        return {nnet::GradBuffer::zeros_like(np.mlp),
                Eigen::MatrixXd::Zero(np.token_embedding.rows(), np.token_embedding.cols()),
                Eigen::MatrixXd::Zero(np.class_embedding.rows(), np.class_embedding.cols())};
    }
};

struct NeuralNllResult {
    double nll = 0.0;  // summed over sequences
    NeuralPriorGrads grads;
};

/// Summed NLL of a batch of sequences and its gradient scaled by `grad_scale`.
inline NeuralNllResult neural_nll_batch(const ArPrior& prior, std::span<const int> classes,
                                        std::span<const LatentSequence* const> seqs, double grad_scale) {
    require(prior.backend == PriorBackend::neural, "neural_nll_batch needs the neural backend");
    require(classes.size() == seqs.size(), "neural_nll_batch: one class per sequence");
    const auto& np = prior.neural;
    const int e = np.embed_dim();
    const int w = prior.window;
    NeuralNllResult result{0.0, NeuralPriorGrads::zeros_like(np)};
    if (seqs.empty()) return result;

    std::vector<std::vector<int>> contexts;
    std::vector<int> ctx_class;
    std::vector<int> targets;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        prior.check_class(classes[i]);
        const auto& toks = seqs[i]->tokens;
        require(!toks.empty(), "neural_nll_batch: empty sequence");
        for (std::size_t n = 0; n < toks.size(); ++n) {
            require(toks[n] >= 0 && toks[n] < prior.vocab_size, "unknown token id " + std::to_string(toks[n]));
            contexts.push_back(detail::padded_context(context_of(std::span(toks).first(n), w), w));
            ctx_class.push_back(classes[i]);
            targets.push_back(toks[n]);
        }
    }
    const auto P = static_cast<Eigen::Index>(targets.size());
    Eigen::MatrixXd input(w * e + np.class_embedding.rows(), P);
    for (Eigen::Index j = 0; j < P; ++j) {
        const auto& ctx = contexts[static_cast<std::size_t>(j)];
        for (int i = 0; i < w; ++i) input.col(j).segment(i * e, e) = np.token_embedding.col(ctx[static_cast<std::size_t>(i)]);
        input.col(j).tail(np.class_embedding.rows()) = np.class_embedding.col(ctx_class[static_cast<std::size_t>(j)]);
    }
    const auto trace = nnet::forward_trace(np.mlp, input);
    Eigen::MatrixXd upstream(prior.vocab_size, P);
    for (Eigen::Index j = 0; j < P; ++j) {
        const Eigen::VectorXd logits = trace.output.col(j);
        const double m = logits.maxCoeff();
        const double lse = m + std::log((logits.array() - m).exp().sum());
        const int z = targets[static_cast<std::size_t>(j)];
        result.nll -= logits[z] - lse;
        upstream.col(j) = (logits.array() - lse).exp().matrix();
        upstream(z, j) -= 1.0;
    }
    upstream *= grad_scale;
    result.grads.mlp = nnet::backward_batch(np.mlp, trace, upstream);
    const auto& gin = result.grads.mlp.input;
    for (Eigen::Index j = 0; j < P; ++j) {
        const auto& ctx = contexts[static_cast<std::size_t>(j)];
        for (int i = 0; i < w; ++i) result.grads.token_embedding.col(ctx[static_cast<std::size_t>(i)]) += gin.col(j).segment(i * e, e);
        result.grads.class_embedding.col(ctx_class[static_cast<std::size_t>(j)]) += gin.col(j).tail(np.class_embedding.rows());
    }
    return result;
}

/// Mean of the payload-token embeddings; an empty payload embeds as <eos>.
inline Eigen::VectorXd embed_latents(const LatentSequence& seq, const Eigen::MatrixXd& table) {
    const auto payload = seq.payload();
    if (payload.empty()) return table.col(LatentVocab::kEos);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(table.rows());
    for (TokenId t : payload) {
        require(t >= 0 && t < table.cols(), "unknown token id " + std::to_string(t));
        out += table.col(t);
    }
    return out / static_cast<double>(payload.size());
}

/// Adds d(loss)/d(table) given d(loss)/d(embed_latents(seq)).
inline void accumulate_embed_grad(const LatentSequence& seq, const Eigen::VectorXd& g, Eigen::MatrixXd& table_grad) {
    const auto payload = seq.payload();
    if (payload.empty()) {
        table_grad.col(LatentVocab::kEos) += g;
        return;
    }
    const double inv = 1.0 / static_cast<double>(payload.size());
    for (TokenId t : payload) table_grad.col(t) += inv * g;
}

}  // namespace kaleido::latents
