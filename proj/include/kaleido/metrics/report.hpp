#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/data/gmm.hpp"
#include "kaleido/latents/extract.hpp"
#include "kaleido/metrics/metrics.hpp"

namespace kaleido::metrics {

struct EvalOptions {
    std::string variant;
    int class_id = 0;
    double guidance = 1.0;
    std::uint64_t seed = 0;
    int knn_k = 3;
    int min_count = 10;
};

/// Full report for generated samples of one class against real samples of
/// that class. Mode metrics need the GMM; adherence needs the conditioning latents.
inline MetricReport evaluate(const Eigen::MatrixXd& gen, const Eigen::MatrixXd& real, const EvalOptions& opt,
                             const data::GmmSpec* gmm = nullptr,
                             std::span<const latents::LatentSequence> conditioned = {},
                             const latents::LatentContext* ctx = nullptr) {
    MetricReport r;
    r.variant = opt.variant;
    r.class_id = opt.class_id;
    r.guidance = opt.guidance;
    r.seed = opt.seed;
    r.n_samples = static_cast<int>(gen.cols());
    r.n_real = static_cast<int>(real.cols());
    if (gmm) {
        const int cls[] = {opt.class_id};
        const auto cov = mode_coverage(gen, *gmm, opt.min_count, cls);
        r.mode_coverage = cov.coverage;
        for (int k = 0; k < gmm->size(); ++k)
            r.mode_counts.emplace_back(data::mode_name(gmm->at(k).class_id, gmm->at(k).mode_id),
                                       cov.counts[static_cast<std::size_t>(k)]);
        r.uncounted = cov.uncounted;
        r.minority_fraction = within_class_fraction(gen, *gmm, opt.class_id, minority_mode(*gmm, opt.class_id));
    }
    const auto rp = knn_recall_precision(real, gen, opt.knn_k);
    r.recall = rp.recall;
    r.precision = rp.precision;
    if (gen.cols() > gen.rows() && real.cols() > real.rows()) {
        const auto fd = frechet_distance(real, gen);
        r.frechet_distance = fd.value;
        r.frechet_jittered = fd.jittered;
    }
    if (ctx && !conditioned.empty()) {
        std::vector<int> classes(conditioned.size(), opt.class_id);
        r.latent_adherence = latent_adherence(gen, classes, conditioned, *ctx);
    }
    r.validate();
    return r;
}

}  // namespace kaleido::metrics
