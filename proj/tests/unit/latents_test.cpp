#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "kaleido/data/canvas.hpp"
#include "kaleido/latents/codebook.hpp"
#include "kaleido/latents/ellipse.hpp"
#include "kaleido/latents/extract.hpp"
#include "kaleido/latents/grammar.hpp"
#include "kaleido/latents/prior.hpp"
#include "kaleido/train/trainer.hpp"

using namespace kaleido;
using namespace kaleido::latents;

namespace {

LatentVocab vocab_for(Scheme s, int codebook = 16) {
    VocabSpec spec;
    spec.scheme = s;
    spec.codebook_size = codebook;
    return LatentVocab::build(spec);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

ParsedLatent random_latent(Scheme s, const LatentVocab& vocab, const GrammarSpec& g, Rng& rng) {
    ParsedLatent p;
    p.scheme = s;
    if (s == Scheme::text || s == Scheme::combined) {
        p.class_id = uniform_int(rng, 0, vocab.spec().num_classes - 1);
        p.mode_id = uniform_int(rng, 0, vocab.spec().modes_per_class - 1);
    }
    if (s == Scheme::bbox || s == Scheme::combined) {
        int a = uniform_int(rng, 0, 1000), b = uniform_int(rng, 0, 1000);
        int c = uniform_int(rng, 0, 1000), d = uniform_int(rng, 0, 1000);
        p.bbox = BboxParams{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
    }
    if (s == Scheme::blob) {
        const auto& q = g.quantizer;
        int r1 = uniform_int(rng, 0, q.radius_bins - 1), r2 = uniform_int(rng, 0, q.radius_bins - 1);
        p.blob = BlobBins{uniform_int(rng, 0, q.position_bins - 1), uniform_int(rng, 0, q.position_bins - 1),
                          std::max(r1, r2), std::min(r1, r2), uniform_int(rng, 0, q.angle_bins - 1)};
    }
    if (s == Scheme::voken || s == Scheme::combined)
        for (int i = 0; i < g.voken_count; ++i) p.vokens.push_back(uniform_int(rng, 0, vocab.spec().codebook_size - 1));
    return p;
}

void expect_same(const ParsedLatent& a, const ParsedLatent& b) {
    EXPECT_EQ(a.scheme, b.scheme);
    EXPECT_EQ(a.class_id, b.class_id);
    EXPECT_EQ(a.mode_id, b.mode_id);
    EXPECT_EQ(a.bbox, b.bbox);
    EXPECT_EQ(a.blob, b.blob);
    EXPECT_EQ(a.vokens, b.vokens);
}

double entropy(const Eigen::VectorXd& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0) h -= v * std::log(v);
    return h;
}

}  // namespace

TEST(Vocab, ReservedIdsAndSchemeAlphabets) {
    const auto text = vocab_for(Scheme::text);
    EXPECT_EQ(text.surface(LatentVocab::kBos), "<bos>");
    EXPECT_EQ(text.surface(LatentVocab::kEos), "<eos>");
    EXPECT_EQ(text.surface(LatentVocab::kDelimiter), "#");
    EXPECT_EQ(text.size(), 3 + 4);
    EXPECT_EQ(text.mode_of(text.mode(1, 1)), std::make_pair(1, 1));
    EXPECT_FALSE(text.contains(","));

    const auto bbox = vocab_for(Scheme::bbox);
    EXPECT_EQ(bbox.size(), 3 + 1 + 10);
    EXPECT_EQ(bbox.digit_value(bbox.digit(7)), 7);
    EXPECT_FALSE(bbox.contains("mode_0A"));

    const auto comb = vocab_for(Scheme::combined, 8);
    EXPECT_EQ(comb.size(), 3 + 1 + 4 + 11 + 8);
    EXPECT_EQ(comb.voken_of(comb.voken(5)), 5);
    EXPECT_THROW(comb.id("v8"), ContractViolation);
}

TEST(Vocab, SurfaceRoundTrip) {
    const auto v = vocab_for(Scheme::text);
    const auto seq = from_surface(v, "mode_1B");
    EXPECT_EQ(seq.tokens.back(), LatentVocab::kEos);
    EXPECT_EQ(to_surface(v, seq), "mode_1B <eos>");
    EXPECT_EQ(from_surface(v, to_surface(v, seq)), seq);
    EXPECT_THROW(from_surface(v, "mode_9Z"), ContractViolation);
}

class GrammarRoundTrip : public ::testing::TestWithParam<Scheme> {};

TEST_P(GrammarRoundTrip, EncodeDecodeIsIdempotent) {
    const Scheme s = GetParam();
    const auto vocab = vocab_for(s, 32);
    GrammarSpec g;
    g.voken_count = 4;
    Rng rng = make_rng(17, Stream::init, static_cast<std::uint64_t>(s));
    for (int i = 0; i < 10000; ++i) {
        const auto p = random_latent(s, vocab, g, rng);
        const auto seq = encode_latent(vocab, p, g);
        ASSERT_TRUE(is_valid(vocab, seq, g)) << to_surface(vocab, seq);
        const auto back = parse_latent(vocab, seq, g);
        expect_same(back, p);
        EXPECT_EQ(encode_latent(vocab, back, g), seq);
        EXPECT_EQ(from_surface(vocab, to_surface(vocab, seq)), seq);
        if (HasFailure()) break;
    }
}

INSTANTIATE_TEST_SUITE_P(Schemes, GrammarRoundTrip,
                         ::testing::Values(Scheme::bbox, Scheme::blob, Scheme::voken, Scheme::combined, Scheme::text),
                         [](const auto& info) { return to_string(info.param); });

TEST(Grammar, LiteralBboxExample) {
    const auto vocab = vocab_for(Scheme::bbox);
    const GrammarSpec g;
    const auto seq = from_surface(vocab, "1 , 3 3 , 9 9 5 , 9 9 5");
    const auto p = parse_latent(vocab, seq, g);
    EXPECT_EQ(*p.bbox, (BboxParams{1, 33, 995, 995}));
    EXPECT_EQ(to_surface(vocab, encode_latent(vocab, p, g)), "1 , 3 3 , 9 9 5 , 9 9 5 <eos>");
}

TEST(Grammar, RejectsMalformedSequences) {
    const auto bbox = vocab_for(Scheme::bbox);
    const GrammarSpec g;
    for (const char* bad : {"0 1 , 2 , 3 , 4",         // leading zero
                            "1 0 0 0 0 , 2 , 3 , 4",   // five digits
                            "1 , 2 , 3",               // too few numbers
                            "5 , 2 , 3 , 4",           // x1 > x2
                            "1 , 2 , 3 , 1 0 0 1",     // > 1000
                            "1 , 2 3 , 4 , 5 ,"}) {
        EXPECT_FALSE(is_valid(bbox, from_surface(bbox, bad), g)) << bad;
    }
    const auto voken = vocab_for(Scheme::voken, 8);
    EXPECT_FALSE(is_valid(voken, from_surface(voken, "v1 # v2 # v3"), g));
    EXPECT_FALSE(is_valid(voken, from_surface(voken, "v1 v2 # v3 # v4"), g));
    EXPECT_TRUE(is_valid(voken, from_surface(voken, "v1 # v2 # v3 # v4"), g));

    const auto comb = vocab_for(Scheme::combined, 8);
    EXPECT_FALSE(is_valid(comb, from_surface(comb, "mode_0A | 1 , 2 , 3 , 4 v1 # v2 # v3 # v4"), g));
    EXPECT_TRUE(is_valid(comb, from_surface(comb, "mode_0A | 1 , 2 , 3 , 4 | v1 # v2 # v3 # v4"), g));

    const auto blob = vocab_for(Scheme::blob);
    EXPECT_FALSE(is_valid(blob, from_surface(blob, "5 , 5 , 2 , 3 , 9"), g));  // minor > major
    EXPECT_TRUE(is_valid(blob, from_surface(blob, "5 , 5 , 3 , 2 , 9"), g));

    LatentSequence no_eos{Scheme::bbox, {bbox.digit(1)}};
    EXPECT_FALSE(is_valid(bbox, no_eos, g));
}

TEST(Grammar, BlobQuantizationIsStable) {
    const BlobQuantizer q;
    Rng rng = make_rng(5, Stream::init);
    for (int i = 0; i < 1000; ++i) {
        BlobParams p{1000 * uniform01(rng), 1000 * uniform01(rng), 0, 0, 180 * uniform01(rng)};
        p.r_major = 1 + 500 * uniform01(rng);
        p.r_minor = p.r_major * (0.05 + 0.95 * uniform01(rng));
        if (p.theta_deg >= 180.0) continue;
        const auto bins = quantize(p, q);
        const auto back = dequantize(bins, q);
        EXPECT_EQ(quantize(back, q), bins);
        EXPECT_LE(std::abs(back.xc - p.xc), 0.5 + 1e-9);
        EXPECT_LE(std::abs(back.theta_deg - p.theta_deg), 0.5 + 1e-9);
    }
}

TEST(Ellipse, RecoversAxesOfSymmetricPointSet) {
    // +-a along u and +-b along v: covariance (a^2 uu' + b^2 vv') / 2.
    const double a = 3.0, b = 1.0, th = 30.0 * std::numbers::pi / 180.0;
    const Eigen::Vector2d u(std::cos(th), std::sin(th)), v(-std::sin(th), std::cos(th)), m(4.0, -2.0);
    Eigen::Matrix2Xd pts(2, 4);
    pts << (m + a * u), (m - a * u), (m + b * v), (m - b * v);
    const auto fit = ellipse_fit(pts).params;
    EXPECT_NEAR(fit.xc, 4.0, 1e-12);
    EXPECT_NEAR(fit.yc, -2.0, 1e-12);
    EXPECT_NEAR(fit.r_major, 2.0 * a / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(fit.r_minor, 2.0 * b / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(fit.theta_deg, 30.0, 1e-9);
}

TEST(Ellipse, FoldsOrientationAndFlagsDegenerate) {
    Eigen::Matrix2Xd pts(2, 2);
    pts << 1, -1, 1, -1;  // along 45 degrees
    EXPECT_NEAR(ellipse_fit(pts).params.theta_deg, 45.0, 1e-9);
    pts << 1, -1, -1, 1;  // along 135 degrees
    EXPECT_NEAR(ellipse_fit(pts).params.theta_deg, 135.0, 1e-9);
    pts << 2, 2, 3, 3;
    EXPECT_TRUE(ellipse_fit(pts).degenerate);
}

TEST(Ellipse, GridFitFollowsRenderedBump) {
    data::CanvasSpec spec;
    spec.width = spec.height = 32;
    for (double theta : {0.0, 20.0, 90.0, 150.0}) {
        data::Bump b{16.0, 15.0, 3.0, 1.2, theta, 1.0};
        const auto fit = ellipse_fit_grid(data::render_canvas(spec, {b}), spec.width, spec.height).params;
        EXPECT_NEAR(fit.xc, 16.0, 0.05);
        EXPECT_NEAR(fit.yc, 15.0, 0.05);
        const double d = std::abs(fit.theta_deg - theta);
        EXPECT_LT(std::min(d, 180.0 - d), 1.0) << theta;
        EXPECT_GT(fit.r_major, fit.r_minor * 2.0);
    }
}

TEST(Codebook, LloydObjectiveNeverIncreases) {
    Rng rng = make_rng(2, Stream::init);
    Eigen::MatrixXd x(3, 400);
    for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) = normal_vector(rng, 3) + Eigen::Vector3d::Constant(j % 4 * 3.0);
    const auto r = build_codebook(x, 6, 11);
    ASSERT_FALSE(r.objective.empty());
    for (std::size_t i = 1; i < r.objective.size(); ++i) EXPECT_LE(r.objective[i], r.objective[i - 1] + 1e-9);
    EXPECT_TRUE(r.converged);
    const auto again = build_codebook(x, 6, 11);
    EXPECT_EQ(again.codebook.centroids, r.codebook.centroids);

    for (Eigen::Index j = 0; j < 50; ++j) {
        const Eigen::VectorXd q = normal_vector(rng, 3) * 4.0;
        int best = 0;
        for (int k = 1; k < 6; ++k)
            if ((r.codebook.centroids.col(k) - q).squaredNorm() < (r.codebook.centroids.col(best) - q).squaredNorm())
                best = k;
        EXPECT_EQ(r.codebook.nearest(q), best);
    }
}

TEST(Codebook, RejectsTooManyCentroidsAndEncodesChunks) {
    Eigen::MatrixXd x(1, 4);
    x << 1, 1, 2, 2;
    EXPECT_THROW(build_codebook(x, 3, 1), ContractViolation);
    const auto cb = build_codebook(x, 2, 1).codebook;
    Eigen::VectorXd feat(3);
    feat << 2.1, 0.9, 1.6;
    const auto ids = voken_encode(feat, cb, 3);
    const auto dec = voken_decode(ids, cb);
    EXPECT_DOUBLE_EQ(dec[0], 2.0);
    EXPECT_DOUBLE_EQ(dec[1], 1.0);
    EXPECT_DOUBLE_EQ(dec[2], 2.0);
    EXPECT_THROW(voken_encode(feat, cb, 2), ContractViolation);
}

TEST(TabularPrior, EqualsSmoothedEmpiricalFrequencies) {
    const auto vocab = vocab_for(Scheme::voken, 4);
    GrammarSpec g;
    g.voken_count = 3;
    Rng rng = make_rng(8, Stream::init);
    std::vector<LatentSequence> corpus;
    std::vector<int> classes;
    for (int i = 0; i < 300; ++i) {
        auto p = random_latent(Scheme::voken, vocab, g, rng);
        if (i % 3 == 0) p.vokens[0] = 1;  // skew one context
        corpus.push_back(encode_latent(vocab, p, g));
        classes.push_back(i % 2);
    }
    const double alpha = 0.5;
    const int window = 3;
    const auto prior = fit_tabular(classes, corpus, vocab.size(), 2, Scheme::voken, window, alpha);

    // brute-force counts over every (class, context) seen in the corpus
    std::map<std::vector<int>, std::vector<double>> counts;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& t = corpus[i].tokens;
        std::vector<int> full{LatentVocab::kBos};
        for (std::size_t n = 0; n < t.size(); ++n) {
            std::vector<int> ctx(full.end() - std::min<std::ptrdiff_t>(window, static_cast<std::ptrdiff_t>(full.size())),
                                 full.end());
            ctx.insert(ctx.begin(), classes[i]);
            auto& row = counts[ctx];
            row.resize(static_cast<std::size_t>(vocab.size()), 0.0);
            row[static_cast<std::size_t>(t[n])] += 1;
            full.push_back(t[n]);
        }
    }
    for (const auto& [key, row] : counts) {
        const std::vector<int> ctx(key.begin() + 1, key.end());
        const auto p = next_token_probs(prior, key[0], ctx);
        double total = 0;
        for (double c : row) total += c;
        for (int v = 0; v < vocab.size(); ++v)
            EXPECT_NEAR(p[v], (row[static_cast<std::size_t>(v)] + alpha) / (total + alpha * vocab.size()), 1e-15);
    }
    const std::vector<int> unseen{LatentVocab::kEos, LatentVocab::kEos};
    const auto u = next_token_probs(prior, 0, unseen);
    EXPECT_NEAR(u.maxCoeff() - u.minCoeff(), 0.0, 1e-15);
    EXPECT_NEAR(u.sum(), 1.0, 1e-12);
}

TEST(TabularPrior, NllMatchesChainRule) {
    const auto vocab = vocab_for(Scheme::text);
    std::vector<LatentSequence> corpus{from_surface(vocab, "mode_0A"), from_surface(vocab, "mode_0A"),
                                       from_surface(vocab, "mode_0B")};
    const std::vector<int> classes{0, 0, 0};
    const auto prior = fit_tabular(classes, corpus, vocab.size(), 2, Scheme::text, 4, 1.0);
    // P(mode_0A | bos) = 3/10, P(eos | bos mode_0A) = 3/9
    EXPECT_NEAR(ar_nll(prior, corpus[0], 0), -std::log(3.0 / 10.0) - std::log(3.0 / 9.0), 1e-12);
}

TEST(TabularPrior, TemperatureSharpensAndGreedyIsArgmax) {
    const auto vocab = vocab_for(Scheme::text);
    std::vector<LatentSequence> corpus;
    std::vector<int> classes;
    for (int i = 0; i < 10; ++i) {
        corpus.push_back(from_surface(vocab, i < 7 ? "mode_1A" : "mode_1B"));
        classes.push_back(1);
    }
    const auto prior = fit_tabular(classes, corpus, vocab.size(), 2, Scheme::text, 4, 0.1);
    const std::vector<int> ctx{LatentVocab::kBos};
    double last = std::numeric_limits<double>::infinity();
    for (double tau : {4.0, 2.0, 1.0, 0.5, 0.25, 0.1}) {
        const double h = entropy(next_token_probs(prior, 1, ctx, tau));
        EXPECT_LE(h, last + 1e-12);
        last = h;
    }
    Rng rng = make_rng(1, Stream::prior);
    for (int i = 0; i < 20; ++i) {
        const auto s = ar_sample(prior, 1, kGreedyTemperature, rng, 4);
        EXPECT_EQ(to_surface(vocab, LatentSequence{Scheme::text, s.seq.tokens}), "mode_1A <eos>");
    }
}

TEST(TabularPrior, SamplingReproducesCorpusFrequencies) {
    const auto vocab = vocab_for(Scheme::text);
    std::vector<LatentSequence> corpus;
    std::vector<int> classes;
    for (int i = 0; i < 1000; ++i) {
        corpus.push_back(from_surface(vocab, i % 10 < 3 ? "mode_0B" : "mode_0A"));
        classes.push_back(0);
    }
    const auto prior = fit_tabular(classes, corpus, vocab.size(), 2, Scheme::text, 4, 0.0);
    Rng rng = make_rng(3, Stream::prior);
    int minority = 0;
    const GrammarSpec g;
    for (int i = 0; i < 4000; ++i) {
        const auto s = ar_sample(prior, 0, 1.0, rng, 4);
        ASSERT_TRUE(is_valid(vocab, s.seq, g));
        minority += vocab.mode_of(s.seq.tokens[0]).second == 1;
    }
    EXPECT_NEAR(minority / 4000.0, 0.3, 3 * std::sqrt(0.21 / 4000));
}

TEST(NeuralPrior, NllGradientMatchesFiniteDifferences) {
    const auto vocab = vocab_for(Scheme::voken, 4);
    Rng rng = make_rng(4, Stream::init);
    NeuralPriorConfig cfg;
    cfg.embed_dim = 3;
    cfg.class_embed_dim = 2;
    cfg.hidden = {7};
    auto prior = make_neural_prior(cfg, vocab.size(), 2, Scheme::voken, 3, rng);
    GrammarSpec g;
    g.voken_count = 3;
    std::vector<LatentSequence> seqs;
    for (int i = 0; i < 4; ++i) seqs.push_back(encode_latent(vocab, random_latent(Scheme::voken, vocab, g, rng), g));
    const std::vector<int> classes{0, 1, 1, 0};
    std::vector<const LatentSequence*> ptrs;
    for (auto& s : seqs) ptrs.push_back(&s);

    auto& np = prior.neural;
    auto res = neural_nll_batch(prior, classes, ptrs, 1.0);
    std::vector<nnet::ParamSpan> params{
        {"token_embedding", {np.token_embedding.data(), static_cast<std::size_t>(np.token_embedding.size())}},
        {"class_embedding", {np.class_embedding.data(), static_cast<std::size_t>(np.class_embedding.size())}}};
    std::vector<nnet::ParamSpan> grads{
        {"token_embedding", {res.grads.token_embedding.data(), static_cast<std::size_t>(res.grads.token_embedding.size())}},
        {"class_embedding", {res.grads.class_embedding.data(), static_cast<std::size_t>(res.grads.class_embedding.size())}}};
    for (auto& s : np.mlp.parameters()) params.push_back(s);
    for (auto& s : res.grads.mlp.spans()) grads.push_back(s);
    auto loss = [&] { return neural_nll_batch(prior, classes, ptrs, 1.0).nll; };
    const auto r = kaleido::testing::check_gradient(loss, params, grads);
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;

    // the summed NLL agrees with the per-sequence chain rule
    double total = 0;
    for (std::size_t i = 0; i < seqs.size(); ++i) total += ar_nll(prior, seqs[i], classes[i]);
    EXPECT_NEAR(res.nll, total, 1e-10);
}

TEST(NeuralPrior, TrainedMatchesEmpiricalWithinTotalVariation) {
    const auto vocab = vocab_for(Scheme::text);
    std::vector<LatentSequence> corpus;
    std::vector<int> classes;
    for (int i = 0; i < 1000; ++i) {
        const int c = i % 2;
        corpus.push_back(LatentSequence{Scheme::text, {vocab.mode(c, (i / 2) % 10 < 3 ? 1 : 0), LatentVocab::kEos}});
        classes.push_back(c);
    }
    Rng rng = make_rng(6, Stream::init);
    auto prior = make_neural_prior({}, vocab.size(), 2, Scheme::text, 4, rng);
    train::fit_neural_prior(prior, classes, corpus, 1500, 64, 3e-3, 6);
    const auto empirical = fit_tabular(classes, corpus, vocab.size(), 2, Scheme::text, 4, 0.0);
    for (const auto& [key, row] : empirical.tabular.counts) {
        const std::vector<int> ctx(key.begin() + 1, key.end());
        const auto p = next_token_probs(prior, key[0], ctx);
        const auto q = next_token_probs(empirical, key[0], ctx);
        EXPECT_LT(0.5 * (p - q).cwiseAbs().sum(), 0.05);
    }
}

TEST(EmbedLatents, GradientIsAdjointOfMeanEmbedding) {
    const auto vocab = vocab_for(Scheme::voken, 4);
    Rng rng = make_rng(7, Stream::init);
    Eigen::MatrixXd table(3, vocab.size());
    for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = standard_normal(rng);
    const auto seq = from_surface(vocab, "v1 # v1 # v3");
    const Eigen::VectorXd g = normal_vector(rng, 3);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(3, vocab.size());
    accumulate_embed_grad(seq, g, grad);
    std::vector<nnet::ParamSpan> params{{"table", {table.data(), static_cast<std::size_t>(table.size())}}};
    std::vector<nnet::ParamSpan> grads{{"table", {grad.data(), static_cast<std::size_t>(grad.size())}}};
    const auto r = kaleido::testing::check_gradient([&] { return g.dot(embed_latents(seq, table)); }, params, grads);
    EXPECT_LT(r.max_rel_error, 1e-8) << r.worst;
}

TEST(Extract, CanvasModeAndBboxAgreeWithGroundTruth) {
    data::CanvasSpec spec;
    const auto samples = data::sample_canvas_dataset(spec, 400, 12);
    LatentContext ctx;
    ctx.vocab = vocab_for(Scheme::combined, 4);
    ctx.canvas = spec;
    int mode_hits = 0;
    for (const auto& s : samples) {
        const auto [c, m] = extract_mode(s.x, s.class_id, ctx);
        EXPECT_EQ(c, s.class_id);
        mode_hits += m == s.mode_id;
        const auto box = extract_bbox(s.x, ctx);
        for (const auto& b : s.bumps) {
            EXPECT_LE(box.x1, b.cx * 1000 / spec.width);
            EXPECT_GE(box.x2, b.cx * 1000 / spec.width);
            EXPECT_LE(box.y1, b.cy * 1000 / spec.height);
            EXPECT_GE(box.y2, b.cy * 1000 / spec.height);
        }
    }
    EXPECT_GE(mode_hits, 0.97 * samples.size());
}

TEST(Extract, GmmTextLatentNamesTheGeneratingComponent) {
    const auto gmm = data::toy_gmm_default(data::WeightVariant::unequal);
    const auto samples = data::sample_dataset(gmm, 2000, 3);
    LatentContext ctx;
    ctx.vocab = vocab_for(Scheme::text);
    ctx.gmm = gmm;
    int hits = 0;
    for (const auto& s : samples) {
        const auto z = extract_latent(s.x, s.class_id, ctx);
        const auto p = parse_latent(ctx.vocab, z, ctx.grammar);
        hits += p.class_id == s.class_id && p.mode_id == s.mode_id;
    }
    EXPECT_EQ(hits, 2000);  // components are 20 std apart
    ctx.vocab = vocab_for(Scheme::bbox);
    EXPECT_THROW(extract_latent(samples[0].x, 0, ctx), ContractViolation);
}

TEST(Extract, BlobLatentTracksClassOrientation) {
    data::CanvasSpec spec;
    const auto samples = data::sample_canvas_dataset(spec, 200, 4);
    LatentContext ctx;
    ctx.vocab = vocab_for(Scheme::blob);
    ctx.canvas = spec;
    for (const auto& s : samples) {
        if (s.bumps.size() != 1) continue;
        const auto p = parse_latent(ctx.vocab, extract_latent(s.x, s.class_id, ctx), ctx.grammar);
        const double theta = dequantize(*p.blob, ctx.grammar.quantizer).theta_deg;
        const double target = s.class_id == 0 ? 0.0 : 90.0;
        const double d = std::abs(theta - target);
        EXPECT_LT(std::min(d, 180.0 - d), 35.0);
    }
}
