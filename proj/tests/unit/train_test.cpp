#include <vector>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "kaleido/train/generate.hpp"
#include "kaleido/train/pipeline.hpp"
#include "kaleido/train/trainer.hpp"

using namespace kaleido;
using namespace kaleido::train;

namespace {

struct Fixture {
    ExperimentConfig exp;
    Dataset data;
    latents::LatentContext ctx;
    std::vector<latents::LatentSequence> corpus;
};

Fixture small(latents::Scheme scheme = latents::Scheme::text, Variant v = Variant::kaleido,
              latents::PriorBackend backend = latents::PriorBackend::tabular) {
    Fixture f;
    f.exp.data.n = 400;
    f.exp.data.scheme = scheme;
    f.exp.data.codebook_size = 4;
    f.exp.data.voken_count = 2;
    auto& t = f.exp.train;
    t.variant = v;
    t.prior_backend = backend;
    t.batch_size = 8;
    t.steps = 30;
    t.warmup_steps = 5;
    t.log_every = 10;
    t.denoiser.hidden = {12, 10};
    t.denoiser.latent_dim = 3;
    t.prior.embed_dim = 3;
    t.prior.hidden = {6};
    t.context_window = 3;
    f.data = make_dataset(f.exp.data, 5);
    f.ctx = make_latent_context(f.data, 5);
    f.corpus = extract_corpus(f.data, f.ctx);
    return f;
}

std::string params_dump(Model& m) {
    std::string out;
    for (const auto& s : model_parameters(m))
        for (double v : s.values) out += format_double(v) + ",";
    return out;
}

}  // namespace

TEST(Config, ExperimentJsonRoundTrip) {
    auto exp = toy_experiment();
    exp.train.eta = 0.5;
    exp.train.denoiser.hidden = {32, 16, 8};
    exp.data.scheme = latents::Scheme::combined;
    exp.data.kind = DatasetKind::canvas;
    exp.sample.guidance = {1.0, 3.5};
    const auto j = to_json(exp);
    EXPECT_EQ(to_json(experiment_from_json(nlohmann::json::parse(j.dump()))), j);
}

TEST(Config, ValidationRejectsInconsistentValues) {
    TrainConfig c;
    c.p_uncond = 1.0;
    EXPECT_THROW(c.validate(), ContractViolation);
    c = {};
    c.prior.embed_dim = c.denoiser.latent_dim + 1;
    EXPECT_THROW(c.validate(), ContractViolation);
    EXPECT_THROW(variant_from_string("other"), ContractViolation);
}

TEST(Trainer, LearningRateWarmsUpLinearly) {
    TrainConfig c;
    c.learning_rate = 1e-3;
    c.warmup_steps = 4;
    EXPECT_DOUBLE_EQ(learning_rate_at(c, 0), 2.5e-4);
    EXPECT_DOUBLE_EQ(learning_rate_at(c, 3), 1e-3);
    EXPECT_DOUBLE_EQ(learning_rate_at(c, 100), 1e-3);
    c.warmup_steps = 0;
    EXPECT_DOUBLE_EQ(learning_rate_at(c, 0), 1e-3);
}

class JointGradient : public ::testing::TestWithParam<latents::PriorBackend> {};

TEST_P(JointGradient, MatchesFiniteDifferences) {
    auto f = small(latents::Scheme::voken, Variant::kaleido, GetParam());
    auto& cfg = f.exp.train;
    Model m = make_model(cfg, f.ctx, 3);
    if (GetParam() == latents::PriorBackend::tabular)
        m.prior = fit_tabular_prior(classes_of(f.data), f.corpus, f.ctx.vocab, cfg.context_window, cfg.smoothing);
    // perturb away from the small init so every block carries signal
    Rng rng = make_rng(1, Stream::init, 99);
    for (auto& s : model_parameters(m))
        for (double& v : s.values) v += 0.2 * standard_normal(rng);

    const std::vector<int> rows{0, 1, 2, 3, 4, 5};
    const std::vector<char> dropped{0, 1, 0, 0, 1, 0};
    auto fixed = make_joint_batch(m, f.data.samples, f.corpus, rows, dropped);
    Rng noise = make_rng(2, Stream::diffusion);
    diffusion::draw_diffusion_noise(noise, m.sched, fixed.dm);

    auto loss = [&] {
        auto b = make_joint_batch(m, f.data.samples, f.corpus, rows, dropped);
        b.dm.timesteps = fixed.dm.timesteps;
        b.dm.noise = fixed.dm.noise;
        return compute_joint_loss(m, b, cfg).total;
    };
    auto jl = compute_joint_loss(m, fixed, cfg);
    EXPECT_DOUBLE_EQ(jl.total, jl.l_dm + cfg.eta * jl.l_ar);
    EXPECT_GT(jl.l_ar, 0.0);
    auto grads = jl.grads.spans();
    const auto params = model_parameters(m);
    ASSERT_EQ(grads.size(), params.size());
    for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(grads[i].name, params[i].name);
    // The joint loss is O(1) while some coordinates carry gradients near 1e-5,
    // so h = 1e-5 is rounding-limited; 1e-4 keeps both error terms small.
    const auto r = kaleido::testing::check_gradient(loss, params, grads, 1e-4);
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(Backends, JointGradient,
                         ::testing::Values(latents::PriorBackend::tabular, latents::PriorBackend::neural),
                         [](const auto& info) { return latents::to_string(info.param); });

TEST(Trainer, PairSharesInitAndBatches) {
    auto kal = small();
    auto base = small(latents::Scheme::text, Variant::baseline);
    Model mk = make_model(kal.exp.train, kal.ctx, 11);
    Model mb = make_model(base.exp.train, base.ctx, 11);
    for (std::size_t i = 0; i < mk.denoiser.mlp.depth(); ++i)
        EXPECT_EQ(mk.denoiser.mlp.layer(i).weight, mb.denoiser.mlp.layer(i).weight);
    EXPECT_EQ(mk.denoiser.class_embedding, mb.denoiser.class_embedding);

    auto sk = TrainState::start(kal.exp.train, mk, 11);
    auto sb = TrainState::start(base.exp.train, mb, 11);
    for (int i = 0; i < 3; ++i) {
        const auto bk = next_batch(sk, kal.data.samples, kal.corpus);
        const auto bb = next_batch(sb, base.data.samples, base.corpus);
        EXPECT_EQ(bk.dm.x0, bb.dm.x0);
        EXPECT_EQ(bk.dm.classes, bb.dm.classes);
        EXPECT_EQ(bk.dm.timesteps, bb.dm.timesteps);
        EXPECT_EQ(bk.dm.noise, bb.dm.noise);
        for (std::size_t j = 0; j < bb.latents.size(); ++j) {
            EXPECT_EQ(bb.latents[j], nullptr);
            EXPECT_EQ(bb.dm.latent_is_null[j], 1);
            EXPECT_EQ(bk.dm.latent_is_null[j], bk.dm.classes[j] == diffusion::kNullClass ? 1 : 0);
        }
    }
}

TEST(Trainer, DropoutNullsClassAndLatentTogether) {
    auto f = small();
    Model m = make_model(f.exp.train, f.ctx, 1);
    const std::vector<int> rows{0, 1, 2};
    const std::vector<char> dropped{1, 0, 1};
    const auto b = make_joint_batch(m, f.data.samples, f.corpus, rows, dropped);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(b.dm.classes[j] == diffusion::kNullClass, dropped[j] != 0);
        EXPECT_EQ(b.dm.latent_is_null[j], dropped[j]);
        EXPECT_EQ(b.true_classes[j], f.data.samples[j].class_id);
    }
}

TEST(Trainer, RunIsDeterministicAndCheckpointRoundTrips) {
    auto f = small();
    auto a = train::train(f.exp.train, 4, f.data.samples, f.corpus, f.ctx);
    auto b = train::train(f.exp.train, 4, f.data.samples, f.corpus, f.ctx);
    EXPECT_EQ(params_dump(a.state.ema), params_dump(b.state.ema));
    ASSERT_EQ(a.log.records.size(), 3u);
    for (std::size_t i = 0; i < a.log.records.size(); ++i) {
        EXPECT_EQ(a.log.records[i].total, b.log.records[i].total);
        const auto& r = a.log.records[i];
        EXPECT_DOUBLE_EQ(r.total, r.l_dm + f.exp.train.eta * r.l_ar);
    }

    auto ck = checkpoint_from_json(nlohmann::json::parse(checkpoint_json(a.state).dump()));
    EXPECT_EQ(ck.step, 30);
    EXPECT_EQ(ck.seed, 4u);
    EXPECT_EQ(params_dump(ck.live), params_dump(a.state.live));
    EXPECT_EQ(params_dump(ck.ema), params_dump(a.state.ema));
    EXPECT_EQ(ck.adam.step, a.state.adam.step);
    EXPECT_EQ(ck.adam.second_moment, a.state.adam.second_moment);
    EXPECT_EQ(ck.live.prior.tabular.counts, a.state.live.prior.tabular.counts);
    EXPECT_THROW(checkpoint_from_json(nlohmann::json{{"format", "other"}}), IoError);
}

TEST(Trainer, EmaTracksLiveWeights) {
    auto f = small();
    f.exp.train.ema_decay = 0.0;
    auto r = train::train(f.exp.train, 2, f.data.samples, f.corpus, f.ctx);
    EXPECT_EQ(params_dump(r.state.ema), params_dump(r.state.live));
}

TEST(Generate, LatentsPerChainDoNotDependOnBatching) {
    auto f = small();
    auto r = train::train(f.exp.train, 4, f.data.samples, f.corpus, f.ctx);
    SampleConfig sc;
    sc.steps = 20;
    GenerateRequest all{1, 6, 2.0, 7, 0, {}};
    GenerateRequest tail{1, 2, 2.0, 7, 4, {}};
    const auto ga = generate(r.state.ema, sc, all);
    const auto gt = generate(r.state.ema, sc, tail);
    ASSERT_EQ(ga.latents.size(), 6u);
    for (int i = 0; i < 2; ++i) {
        EXPECT_EQ(ga.latents[static_cast<std::size_t>(4 + i)], gt.latents[static_cast<std::size_t>(i)]);
        EXPECT_EQ(ga.samples.col(4 + i), gt.samples.col(i));
    }
    for (const auto& z : ga.latents) {
        EXPECT_TRUE(latents::is_valid(f.ctx.vocab, z, f.ctx.grammar));
        EXPECT_EQ(f.ctx.vocab.mode_of(z.tokens[0]).first, 1);
    }

    // fixed latents are used verbatim; the prior is not consulted
    GenerateRequest fixed = all;
    fixed.fixed_latents = std::vector<latents::LatentSequence>(6, ga.latents[0]);
    const auto gf = generate(r.state.ema, sc, fixed);
    EXPECT_EQ(gf.latents, *fixed.fixed_latents);
    fixed.fixed_latents->back().tokens = {f.ctx.vocab.mode(0, 0)};  // missing <eos>
    EXPECT_THROW(generate(r.state.ema, sc, fixed), ContractViolation);
}

TEST(Pipeline, GmmRejectsCanvasOnlySchemes) {
    DataConfig c;
    c.n = 50;
    c.scheme = latents::Scheme::bbox;
    EXPECT_THROW(make_latent_context(make_dataset(c, 1), 1), ContractViolation);
    c.kind = DatasetKind::canvas;
    const auto d = make_dataset(c, 1);
    const auto ctx = make_latent_context(d, 1);
    for (const auto& z : extract_corpus(d, ctx)) EXPECT_TRUE(latents::is_valid(ctx.vocab, z, ctx.grammar));
}
