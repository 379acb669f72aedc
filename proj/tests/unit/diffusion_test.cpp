#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "kaleido/core/rng.hpp"
#include "kaleido/data/gmm.hpp"
#include "kaleido/diffusion/analytic.hpp"
#include "kaleido/diffusion/denoiser.hpp"
#include "kaleido/diffusion/sampler.hpp"
#include "kaleido/diffusion/schedule.hpp"

using namespace kaleido;
using namespace kaleido::diffusion;

namespace {

data::GmmSpec single_gaussian(Eigen::Vector2d mean, double var) {
    data::GmmSpec g;
    data::GmmComponent c;
    c.weight = 1.0;
    c.mean = mean;
    c.variance = Eigen::Vector2d::Constant(var);
    g.components.push_back(c);
    return g;
}

/// Returns a fixed affine function of x whose offset depends on the condition,
/// so conditional and unconditional branches differ.
struct AffineDenoiser {
    int dim() const { return 2; }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x, int t, std::span<const Condition> conds) const {
        Eigen::MatrixXd out = 0.3 * x;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const auto& c = conds[static_cast<std::size_t>(j)];
            out(0, j) += 0.1 * t + (c.class_id == kNullClass ? -1.0 : c.class_id + 0.5);
            out(1, j) += c.latent ? 2.0 : 0.0;
        }
        return out;
    }
};

struct NanDenoiser {
    int dim() const { return 1; }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x, int t, std::span<const Condition>) const {
        Eigen::MatrixXd out = x;
        if (t < 100) out.setConstant(NAN);
        return out;
    }
};

}  // namespace

TEST(Schedule, VariancePreservingAndMonotone) {
    for (auto kind : {ScheduleKind::cosine, ScheduleKind::linear}) {
        const auto s = make_schedule(kind, 250);
        for (int t = 0; t <= 250; ++t) {
            EXPECT_NEAR(s.alpha(t) * s.alpha(t) + s.sigma(t) * s.sigma(t), 1.0, 1e-15);
            EXPECT_GT(s.alpha(t), 0.0);
            EXPECT_GT(s.sigma(t), 0.0);
            if (t > 0) {
                EXPECT_LT(s.log_snr(t), s.log_snr(t - 1)) << to_string(kind) << " t=" << t;
            }
        }
        EXPECT_GT(s.alpha(0), 0.9999);
        EXPECT_LT(s.alpha(250), 1e-4);
    }
    EXPECT_THROW(make_schedule(ScheduleKind::cosine, 0), ContractViolation);
}

TEST(Schedule, PosteriorMatchesGaussianConditioning) {
    // Oracle: condition the joint Gaussian of (x_s, x_t) given x0 directly.
    const auto sched = make_schedule(ScheduleKind::cosine, 250);
    for (auto [t, s] : std::vector<std::pair<int, int>>{{250, 249}, {100, 60}, {2, 1}, {1, 0}, {250, 0}}) {
        const double as = sched.alpha(s), ss = sched.sigma(s), at = sched.alpha(t), st = sched.sigma(t);
        const double a_ts = at / as;
        const double cov = a_ts * ss * ss;
        const double var_t = st * st;
        const auto p = posterior(sched, t, s);
        EXPECT_NEAR(p.coef_xt, cov / var_t, 1e-12);
        EXPECT_NEAR(p.coef_x0, as - cov / var_t * at, 1e-12);
        EXPECT_NEAR(p.variance, ss * ss - cov * cov / var_t, 1e-12);
    }
    EXPECT_THROW(posterior(sched, 3, 3), ContractViolation);
}

TEST(Schedule, RejectsOutOfRangeTimestep) {
    const auto sched = make_schedule(ScheduleKind::cosine, 10);
    EXPECT_THROW(q_sample(Eigen::VectorXd::Zero(2), 11, Eigen::VectorXd::Zero(2), sched), ContractViolation);
}

TEST(Analytic, PosteriorMeanMatchesQuadrature) {
    const auto gmm = data::toy_gmm_default(data::WeightVariant::unequal);
    const auto sched = make_schedule(ScheduleKind::cosine, 250);
    const std::vector<int> all{0, 1, 2, 3};
    const int t = 120;
    const double a = sched.alpha(t), s = sched.sigma(t);
    const Eigen::Vector2d xt(-0.7, 1.1);
    // Riemann sum of x0 p(x0) N(x_t; a x0, s^2) over a fine grid.
    const double h = 0.02;
    Eigen::Vector2d num = Eigen::Vector2d::Zero();
    double den = 0.0;
    for (double u = -6; u <= 6; u += h)
        for (double v = -6; v <= 6; v += h) {
            const Eigen::Vector2d x0(u, v);
            double prior = 0.0;
            for (const auto& c : gmm.components) prior += c.weight * std::exp(data::log_gaussian_diag(x0, c.mean, c.variance));
            const double lik = std::exp(-0.5 * (xt - a * x0).squaredNorm() / (s * s));
            num += prior * lik * x0;
            den += prior * lik;
        }
    const Eigen::VectorXd ref = num / den;
    const Eigen::VectorXd got = analytic_posterior_mean(gmm, xt, t, sched, all);
    EXPECT_NEAR(got[0], ref[0], 1e-4);
    EXPECT_NEAR(got[1], ref[1], 1e-4);
}

TEST(Analytic, LatentSelectsNamedComponent) {
    const auto gmm = data::toy_gmm_default(data::WeightVariant::unequal);
    const auto vocab = latents::LatentVocab::build({latents::Scheme::text, 2, 2, 16});
    const AnalyticDenoiser den(gmm, make_schedule(ScheduleKind::cosine, 250), vocab);
    const auto z = latents::from_surface(vocab, "mode_1B");
    const auto sub = den.subset_for(Condition::with_latent(1, z));
    ASSERT_EQ(sub.size(), 1u);
    EXPECT_EQ(gmm.at(sub[0]).class_id, 1);
    EXPECT_EQ(gmm.at(sub[0]).mode_id, 1);
    EXPECT_EQ(den.subset_for(Condition::of_class(kNullClass)).size(), 4u);
    EXPECT_EQ(den.subset_for(Condition::of_class(0)).size(), 2u);
}

TEST(Cfg, EndpointsAreExactAndAffineInGuidance) {
    AffineDenoiser den;
    Rng rng = make_rng(5, Stream::sampler);
    Eigen::MatrixXd x(2, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    std::vector<Condition> conds(6, Condition::of_class(1));
    const Eigen::MatrixXd c = den.predict(x, 7, conds);
    std::vector<Condition> nulls(6, Condition::of_class(kNullClass));
    const Eigen::MatrixXd u = den.predict(x, 7, nulls);
    EXPECT_EQ(cfg_predict(den, x, 7, conds, 1.0), c);
    EXPECT_EQ(cfg_predict(den, x, 7, conds, 0.0), u);
    for (double g : {0.5, 2.0, 7.0}) {
        const Eigen::MatrixXd got = cfg_predict(den, x, 7, conds, g);
        EXPECT_LE((got - (g * c + (1 - g) * u)).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_THROW(cfg_predict(den, x, 7, conds, -0.1), ContractViolation);
}

TEST(Cfg, UnconditionalBranchDropsLatentOnlyWhenAsked) {
    AffineDenoiser den;
    const auto vocab = latents::LatentVocab::build({latents::Scheme::text, 2, 2, 16});
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    std::vector<Condition> conds{Condition::with_latent(0, latents::from_surface(vocab, "mode_0A"))};
    // gamma = 0 returns the unconditional branch alone.
    EXPECT_DOUBLE_EQ(cfg_predict(den, x, 0, conds, 0.0, true)(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(cfg_predict(den, x, 0, conds, 0.0, false)(1, 0), 2.0);
}

TEST(Sampler, TimestepGrid) {
    const auto g = timestep_grid(250, 50);
    ASSERT_EQ(g.size(), 51u);
    EXPECT_EQ(g.front(), 0);
    EXPECT_EQ(g.back(), 250);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
    EXPECT_THROW(timestep_grid(10, 11), ContractViolation);
}

TEST(Sampler, ChainsDoNotDependOnBatching) {
    const auto sched = make_schedule(ScheduleKind::cosine, 100);
    const AnalyticDenoiser den(data::toy_gmm_default(data::WeightVariant::unequal), sched);
    SamplerConfig cfg;
    cfg.steps = 20;
    cfg.seed = 11;
    cfg.guidance = 3.0;
    cfg.clip_min = -4.5;
    cfg.clip_max = 4.5;
    std::vector<Condition> conds(8, Condition::of_class(0));
    const Eigen::MatrixXd all = ddpm_sample(den, conds, cfg, sched);
    const Eigen::MatrixXd again = ddpm_sample(den, conds, cfg, sched);
    EXPECT_EQ(all, again);
    std::vector<Condition> one(1, Condition::of_class(0));
    const Eigen::MatrixXd fifth = ddpm_sample(den, one, cfg, sched, 5);
    EXPECT_EQ(fifth.col(0), all.col(5));
}

TEST(Sampler, NonFiniteStateNamesTheStep) {
    const auto sched = make_schedule(ScheduleKind::cosine, 200);
    SamplerConfig cfg;
    cfg.steps = 200;
    cfg.clip = false;
    std::vector<Condition> conds(2, Condition::of_class(0));
    try {
        ddpm_sample(NanDenoiser{}, conds, cfg, sched);
        FAIL() << "expected NonFiniteError";
    } catch (const NonFiniteError& e) {
        EXPECT_NE(std::string(e.what()).find("step 101"), std::string::npos) << e.what();
    }
}

TEST(Sampler, SingleGaussianMomentsSmallScale) {
    const Eigen::Vector2d mu(1.0, -0.5);
    const auto sched = make_schedule(ScheduleKind::cosine, 250);
    const AnalyticDenoiser den(single_gaussian(mu, 0.25), sched);
    SamplerConfig cfg;
    cfg.steps = 50;
    cfg.seed = 2;
    cfg.clip_min = -10;
    cfg.clip_max = 10;
    std::vector<Condition> conds(2000, Condition::of_class(0));
    const Eigen::MatrixXd x = ddpm_sample(den, conds, cfg, sched);
    const Eigen::Vector2d m = x.rowwise().mean();
    const double se = std::sqrt(0.25 / 2000);
    EXPECT_LT((m - mu).cwiseAbs().maxCoeff(), 4 * se);
    const double var = (x.colwise() - m).squaredNorm() / (2 * 1999);
    EXPECT_NEAR(var, 0.25, 0.025);
}

TEST(Preconditioning, MatchesGaussianRegression) {
    // For x0 ~ N(0, s_d^2): E[x0 | x_t] = a s_d^2 / (a^2 s_d^2 + s^2) x_t and
    // Var[x0 | x_t] = s_d^2 s^2 / (a^2 s_d^2 + s^2).
    for (double a : {0.999, 0.7, 0.05}) {
        const double s = std::sqrt(1 - a * a), sd = 3.0;
        const auto p = preconditioning(a, s, sd);
        EXPECT_NEAR(p.c_skip, a * sd * sd / (a * a * sd * sd + s * s), 1e-14);
        EXPECT_NEAR(p.c_out * p.c_out, sd * sd * s * s / (a * a * sd * sd + s * s), 1e-14);
        EXPECT_NEAR(p.c_in * p.c_in * (a * a * sd * sd + s * s), 1.0, 1e-14);
    }
}

TEST(Denoiser, TimeFeaturesFiniteAtEnds) {
    const auto sched = make_schedule(ScheduleKind::cosine, 250);
    for (int t : {0, 1, 125, 250}) EXPECT_TRUE(time_features(sched, t).allFinite());
}

TEST(Denoiser, LossGradientMatchesFiniteDifferences) {
    for (auto weighting : {LossWeighting::unit, LossWeighting::preconditioned}) {
        DenoiserConfig cfg;
        cfg.hidden = {9, 7};
        cfg.latent_dim = 3;
        Rng rng = make_rng(4, Stream::init);
        auto net = DenoiserNet::init(cfg, rng);
        const auto sched = make_schedule(ScheduleKind::cosine, 50);
        DenoiserBatch b;
        b.x0.resize(2, 5);
        for (Eigen::Index i = 0; i < b.x0.size(); ++i) b.x0.data()[i] = 3 * standard_normal(rng);
        b.classes = {0, 1, kNullClass, 1, 0};
        b.latents.resize(3, 5);
        for (Eigen::Index i = 0; i < b.latents.size(); ++i) b.latents.data()[i] = standard_normal(rng);
        b.latent_is_null = {0, 0, 1, 0, 1};
        draw_diffusion_noise(rng, sched, b);
        auto res = denoise_loss(net, b, sched, weighting);

        auto loss = [&] { return denoise_loss(net, b, sched, weighting).loss; };
        std::vector<nnet::ParamSpan> params = net.mlp.parameters();
        std::vector<nnet::ParamSpan> grads = res.grads.mlp.spans();
        params.push_back({"class_embedding", {net.class_embedding.data(), static_cast<std::size_t>(net.class_embedding.size())}});
        grads.push_back({"class_embedding", {res.grads.class_embedding.data(), static_cast<std::size_t>(res.grads.class_embedding.size())}});
        params.push_back({"null_latent", {net.null_latent.data(), static_cast<std::size_t>(net.null_latent.size())}});
        grads.push_back({"null_latent", {res.grads.null_latent.data(), static_cast<std::size_t>(res.grads.null_latent.size())}});
        params.push_back({"latents", {b.latents.data(), static_cast<std::size_t>(b.latents.size())}});
        grads.push_back({"latents", {res.grads.latents.data(), static_cast<std::size_t>(res.grads.latents.size())}});
        const auto r = kaleido::testing::check_gradient(loss, params, grads);
        EXPECT_LT(r.max_rel_error, 1e-6) << to_string(weighting) << " worst " << r.worst;

        // The generic loss evaluator agrees with the differentiable one.
        Eigen::MatrixXd lat = b.latents;
        for (Eigen::Index j = 0; j < 5; ++j)
            if (b.latent_is_null[static_cast<std::size_t>(j)]) lat.col(j) = net.null_latent;
        auto predict = [&](const Eigen::MatrixXd& xt, std::span<const int> ts) {
            return net.predict_batch(xt, ts, b.classes, lat, sched);
        };
        EXPECT_NEAR(denoise_loss_value(predict, b.x0, b.timesteps, b.noise, sched, weighting, cfg.data_scale), res.loss,
                    1e-12);
    }
}

TEST(Denoiser, OptimalLinearPredictorHasUnitNormalizedLoss) {
    // With F = 0 the preconditioned prediction is the Gaussian posterior mean, so
    // the weighted loss for N(0, s_d^2) data has expectation d (one per coordinate).
    const auto sched = make_schedule(ScheduleKind::cosine, 250);
    Rng rng = make_rng(8, Stream::diffusion);
    const double sd = 3.0;
    const int n = 20000;
    Eigen::MatrixXd x0(2, n), noise(2, n);
    std::vector<int> ts(n);
    std::uniform_int_distribution<int> pick(1, 250);
    for (int j = 0; j < n; ++j) {
        x0.col(j) = sd * normal_vector(rng, 2);
        noise.col(j) = normal_vector(rng, 2);
        ts[static_cast<std::size_t>(j)] = pick(rng);
    }
    auto predict = [&](const Eigen::MatrixXd& xt, std::span<const int> t) {
        Eigen::MatrixXd out(2, xt.cols());
        for (Eigen::Index j = 0; j < xt.cols(); ++j) {
            const int tj = t[static_cast<std::size_t>(j)];
            out.col(j) = preconditioning(sched.alpha(tj), sched.sigma(tj), sd).c_skip * xt.col(j);
        }
        return out;
    };
    const double l = denoise_loss_value(predict, x0, ts, noise, sched, LossWeighting::preconditioned, sd);
    EXPECT_NEAR(l, 2.0, 0.06);
}
