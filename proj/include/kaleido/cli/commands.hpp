#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kaleido/core/error.hpp"
#include "kaleido/core/io.hpp"
#include "kaleido/data/dataset_io.hpp"
#include "kaleido/io/files.hpp"
#include "kaleido/io/manifest.hpp"
#include "kaleido/io/svg.hpp"
#include "kaleido/metrics/report.hpp"
#include "kaleido/train/config.hpp"
#include "kaleido/train/generate.hpp"
#include "kaleido/train/pipeline.hpp"
#include "kaleido/train/trainer.hpp"

namespace kaleido::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct Globals {
    std::uint64_t seed = 0;
    fs::path out;
    bool force = false;
    std::optional<fs::path> config;
    std::ostream* log = &std::cerr;
};

inline train::ExperimentConfig read_experiment(const fs::path& p) {
    Json j;
    try {
        j = Json::parse(read_text(p));
    } catch (const Json::parse_error& e) {
        throw IoError("config " + p.string() + " is not valid JSON: " + e.what());
    }
    return train::experiment_from_json(j);
}

/// --config wins, then a config.json found next to an upstream artifact, then the toy defaults.
inline train::ExperimentConfig resolve_config(const Globals& g, const std::optional<fs::path>& upstream_dir = {}) {
    if (g.config) return read_experiment(*g.config);
    if (upstream_dir && fs::exists(*upstream_dir / "config.json")) return read_experiment(*upstream_dir / "config.json");
    return train::toy_experiment();
}

/// Collects the files one command writes and seals them with a manifest.
class Run {
public:
    Run(const Globals& g, std::string command) : g_(g), command_(std::move(command)) {
        require(!g.out.empty(), "--out is required");
        if (fs::exists(g.out) && !fs::is_empty(g.out) && !g.force)
            throw ContractViolation("output directory " + g.out.string() + " exists; pass --force to overwrite");
        std::error_code ec;
        fs::create_directories(g.out, ec);
        if (ec) throw IoError("cannot create " + g.out.string() + ": " + ec.message());
    }

    void write(const std::string& rel, std::string_view content) {
        atomic_write_text(g_.out / rel, content);
        if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
    }

    void input(const fs::path& p) { inputs_.emplace_back(fs::absolute(p).lexically_normal().string(), io::sha256_file(p)); }
    void warn(std::string w) {
        *g_.log << "warning: " << w << '\n';
        warnings_.push_back(std::move(w));
    }

    void seal(const Json& config) {
        io::RunManifest m;
        m.command = command_;
        m.config = config;
        m.seed = g_.seed;
        for (const auto& f : files_) m.artifacts.emplace_back(f, "");
        m.inputs = inputs_;
        m.warnings = warnings_;
        io::write_manifest(g_.out, std::move(m));
    }

private:
    const Globals& g_;
    std::string command_;
    std::vector<std::string> files_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::string> warnings_;
};

// ---- data directories ------------------------------------------------------

struct DataDir {
    train::ExperimentConfig config;
    train::Dataset dataset;
    std::uint64_t seed = 0;
};

inline DataDir load_data_dir(const fs::path& dir) {
    DataDir d;
    d.config = read_experiment(dir / "config.json");
    auto samples = data::dataset_from_csv(read_text(dir / "dataset.csv"));
    if (d.config.data.kind == train::DatasetKind::canvas) {
        try {
            data::attach_bumps(samples, Json::parse(read_text(dir / "bumps.json")));
        } catch (const Json::exception& e) {
            throw IoError("bumps.json: " + std::string(e.what()));
        }
    }
    d.dataset = train::attach_spec(d.config.data, std::move(samples));
    const auto m = io::RunManifest::from_json(Json::parse(read_text(dir / io::kManifestName)));
    d.seed = m.seed;
    return d;
}

struct GenDataArgs {
    std::optional<int> n;
};

inline void cmd_gen_data(const Globals& g, const GenDataArgs& a) {
    auto cfg = resolve_config(g);
    if (a.n) cfg.data.n = *a.n;
    require(cfg.data.n >= 1, "n must be >= 1");
    Run run(g, "gen-data");
    const auto ds = train::make_dataset(cfg.data, g.seed);
    const auto ctx = train::make_latent_context(ds, g.seed);
    const auto corpus = train::extract_corpus(ds, ctx);
    run.write("dataset.csv", data::dataset_to_csv(ds.samples));
    if (ds.canvas) run.write("bumps.json", data::bumps_sidecar(ds.samples).dump() + "\n");
    run.write("latents.txt", io::latents_to_text(ctx.vocab, corpus));
    run.write("config.json", train::to_json(cfg).dump(2) + "\n");
    std::vector<int> per_mode(4, 0);
    for (const auto& s : ds.samples) ++per_mode[static_cast<std::size_t>(s.component)];
    *g.log << "wrote " << ds.samples.size() << " samples to " << (g.out / "dataset.csv").string() << " (modes:";
    for (int k = 0; k < 4; ++k) *g.log << ' ' << data::mode_name(k / 2, k % 2) << '=' << per_mode[static_cast<std::size_t>(k)];
    *g.log << ")\n";
    run.seal(train::to_json(cfg));
}

// ---- training --------------------------------------------------------------

struct TrainArgs {
    fs::path data;
    std::optional<std::string> variant;
    std::optional<int> steps;
};

inline void cmd_train(const Globals& g, const TrainArgs& a) {
    const auto dd = load_data_dir(a.data);
    auto cfg = g.config ? read_experiment(*g.config) : dd.config;
    require(train::to_json(cfg.data) == train::to_json(dd.config.data),
            "data section of --config does not match the dataset in " + a.data.string());
    if (a.variant) cfg.train.variant = train::variant_from_string(*a.variant);
    if (a.steps) cfg.train.steps = *a.steps;
    Run run(g, "train");
    run.input(a.data / "dataset.csv");
    // The codebook follows the data seed so both variants of a pair see the same latents.
    const auto ctx = train::make_latent_context(dd.dataset, dd.seed);
    std::vector<latents::LatentSequence> corpus;
    if (cfg.train.variant == train::Variant::kaleido) corpus = train::extract_corpus(dd.dataset, ctx);
    *g.log << "training " << train::to_string(cfg.train.variant) << " for " << cfg.train.steps << " steps, seed "
           << g.seed << '\n';
    train::TrainOptions opt;
    opt.checkpoint_path = g.out / "checkpoint.json";
    opt.on_log = [&](const train::TrainRecord& r) {
        *g.log << "step " << r.step << " l_dm " << r.l_dm << " l_ar " << r.l_ar << " grad_norm " << r.grad_norm << '\n';
    };
    const auto result = train::train(cfg.train, g.seed, dd.dataset.samples, corpus, ctx, opt);
    run.write("checkpoint.json", train::checkpoint_json(result.state).dump());
    run.write("train_log.csv", result.log.to_csv());
    run.write("config.json", train::to_json(cfg).dump(2) + "\n");
    run.seal(train::to_json(cfg));
}

// ---- sampling --------------------------------------------------------------

struct LoadedModel {
    train::Checkpoint ckpt;
    train::ExperimentConfig config;
};

inline LoadedModel load_model(const Globals& g, const fs::path& checkpoint) {
    LoadedModel m{train::load_checkpoint(checkpoint), {}};
    m.config = resolve_config(g, checkpoint.parent_path());
    m.config.train = m.ckpt.config;
    return m;
}

struct SampleArgs {
    fs::path checkpoint;
    std::optional<int> class_id;
    double guidance = 7.0;
    std::optional<int> n;
    std::optional<fs::path> latents;
    bool live = false;  // sample the raw weights instead of the EMA copy
};

struct SampleOutcome {
    train::Generation gen;
    std::vector<std::string> log_lines;
};

/// Runs generation and records the two-stage order: every z line precedes the
/// first denoising line.
inline SampleOutcome sample_with_log(const train::Model& model, const train::SampleConfig& scfg,
                                     const train::GenerateRequest& req, std::ostream& log) {
    SampleOutcome o;
    auto emit = [&](std::string line) {
        log << line << '\n';
        o.log_lines.push_back(std::move(line));
    };
    train::GenerateHooks hooks;
    hooks.on_latent = [&](int chain, const latents::LatentSequence& z) {
        emit("z chain=" + std::to_string(chain) + " class=" + std::to_string(req.class_id) +
             " latent=" + latents::to_surface(model.latent_ctx.vocab, z));
    };
    hooks.on_step = [&](int step, int t) {
        if (step == 0 || step + 1 == scfg.steps || step % 50 == 0)
            emit("denoise chains=0.." + std::to_string(req.n - 1) + " step=" + std::to_string(step) +
                 " t=" + std::to_string(t));
    };
    o.gen = train::generate(model, scfg, req, hooks);
    if (o.gen.rejected_latents > 0)
        emit("rejected " + std::to_string(o.gen.rejected_latents) + " invalid prior draws");
    return o;
}

inline void cmd_sample(const Globals& g, const SampleArgs& a) {
    const auto lm = load_model(g, a.checkpoint);
    const auto& model = a.live ? lm.ckpt.live : lm.ckpt.ema;
    train::GenerateRequest req;
    req.class_id = a.class_id.value_or(lm.config.sample.class_id);
    req.n = a.n.value_or(lm.config.sample.n);
    req.guidance = a.guidance;
    req.seed = g.seed;
    require(req.n >= 1, "n must be >= 1");
    if (a.latents) {
        require(model.kaleido(), "--latents needs a kaleido checkpoint");
        auto zs = io::latents_from_text(read_text(*a.latents), model.latent_ctx.vocab, model.latent_ctx.grammar);
        if (!a.n) req.n = static_cast<int>(zs.size());
        require(static_cast<int>(zs.size()) == req.n, "latent file has " + std::to_string(zs.size()) +
                                                          " entries but n is " + std::to_string(req.n));
        req.fixed_latents = std::move(zs);
    }
    Run run(g, "sample");
    run.input(a.checkpoint);
    if (a.latents) run.input(*a.latents);
    const auto o = sample_with_log(model, lm.config.sample, req, *g.log);
    const auto* gmm = model.latent_ctx.gmm ? &*model.latent_ctx.gmm : nullptr;
    run.write("samples.csv", io::samples_to_csv(o.gen.samples, gmm, &model.latent_ctx.vocab, o.gen.latents));
    if (model.kaleido()) run.write("latents.txt", io::latents_to_text(model.latent_ctx.vocab, o.gen.latents));
    std::string log_text;
    for (const auto& l : o.log_lines) log_text += l + '\n';
    run.write("sample_log.txt", log_text);
    const Json info{{"variant", train::to_string(model.variant)},
                    {"class", req.class_id},
                    {"guidance", req.guidance},
                    {"seed", g.seed},
                    {"n", req.n},
                    {"fixed_latents", a.latents.has_value()},
                    {"rejected_latents", o.gen.rejected_latents}};
    run.write("run.json", info.dump(2) + "\n");
    run.seal(Json{{"experiment", train::to_json(lm.config)}, {"sample", info}});
}

// ---- evaluation ------------------------------------------------------------

struct EvalArgs {
    fs::path samples;
    fs::path data;
    std::optional<fs::path> checkpoint;  // enables latent adherence
    std::optional<int> class_id;
    std::optional<double> guidance;
};

/// conditioned_latent column of a sample dump; empty when any row lacks one.
inline std::vector<latents::LatentSequence> conditioned_latents(const std::string& csv, const latents::LatentVocab& vocab) {
    std::vector<latents::LatentSequence> out;
    const auto lines = split_lines(csv);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split(lines[i], ',');
        if (f.back().empty()) return {};
        out.push_back(latents::from_surface(vocab, f.back()));
    }
    return out;
}

inline metrics::MetricReport evaluate_samples(const EvalArgs& a, const DataDir& dd, std::uint64_t seed) {
    const auto csv = read_text(a.samples);
    const Eigen::MatrixXd gen = io::samples_from_csv(csv);
    Json info = Json::object();
    if (fs::exists(a.samples.parent_path() / "run.json")) info = Json::parse(read_text(a.samples.parent_path() / "run.json"));
    metrics::EvalOptions opt;
    opt.variant = info.value("variant", std::string("unknown"));
    opt.class_id = a.class_id.value_or(info.value("class", dd.config.sample.class_id));
    opt.guidance = a.guidance.value_or(info.value("guidance", 1.0));
    opt.seed = info.value("seed", seed);
    opt.knn_k = dd.config.sample.knn_k;
    opt.min_count = dd.config.sample.min_count;
    const Eigen::MatrixXd real = train::class_matrix(dd.dataset, opt.class_id, dd.config.sample.n_real);
    require(real.rows() == gen.rows(), "sample and dataset dimensions differ");
    const auto* gmm = dd.dataset.gmm ? &*dd.dataset.gmm : nullptr;
    if (a.checkpoint) {
        const auto ck = train::load_checkpoint(*a.checkpoint);
        const auto zs = conditioned_latents(csv, ck.ema.latent_ctx.vocab);
        return metrics::evaluate(gen, real, opt, gmm, zs, &ck.ema.latent_ctx);
    }
    return metrics::evaluate(gen, real, opt, gmm);
}

inline void cmd_eval(const Globals& g, const EvalArgs& a) {
    const auto dd = load_data_dir(a.data);
    const auto report = evaluate_samples(a, dd, g.seed);
    Run run(g, "eval");
    run.input(a.samples);
    run.input(a.data / "dataset.csv");
    const auto j = metrics::to_json(report);
    run.write("metrics.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << '\n';
    run.seal(Json{{"experiment", train::to_json(dd.config)}, {"samples", a.samples.string()}});
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
    fs::path baseline;
    fs::path kaleido;
    fs::path data;
    std::optional<std::vector<double>> guidance;
    std::optional<int> n;
    std::optional<int> class_id;
};

struct SweepRow {
    metrics::MetricReport report;
    int rejected_latents = 0;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    auto opt = [](std::optional<double> v) { return v ? format_double(*v) : std::string(); };
    std::string out =
        "variant,guidance,mode_coverage,minority_fraction,recall,precision,frechet_distance,latent_adherence,"
        "rejected_latents\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out += r.variant + ',' + format_double(r.guidance) + ',' + opt(r.mode_coverage) + ',' + opt(r.minority_fraction) +
               ',' + format_double(r.recall) + ',' + format_double(r.precision) + ',' + format_double(r.frechet_distance) +
               ',' + opt(r.latent_adherence) + ',' + std::to_string(row.rejected_latents) + '\n';
    }
    return out;
}

inline io::ScatterPlot scatter_of(const Eigen::MatrixXd& x, const data::GmmSpec* gmm, const std::string& title) {
    io::ScatterPlot p;
    p.title = title;
    if (!gmm) {
        p.groups.push_back({"samples", x.topRows(2)});
        return p;
    }
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(gmm->size()));
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        members[static_cast<std::size_t>(data::assign_mode(x.col(j), *gmm))].push_back(j);
    for (int k = 0; k < gmm->size(); ++k) {
        const auto& idx = members[static_cast<std::size_t>(k)];
        Eigen::Matrix2Xd pts(2, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = x.col(idx[i]).head<2>();
        const auto name = data::mode_name(gmm->at(k).class_id, gmm->at(k).mode_id);
        p.groups.push_back({name + " (" + std::to_string(idx.size()) + ")", pts});
        p.markers.push_back({name, gmm->at(k).mean.head<2>()});
    }
    return p;
}

inline std::string guidance_tag(double g) {
    std::string s = format_double(g);
    for (auto& ch : s)
        if (ch == '.') ch = 'p';
    return s;
}

inline std::vector<SweepRow> cmd_sweep(const Globals& g, const SweepArgs& a) {
    const auto dd = load_data_dir(a.data);
    auto base = load_model(g, a.baseline);
    auto kal = load_model(g, a.kaleido);
    require(base.ckpt.ema.variant == train::Variant::baseline, a.baseline.string() + " is not a baseline checkpoint");
    require(kal.ckpt.ema.variant == train::Variant::kaleido, a.kaleido.string() + " is not a kaleido checkpoint");
    Run run(g, "sweep");
    run.input(a.baseline);
    run.input(a.kaleido);
    run.input(a.data / "dataset.csv");
    if (base.ckpt.seed != kal.ckpt.seed)
        run.warn("checkpoint pair is not controlled: seeds " + std::to_string(base.ckpt.seed) + " and " +
                 std::to_string(kal.ckpt.seed));
    if (base.ckpt.step != kal.ckpt.step)
        run.warn("checkpoint pair trained for different step counts: " + std::to_string(base.ckpt.step) + " and " +
                 std::to_string(kal.ckpt.step));
    const auto& scfg = dd.config.sample;
    const auto gammas = a.guidance.value_or(scfg.guidance);
    require(!gammas.empty(), "guidance list is empty");
    const int cls = a.class_id.value_or(scfg.class_id);
    const int n = a.n.value_or(scfg.n);
    const Eigen::MatrixXd real = train::class_matrix(dd.dataset, cls, scfg.n_real);
    const auto* gmm = dd.dataset.gmm ? &*dd.dataset.gmm : nullptr;
    std::vector<SweepRow> rows;
    Json reports = Json::array();
    for (double gamma : gammas) {
        for (const auto* lm : {&base, &kal}) {
            const auto& model = lm->ckpt.ema;
            train::GenerateRequest req;
            req.class_id = cls;
            req.n = n;
            req.guidance = gamma;
            req.seed = g.seed;
            const auto gen = train::generate(model, scfg, req);
            metrics::EvalOptions opt{train::to_string(model.variant), cls, gamma, g.seed, scfg.knn_k, scfg.min_count};
            auto rep = model.kaleido() ? metrics::evaluate(gen.samples, real, opt, gmm, gen.latents, &model.latent_ctx)
                                       : metrics::evaluate(gen.samples, real, opt, gmm);
            *g.log << opt.variant << " gamma=" << gamma << " recall=" << rep.recall
                   << " minority=" << rep.minority_fraction.value_or(-1) << " coverage=" << rep.mode_coverage.value_or(-1)
                   << " fd=" << rep.frechet_distance << '\n';
            reports.push_back(metrics::to_json(rep));
            if (gen.samples.rows() >= 2)
                run.write("scatter_" + opt.variant + "_g" + guidance_tag(gamma) + ".svg",
                          io::render_scatter(scatter_of(gen.samples, gmm,
                                                        opt.variant + ", class " + std::to_string(cls) +
                                                            ", guidance " + format_double(gamma))));
            rows.push_back({std::move(rep), gen.rejected_latents});
        }
    }
    run.write("sweep.csv", sweep_csv(rows));
    run.write("sweep.json", reports.dump(2) + "\n");
    auto series = [&](const std::string& variant, auto get) {
        io::LineSeries s;
        s.label = variant;
        for (const auto& r : rows)
            if (r.report.variant == variant) {
                s.x.push_back(r.report.guidance);
                s.y.push_back(get(r.report));
            }
        return s;
    };
    auto line = [&](const std::string& file, const std::string& metric, auto get) {
        io::LinePlot p{metric + " vs guidance", "guidance scale", metric,
                       {series("baseline", get), series("kaleido", get)}};
        run.write(file, io::render_lines(p));
    };
    line("recall_vs_guidance.svg", "recall", [](const metrics::MetricReport& r) { return r.recall; });
    if (gmm) {
        line("coverage_vs_guidance.svg", "mode coverage",
             [](const metrics::MetricReport& r) { return r.mode_coverage.value_or(0.0); });
        line("minority_vs_guidance.svg", "minority-mode fraction",
             [](const metrics::MetricReport& r) { return r.minority_fraction.value_or(0.0); });
    }
    run.seal(Json{{"experiment", train::to_json(dd.config)}, {"guidance", gammas}, {"n", n}, {"class", cls}});
    return rows;
}

// ---- latent editing --------------------------------------------------------

struct EditArgs {
    fs::path checkpoint;
    std::optional<int> class_id;
    int n = 16;
    double guidance = 7.0;
};

inline std::string shell_quote(const std::string& s) {
    if (s.find_first_of(" '\"$\\") == std::string::npos) return s;
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

inline std::string cmd_edit(const Globals& g, const EditArgs& a) {
    const auto lm = load_model(g, a.checkpoint);
    const auto& model = lm.ckpt.ema;
    require(model.kaleido(), "edit needs a kaleido checkpoint");
    require(a.n >= 1, "n must be >= 1");
    train::GenerateRequest req;
    req.class_id = a.class_id.value_or(lm.config.sample.class_id);
    req.n = a.n;
    req.guidance = a.guidance;
    req.seed = g.seed;
    Run run(g, "edit");
    run.input(a.checkpoint);
    const auto zs = train::sample_latents(model, lm.config.sample.temperature, req);
    std::string readable;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        *g.log << "z chain=" << i << " class=" << req.class_id
               << " latent=" << latents::to_surface(model.latent_ctx.vocab, zs[i]) << '\n';
        readable += std::to_string(i) + ": " + io::describe_latent(model.latent_ctx.vocab, zs[i], model.latent_ctx.grammar) + '\n';
    }
    run.write("latents.txt", io::latents_to_text(model.latent_ctx.vocab, zs));
    run.write("latents_readable.txt", readable);
    const std::string cmd = "kaleido sample --checkpoint " + shell_quote(fs::absolute(a.checkpoint).string()) +
                            " --class " + std::to_string(req.class_id) + " --guidance " + format_double(a.guidance) +
                            " --latents " + shell_quote(fs::absolute(g.out / "latents.txt").string()) + " --seed " +
                            std::to_string(g.seed) + " --out " + shell_quote(fs::absolute(g.out / "regen").string());
    run.write("regenerate.sh", "#!/bin/sh\n" + cmd + "\n");
    std::cout << "edit " << (g.out / "latents.txt").string() << " then run:\n" << cmd << '\n';
    run.seal(Json{{"experiment", train::to_json(lm.config)}, {"class", req.class_id}, {"n", a.n}, {"guidance", a.guidance}});
    return cmd;
}

// ---- plots -----------------------------------------------------------------

struct PlotArgs {
    fs::path input;
    std::string kind = "scatter";  // scatter (sample CSV) or line (sweep CSV)
    std::string metric = "recall";
    std::string name = "plot.svg";
};

inline std::string plot_svg(const PlotArgs& a, const train::ExperimentConfig& cfg) {
    const auto text = read_text(a.input);
    if (a.kind == "scatter") {
        const Eigen::MatrixXd x = io::samples_from_csv(text);
        require(x.rows() >= 2, "scatter plots need at least two dimensions");
        std::optional<data::GmmSpec> gmm;
        if (cfg.data.kind == train::DatasetKind::gmm) gmm = data::toy_gmm_default(cfg.data.weights);
        return io::render_scatter(scatter_of(x, gmm ? &*gmm : nullptr, a.input.filename().string()));
    }
    require(a.kind == "line", "plot kind must be scatter or line");
    const auto lines = split_lines(text);
    require(!lines.empty(), "sweep file is empty");
    const auto header = split(lines.front(), ',');
    const auto col = std::find(header.begin(), header.end(), a.metric);
    require(col != header.end(), "sweep file has no column '" + a.metric + "'");
    const auto ci = static_cast<std::size_t>(col - header.begin());
    require(header.size() > 1 && header[0] == "variant" && header[1] == "guidance", "not a sweep CSV");
    std::vector<io::LineSeries> series;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split(lines[i], ',');
        require(f.size() == header.size(), "sweep line " + std::to_string(i + 1) + " is ragged");
        if (f[ci].empty()) continue;
        auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.label == f[0]; });
        if (it == series.end()) {
            series.push_back({f[0], {}, {}});
            it = series.end() - 1;
        }
        it->x.push_back(parse_double(f[1], "guidance"));
        it->y.push_back(parse_double(f[ci], a.metric));
    }
    return io::render_lines({a.metric + " vs guidance", "guidance scale", a.metric, series});
}

inline void cmd_plot(const Globals& g, const PlotArgs& a) {
    const auto cfg = resolve_config(g, a.input.parent_path());
    const auto svg = plot_svg(a, cfg);
    Run run(g, "plot");
    run.input(a.input);
    run.write(a.name, svg);
    run.seal(Json{{"kind", a.kind}, {"metric", a.metric}, {"input", a.input.string()}});
}

/// Returns the process exit code.
inline int cmd_verify_manifest(const fs::path& dir, std::ostream& out) {
    const auto r = io::verify_manifest(dir);
    if (r.ok) {
        out << "manifest OK: " << (dir / io::kManifestName).string() << '\n';
        return 0;
    }
    for (const auto& p : r.problems) out << "manifest problem: " << p << '\n';
    return 1;
}

}  // namespace kaleido::cli
