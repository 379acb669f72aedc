#include <iostream>

#include <CLI11.hpp>

#include "kaleido/cli/commands.hpp"

namespace cli = kaleido::cli;

int main(int argc, char** argv) {
    CLI::App app{"kaleido: latent-augmented diffusion on toy data"};
    app.require_subcommand(1);
    app.fallthrough();

    cli::Globals g;
    std::string config;
    std::string out;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--out", out, "output directory");
    app.add_flag("--force", g.force, "overwrite a non-empty output directory");
    app.add_option("--config", config, "experiment config (JSON)")->check(CLI::ExistingFile);

    cli::GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "sample a synthetic dataset and extract its latents");
    gen_cmd->add_option("--n", gen.n, "number of samples");

    cli::TrainArgs tr;
    std::string train_data;
    auto* train_cmd = app.add_subcommand("train", "train a baseline or kaleido model");
    train_cmd->add_option("--data", train_data, "gen-data output directory")->required()->check(CLI::ExistingDirectory);
    train_cmd->add_option("--variant", tr.variant, "baseline or kaleido");
    train_cmd->add_option("--steps", tr.steps, "override the configured step count");

    cli::SampleArgs sm;
    std::string sample_ckpt, sample_latents;
    auto* sample_cmd = app.add_subcommand("sample", "draw samples (kaleido: z from the prior first, then diffusion)");
    sample_cmd->add_option("--checkpoint", sample_ckpt)->required()->check(CLI::ExistingFile);
    sample_cmd->add_option("--class", sm.class_id);
    sample_cmd->add_option("--guidance", sm.guidance)->capture_default_str();
    sample_cmd->add_option("--n", sm.n);
    sample_cmd->add_option("--latents", sample_latents, "use these latents verbatim")->check(CLI::ExistingFile);
    sample_cmd->add_flag("--live", sm.live, "use live weights instead of the EMA");

    cli::EvalArgs ev;
    std::string eval_samples, eval_data, eval_ckpt;
    auto* eval_cmd = app.add_subcommand("eval", "compute a MetricReport for a sample dump");
    eval_cmd->add_option("--samples", eval_samples)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", eval_data)->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--checkpoint", eval_ckpt, "enables latent adherence")->check(CLI::ExistingFile);
    eval_cmd->add_option("--class", ev.class_id);
    eval_cmd->add_option("--guidance", ev.guidance);

    cli::SweepArgs sw;
    std::string sw_base, sw_kal, sw_data;
    std::vector<double> sw_gammas;
    auto* sweep_cmd = app.add_subcommand("sweep", "guidance sweep over a controlled baseline/kaleido pair");
    sweep_cmd->add_option("--baseline", sw_base)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--kaleido", sw_kal)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--data", sw_data)->required()->check(CLI::ExistingDirectory);
    sweep_cmd->add_option("--guidance", sw_gammas, "guidance scales")->delimiter(',');
    sweep_cmd->add_option("--n", sw.n);
    sweep_cmd->add_option("--class", sw.class_id);

    cli::EditArgs ed;
    std::string edit_ckpt;
    auto* edit_cmd = app.add_subcommand("edit", "write an editable latent file and the command that regenerates it");
    edit_cmd->add_option("--checkpoint", edit_ckpt)->required()->check(CLI::ExistingFile);
    edit_cmd->add_option("--class", ed.class_id);
    edit_cmd->add_option("--n", ed.n)->capture_default_str();
    edit_cmd->add_option("--guidance", ed.guidance)->capture_default_str();

    cli::PlotArgs pl;
    std::string plot_input;
    auto* plot_cmd = app.add_subcommand("plot", "render a sample CSV (scatter) or sweep CSV (line) as SVG");
    plot_cmd->add_option("--input", plot_input)->required()->check(CLI::ExistingFile);
    plot_cmd->add_option("--kind", pl.kind)->check(CLI::IsMember({"scatter", "line"}))->capture_default_str();
    plot_cmd->add_option("--metric", pl.metric)->capture_default_str();
    plot_cmd->add_option("--name", pl.name, "output file name")->capture_default_str();

    std::string verify_dir;
    auto* verify_cmd = app.add_subcommand("verify-manifest", "re-hash a run directory against its manifest");
    verify_cmd->add_option("dir", verify_dir, "run directory (defaults to --out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    g.out = out;
    if (!config.empty()) g.config = config;
    try {
        if (*gen_cmd) {
            cli::cmd_gen_data(g, gen);
        } else if (*train_cmd) {
            tr.data = train_data;
            cli::cmd_train(g, tr);
        } else if (*sample_cmd) {
            sm.checkpoint = sample_ckpt;
            if (!sample_latents.empty()) sm.latents = sample_latents;
            cli::cmd_sample(g, sm);
        } else if (*eval_cmd) {
            ev.samples = eval_samples;
            ev.data = eval_data;
            if (!eval_ckpt.empty()) ev.checkpoint = eval_ckpt;
            cli::cmd_eval(g, ev);
        } else if (*sweep_cmd) {
            sw.baseline = sw_base;
            sw.kaleido = sw_kal;
            sw.data = sw_data;
            if (!sw_gammas.empty()) sw.guidance = sw_gammas;
            cli::cmd_sweep(g, sw);
        } else if (*edit_cmd) {
            ed.checkpoint = edit_ckpt;
            cli::cmd_edit(g, ed);
        } else if (*plot_cmd) {
            pl.input = plot_input;
            cli::cmd_plot(g, pl);
        } else if (*verify_cmd) {
            const auto dir = verify_dir.empty() ? g.out : std::filesystem::path(verify_dir);
            if (dir.empty()) throw kaleido::ContractViolation("verify-manifest needs a directory");
            return cli::cmd_verify_manifest(dir, std::cout);
        }
    } catch (const kaleido::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 2;
    } catch (const kaleido::ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const kaleido::NonFiniteError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
