// lytimet: single-binary experiment harness.
//
//   lytimet generate  --config exp.cfg [--seed N] [--out DIR] [--no-overwrite]
//   lytimet train     --config exp.cfg [--phase {1,2}] [--steps N] [--lyap F]
//   lytimet evaluate  --config exp.cfg
//   lytimet ablate    --config exp.cfg
//   lytimet plot      --config exp.cfg
//   lytimet gradcheck --config exp.cfg
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lyt/pipeline.hpp"

namespace {

using namespace lyt;

struct Overrides {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    double lyap = 0;
    int phase = 0;
    std::size_t steps = 0;
    bool lite = false;
    bool no_overwrite = false;
    bool have_seed = false, have_lyap = false;
};

void add_common(CLI::App* sub, Overrides& ov) {
    sub->add_option("--config", ov.config_path, "experiment config file (key = value lines)");
    sub->add_option("--seed", ov.seed, "override the experiment seed")
        ->each([&](const std::string&) { ov.have_seed = true; });
    sub->add_option("--out", ov.out_dir, "override the output directory");
    sub->add_flag("--lite", ov.lite, "run the Lite encoder variant");
}

ExperimentConfig build_config(const Overrides& ov) {
    ExperimentConfig cfg;
    if (!ov.config_path.empty()) cfg = ExperimentConfig::from_file(ov.config_path);
    if (ov.have_seed) cfg.seed = ov.seed;
    if (!ov.out_dir.empty()) cfg.output_dir = ov.out_dir;
    if (ov.lite) cfg.model = cfg.model.lite_variant();
    if (ov.have_lyap) cfg.model.lambda_lyap = ov.lyap;
    cfg.finalize();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LyTimeT desk-scale laboratory: simulate, render, train, probe, report"};
    app.require_subcommand(1);
    Overrides ov;

    CLI::App* c_gen = app.add_subcommand("generate", "simulate and render the dataset");
    add_common(c_gen, ov);
    c_gen->add_flag("--no-overwrite", ov.no_overwrite, "keep an existing dataset untouched");

    CLI::App* c_train = app.add_subcommand("train", "two-phase training with probing between");
    add_common(c_train, ov);
    c_train->add_option("--phase", ov.phase, "run only this phase (1 or 2)")
        ->check(CLI::IsMember({1, 2}));
    c_train->add_option("--steps", ov.steps, "override the step count of the trained phase(s)");
    c_train->add_option("--lyap", ov.lyap, "override lambda_lyap (0 skips phase 2)")
        ->each([&](const std::string&) { ov.have_lyap = true; });
    c_train->add_flag("--no-overwrite", ov.no_overwrite, "keep complete checkpoints untouched");

    CLI::App* c_eval = app.add_subcommand("evaluate", "metric report for the trained model");
    add_common(c_eval, ov);

    CLI::App* c_abl = app.add_subcommand("ablate", "{full,lite} x {lyapunov on,off} grid");
    add_common(c_abl, ov);
    c_abl->add_option("--lyap", ov.lyap, "lambda_lyap for the regularized arms")
        ->each([&](const std::string&) { ov.have_lyap = true; });

    CLI::App* c_plot = app.add_subcommand("plot", "emit SVG overlays, rankings, loss curves");
    add_common(c_plot, ov);

    CLI::App* c_grad = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    add_common(c_grad, ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are configuration errors
    }

    try {
        const ExperimentConfig cfg = build_config(ov);
        if (c_gen->parsed()) {
            const GenerateResult res = cmd_generate(cfg, ov.no_overwrite);
            if (res.skipped)
                std::cout << "dataset exists at " << res.dir.string()
                          << " (left untouched under --no-overwrite)\n";
            else
                std::cout << "dataset: " << res.dir.string() << " (train " << res.n_train
                          << ", eval " << res.n_eval << " x " << cfg.distract_eval.size()
                          << " variants)\n";
        } else if (c_train->parsed()) {
            TrainOptions opts;
            opts.phase = ov.phase;
            opts.steps = ov.steps;
            opts.no_overwrite = ov.no_overwrite;
            const TrainResult res = cmd_train(cfg, opts);
            if (res.skipped) std::cout << "checkpoints exist (left untouched)\n";
            if (!res.log1.rows.empty())
                std::cout << "phase 1: " << res.log1.rows.size() << " logged steps, final loss "
                          << res.log1.rows.back().l_total << "\n";
            if (!res.selected.empty()) {
                std::cout << "selected dims:";
                for (std::size_t d : res.selected) std::cout << " " << d;
                std::cout << "\n";
            }
            if (!res.log2.rows.empty())
                std::cout << "phase 2: " << res.log2.rows.size() << " logged steps, final loss "
                          << res.log2.rows.back().l_total << "\n";
        } else if (c_eval->parsed()) {
            const ExperimentReport report = cmd_evaluate(cfg);
            report.to_csv(std::cout);
        } else if (c_abl->parsed()) {
            const AblateResult res = cmd_ablate(cfg);
            res.table_lyap_csv(std::cout);
            std::cout << "\n";
            res.table_encoder_csv(std::cout);
        } else if (c_plot->parsed()) {
            for (const auto& path : cmd_plot(cfg)) std::cout << path.string() << "\n";
        } else if (c_grad->parsed()) {
            const GradcheckReport report = cmd_gradcheck(cfg);
            std::cout << "gradcheck: " << report.checked << " partials over "
                      << report.losses.size() << " losses, worst relative error "
                      << report.worst_rel << (report.ok() ? " (ok)\n" : " (FAILED)\n");
            for (const GradcheckIssue& issue : report.failures)
                std::cout << "  " << issue.loss << " " << issue.tensor << "[" << issue.index
                          << "]: analytic " << issue.analytic << " vs fd " << issue.fd
                          << " (rel " << issue.rel << ")\n";
            if (!report.ok()) return 3;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
