// Command-line driver: compress | spectra | interactions | bandwidth-search | verify.
// Exit codes: 0 success, 1 configuration error, 2 runtime/numerical error,
// 3 verification-suite failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "kernid/config.hpp"
#include "kernid/harness.hpp"

namespace {

kernid::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw kernid::ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return kernid::parse_config_string(text);
}

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> trials;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Path to the JSON configuration")->required();
    cmd->add_option("--seed", args.seed, "Override the master seed");
    cmd->add_option("--out", args.out, "Override the output path ('-' for stdout)");
    cmd->add_option("--trials", args.trials, "Override the trial count");
}

kernid::ExperimentConfig resolve(const CommonArgs& args) {
    kernid::ExperimentConfig cfg = load_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    if (args.out) cfg.out = (*args.out == "-") ? "" : *args.out;
    if (args.trials) cfg.trials = *args.trials;
    cfg.validate();
    return cfg;
}

int with_output(const kernid::ExperimentConfig& cfg,
                const std::function<void(std::ostream&)>& body) {
    if (cfg.out.empty()) {
        body(std::cout);
        return 0;
    }
    std::ofstream out(cfg.out, std::ios::binary);
    if (!out) throw kernid::ConfigError("cannot open output file: " + cfg.out);
    body(out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomized far-field compression of kernel interaction matrices"};
    app.require_subcommand(1);

    CommonArgs compress_args, spectra_args, interactions_args, bandwidth_args;
    auto* compress_cmd = app.add_subcommand("compress", "Run the subsampled compression sweep");
    add_common(compress_cmd, compress_args);
    auto* spectra_cmd = app.add_subcommand("spectra", "Report normalized singular values of K");
    add_common(spectra_cmd, spectra_args);
    auto* interactions_cmd =
        app.add_subcommand("interactions", "Report self/neighbor/far interaction fractions");
    add_common(interactions_cmd, interactions_args);
    auto* bandwidth_cmd =
        app.add_subcommand("bandwidth-search", "Search bandwidths meeting a rank budget");
    add_common(bandwidth_cmd, bandwidth_args);

    auto* verify_cmd = app.add_subcommand("verify", "Run the bound-verification suites");
    kernid::VerifyOptions vopts;
    bool inject_broken = false;
    verify_cmd->add_option("--suite", vopts.suite,
                           "Suite: all|id_bound|hmt|projection|uniform|chernoff|improvement|submatrix");
    verify_cmd->add_option("--trials", vopts.trials, "Monte Carlo trials per suite");
    verify_cmd->add_option("--seed", vopts.seed, "Suite seed");
    verify_cmd->add_option("--eps", vopts.eps, "Theorem epsilon");
    verify_cmd->add_option("--delta", vopts.delta, "Theorem failure tolerance");
    verify_cmd
        ->add_flag("--inject-broken-bound", inject_broken,
                   "Self-test hook: scale every bound to zero so the suite must fail")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    }

    try {
        if (compress_cmd->parsed()) {
            const auto cfg = resolve(compress_args);
            return with_output(cfg, [&](std::ostream& out) {
                kernid::run_experiment(cfg, out, &std::cerr);
            });
        }
        if (spectra_cmd->parsed()) {
            const auto cfg = resolve(spectra_args);
            return with_output(cfg, [&](std::ostream& out) { kernid::spectra_report(cfg, out); });
        }
        if (interactions_cmd->parsed()) {
            const auto cfg = resolve(interactions_args);
            return with_output(cfg,
                               [&](std::ostream& out) { kernid::interactions_report(cfg, out); });
        }
        if (bandwidth_cmd->parsed()) {
            const auto cfg = resolve(bandwidth_args);
            return with_output(
                cfg, [&](std::ostream& out) { kernid::bandwidth_search_command(cfg, out); });
        }
        if (verify_cmd->parsed()) {
            if (inject_broken) vopts.bound_scale = 0.0;
            const kernid::VerifySummary summary = kernid::run_verification(vopts, std::cout);
            std::cout << summary.checks - summary.failures << "/" << summary.checks
                      << " bounds verified\n";
            return summary.failures == 0 ? 0 : 3;
        }
    } catch (const kernid::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const kernid::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
