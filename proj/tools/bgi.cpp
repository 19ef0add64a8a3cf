// bgi: command-line driver for environment generation, demonstration sampling,
// reward learning, evaluation and benchmarking.

#include "bgi/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Flags {
    std::optional<std::string> config;
    bgi::cli::Overrides overrides;
    std::optional<std::string> out;
    std::optional<std::string> learned;
    bool large = false;
};

void add_common(CLI::App* cmd, Flags& flags) {
    cmd->add_option("--config", flags.config, "experiment config (JSON)");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--seed", flags.overrides.seed, "seed consumed by this command");
    cmd->add_option("--method", flags.overrides.method, "smoothing method")
        ->check(CLI::IsMember({"pnorm", "gsoft"}));
    cmd->add_option("--k", flags.overrides.k, "approximation level k");
    cmd->add_option("--b", flags.overrides.b, "motion-model confidence b");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reward learning from observed actions via Bellman gradient iteration"};
    app.require_subcommand(1);
    Flags flags;

    auto* generate = app.add_subcommand("generate", "write mdp.json and truth.json");
    auto* sample = app.add_subcommand("sample", "sample demonstration trajectories");
    auto* learn = app.add_subcommand("learn", "learn reward weights from trajectories");
    auto* eval = app.add_subcommand("eval", "evaluate a learned reward");
    auto* bench = app.add_subcommand("bench", "time one gradient-ascent iteration per state size");
    for (auto* cmd : {generate, sample, learn, eval, bench}) add_common(cmd, flags);
    eval->add_option("--learned", flags.learned, "learned reward JSON (default OUT/learned.json)");
    bench->add_flag("--large", flags.large, "also run 6400 and 14400 states");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? bgi::cli::kSuccess : bgi::cli::kConfigError;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        auto cfg = bgi::cli::load_config(flags.config);
        if (flags.out) flags.overrides.out = *flags.out;
        bgi::cli::apply_overrides(cfg, flags.overrides, command);

        if (command == "generate") {
            bgi::cli::cmd_generate(cfg, std::cout);
        } else if (command == "sample") {
            bgi::cli::cmd_sample(cfg, std::cout);
        } else if (command == "learn") {
            bgi::cli::cmd_learn(cfg, std::cout);
        } else if (command == "eval") {
            std::optional<std::filesystem::path> learned;
            if (flags.learned) learned = *flags.learned;
            bgi::cli::cmd_eval(cfg, learned, std::cout);
        } else {
            bgi::cli::cmd_bench(cfg, flags.large, std::cout);
        }
    } catch (const bgi::cli::ConfigError& e) {
        std::cerr << "bgi " << command << ": config error: " << e.what() << '\n';
        return bgi::cli::kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "bgi " << command << ": " << e.what() << '\n';
        return bgi::cli::kRuntimeError;
    }
    return bgi::cli::kSuccess;
}
