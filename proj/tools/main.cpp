// Command line front end. Links the C surface only, so it stays honest
// about what embedders of the shared library can reach.
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "motionlab.h"

namespace {

struct SubCommand {
    CLI::App* app = nullptr;
    std::map<std::string, std::string> values;              // key -> parsed value
    std::vector<std::pair<std::string, std::string>> flags; // flag -> key
};

void opt(SubCommand& sc, const std::string& flag, const std::string& key,
         const std::string& desc) {
    sc.flags.emplace_back(flag, key);
    sc.app->add_option(flag, sc.values[key], desc);
}

void common_opts(SubCommand& sc) {
    opt(sc, "--out", "out", "fresh directory for this run's artifacts (required)");
    opt(sc, "--config", "config", "key = value file filling keys not set on the command line");
    opt(sc, "--seed", "seed", "random seed (default 0)");
    opt(sc, "--deterministic", "deterministic", "true|false, recorded in the run config");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"self contained text to video motion customization laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "motionlab 1.0.0");
    std::map<std::string, SubCommand> subs;

    auto add = [&](const std::string& name, const std::string& desc) -> SubCommand& {
        SubCommand& sc = subs[name];
        sc.app = app.add_subcommand(name, desc);
        common_opts(sc);
        return sc;
    };

    SubCommand& corpus = add("corpus", "render a synthetic clip corpus with ground truth");
    opt(corpus, "--count", "count", "clips to render (default 64)");
    opt(corpus, "--frames", "frames", "frames per clip (default 8)");
    opt(corpus, "--size", "size", "frame edge in pixels, at least 16 (default 16)");

    SubCommand& train = add("train-base", "train a base denoiser on a rendered corpus");
    opt(train, "--corpus", "corpus", "corpus run directory (required)");
    opt(train, "--steps", "steps", "optimization steps (default 3000)");
    opt(train, "--batch", "batch", "clips per step (default 2)");
    opt(train, "--lr", "lr", "learning rate (default 2e-4)");
    opt(train, "--log-every", "log_every", "steps between loss records (default 50)");
    opt(train, "--channels", "channels", "comma separated widths per level (default 32,64)");
    opt(train, "--heads", "heads", "attention heads (default 4)");
    opt(train, "--timesteps", "timesteps", "diffusion timesteps (default 1000)");

    SubCommand& cust = add("customize", "fine-tune a base model on one reference clip");
    opt(cust, "--base", "base", "base model checkpoint (required)");
    opt(cust, "--reference", "reference", "reference clip file (required)");
    opt(cust, "--steps", "steps", "motion phase steps (default 400)");
    opt(cust, "--spatial-steps", "spatial_steps", "appearance phase steps (default 0)");
    opt(cust, "--lr", "lr", "learning rate (default 1e-4)");
    opt(cust, "--beta", "beta", "appearance normalization weight (default 5.0)");
    opt(cust, "--log-every", "log_every", "steps between loss records (default 10)");

    SubCommand& gen = add("generate", "sample a clip from a text prompt");
    opt(gen, "--model", "model", "model checkpoint (required)");
    opt(gen, "--prompt", "prompt", "conditioning text (required)");
    opt(gen, "--steps", "steps", "denoising steps (default 20)");
    opt(gen, "--eta", "eta", "stochasticity in [0, 1] (default 0)");
    opt(gen, "--export", "export", "png|gif|both|none (default both)");

    SubCommand& eval = add("evaluate", "score a model over the built-in prompt protocol");
    opt(eval, "--model", "model", "model checkpoint (required)");
    opt(eval, "--steps", "steps", "denoising steps (default 20)");
    opt(eval, "--eta", "eta", "stochasticity in [0, 1] (default 0)");
    opt(eval, "--n-basic", "n_basic", "single factor prompts per motion (default 3)");
    opt(eval, "--n-complex", "n_complex", "multi factor prompts per motion (default 3)");

    SubCommand& exp = add("export", "render an existing clip file to media");
    opt(exp, "--clip", "clip", "clip file (required)");
    opt(exp, "--format", "format", "png|gif|both (default both)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help, --version
        std::fprintf(stderr, "usage error: %s\n", e.what());
        std::fprintf(stderr, "run '%s --help' for the command list\n", argv[0]);
        return 2;
    }

    const SubCommand& sc = subs.at(app.get_subcommands().front()->get_name());
    std::vector<const char*> keys, values;
    for (const auto& [flag, key] : sc.flags)
        if (sc.app->count(flag) > 0) { // pass only what the user actually set
            keys.push_back(key.c_str());
            values.push_back(sc.values.at(key).c_str());
        }

    if (mc_cmd(sc.app->get_name().c_str(), keys.data(), values.data(), keys.size()) != MC_OK) {
        std::fprintf(stderr, "error (%s): %s\n",
                     mc_error_category_name(mc_last_error_code()), mc_last_error_message());
        return 1;
    }
    return 0;
}
