// SPDX-License-Identifier: Apache-2.0
//
// cbert: glyph- and pinyin-aware Chinese masked language model, desk scale.
//
// Subcommands: synth-atlas, build-lexicon-check, pretrain,
// finetune {classify|tag}, eval, gradcheck, ablate, inspect.
// Global flags: --config PATH, --seed N, --set key=value (repeatable).
//
// Exit codes: 0 success, 2 input/config error, 3 numerical failure.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cbert/commands.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::vector<std::string> sets;
    uint64_t seed = 0;
    bool seed_given = false;
};

cbert::RunConfig make_config(const GlobalArgs& g) {
    return cbert::resolve_run_config(g.config_path, g.sets,
                                     g.seed_given ? &g.seed : nullptr);
}

void add_global_flags(CLI::App* app, GlobalArgs& g) {
    app->add_option("--config", g.config_path, "key=value config file");
    app->add_option("--set", g.sets, "override a config key (repeatable)")
        ->take_all()
        ->allow_extra_args(false);
    app->add_option("--seed", g.seed, "random seed override")
        ->each([&g](const std::string&) { g.seed_given = true; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"glyph+pinyin fusion masked language model"};
    app.require_subcommand(1);
    GlobalArgs g;

    std::string charset_path, atlas_out;
    auto* synth = app.add_subcommand("synth-atlas", "write a synthesized glyph atlas");
    synth->add_option("charset", charset_path, "charset file (U+XXXX lines or raw text)")
        ->required();
    synth->add_option("output", atlas_out, "atlas output path")->required();
    add_global_flags(synth, g);

    std::string lexicon_path, word_path;
    auto* lexcheck =
        app.add_subcommand("build-lexicon-check", "validate pinyin/word lexicon files");
    lexcheck->add_option("pinyin_lexicon", lexicon_path, "pinyin lexicon path")->required();
    lexcheck->add_option("word_lexicon", word_path, "word lexicon path");
    add_global_flags(lexcheck, g);

    auto* pretrain = app.add_subcommand("pretrain", "masked-language-model pretraining");
    add_global_flags(pretrain, g);

    std::string finetune_task;
    auto* finetune = app.add_subcommand("finetune", "train a task head on a checkpoint");
    finetune->add_option("task", finetune_task, "classify or tag")->required();
    add_global_flags(finetune, g);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    add_global_flags(eval, g);

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    add_global_flags(gradcheck, g);

    auto* ablate = app.add_subcommand("ablate", "train/compare glyph-pinyin ablation variants");
    add_global_flags(ablate, g);

    auto* inspect = app.add_subcommand("inspect", "dump one character's embedding vectors");
    add_global_flags(inspect, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cbert::cmd_synth_atlas(charset_path, atlas_out, std::cout);
        if (lexcheck->parsed()) {
            return cbert::cmd_lexicon_check(lexicon_path, word_path, std::cout);
        }
        if (pretrain->parsed()) return cbert::cmd_pretrain(make_config(g), std::cout);
        if (finetune->parsed()) {
            cbert::RunConfig cfg = make_config(g);
            cfg.task = finetune_task;
            return cbert::cmd_finetune(cfg, std::cout);
        }
        if (eval->parsed()) return cbert::cmd_eval(make_config(g), std::cout);
        if (gradcheck->parsed()) return cbert::cmd_gradcheck(make_config(g), std::cout);
        if (ablate->parsed()) return cbert::cmd_ablate(make_config(g), std::cout);
        if (inspect->parsed()) return cbert::cmd_inspect(make_config(g), std::cout);
    } catch (const cbert::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const cbert::ShapeError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
