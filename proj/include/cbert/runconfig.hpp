// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cbert/masking.hpp"
#include "cbert/model.hpp"
#include "cbert/train.hpp"

namespace cbert {

// Effective run settings: flat key=value config file, overridden by
// repeatable --set key=value flags. Unknown keys are hard errors. The
// effective configuration is echoed verbatim into run logs and checkpoint
// config blocks.
struct RunConfig {
    std::string preset = "toy";

    int layers = 0;
    int hidden = 0;
    int heads = 0;
    int pinyin_embed_width = 0;
    int max_len = 0;
    double dropout = 0.0;
    bool use_glyph = true;
    bool use_pinyin = true;

    uint64_t seed = 1;

    std::string corpus;
    std::string word_lexicon;
    std::string pinyin_lexicon;
    std::string atlas;
    std::string checkpoint;
    std::string init_checkpoint;
    std::string log;
    std::string out_dir;
    std::string train_data;
    std::string eval_data;

    double max_lr = 0.0;
    int warmup_steps = 0;
    int total_steps = 0;
    int batch_size = 0;
    double weight_decay = 0.01;

    double wwm_prob = 0.9;
    double select_prob = 0.15;
    double mask_frac = 0.8;
    double random_frac = 0.1;
    double keep_frac = 0.1;
    double packed_prob = 0.9;

    std::string task;  // mlm | classify | tag
    double gradcheck_eps = 1e-4;
    std::string debug_corrupt_grad;
    std::string inspect_char;
    std::string inspect_context;

    ModelConfig model_config(int vocab_size) const;
    MaskingPolicy masking_policy() const;
    TrainConfig train_config() const;

    // Canonical (key, value) list of the effective configuration.
    std::vector<std::pair<std::string, std::string>> echo() const;
    std::string echo_text(const std::string& line_prefix) const;
};

// Builds a RunConfig from an optional config file, an optional --seed and
// repeatable --set overrides. ConfigError on unknown keys or bad values.
RunConfig resolve_run_config(const std::string& config_path,
                             const std::vector<std::string>& set_overrides,
                             const uint64_t* seed_override);

}  // namespace cbert
