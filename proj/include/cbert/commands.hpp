// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>

#include "cbert/runconfig.hpp"

namespace cbert {

// Subcommand bodies. Each returns a process exit code (0 success) and
// writes human-readable progress to `out`. Input/config problems raise
// ConfigError/FormatError/Error (exit 2 at the CLI boundary); numerical
// failures raise NumericError/ShapeError (exit 3).

int cmd_synth_atlas(const std::string& charset_path, const std::string& out_path,
                    std::ostream& out);
int cmd_lexicon_check(const std::string& pinyin_path, const std::string& word_path,
                      std::ostream& out);
int cmd_pretrain(const RunConfig& cfg, std::ostream& out);
int cmd_finetune(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& out);
int cmd_ablate(const RunConfig& cfg, std::ostream& out);
int cmd_inspect(const RunConfig& cfg, std::ostream& out);

// Gradient tolerance every registered parameter must meet.
inline constexpr double kGradCheckTol = 1e-4;
// Parameter-count ceiling enforced by cmd_gradcheck.
inline constexpr int64_t kGradCheckMaxParams = 100000;

// Shared pretraining data bundle.
struct PretrainData {
    Vocab vocab;
    WordLexicon words;
    PinyinLexicon pinyin;
    GlyphAtlas atlas;
    std::vector<TrainingExample> examples;
    BuildStats build_stats;
};

PretrainData load_pretrain_data(const RunConfig& cfg);

// Deterministic synthetic fixture for gradient checking: 45 characters,
// synthesized glyphs, generated readings and a small two-sentence batch.
struct GradCheckFixture {
    Vocab vocab;
    GlyphAtlas atlas;
    PinyinLexicon pinyin;
    std::vector<MaskedBatch> batch;
};
GradCheckFixture make_gradcheck_fixture(uint64_t seed);

}  // namespace cbert
