// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "cbert/glyph.hpp"
#include "cbert/model.hpp"
#include "cbert/pinyin.hpp"
#include "cbert/vocab.hpp"

namespace cbert {

// Per-position inputs for the embedding layer, derived from (possibly
// corrupted) token ids. Special tokens have codepoint 0 (blank glyph) and
// the all-pad pinyin sequence.
struct EmbeddingInputs {
    std::vector<int> ids;
    std::vector<uint32_t> codepoints;
    std::vector<PinyinSequence> pinyin;
};

// Readings are resolved over the id-derived codepoint sequence, so a
// corrupted stream yields the readings of what the model actually sees.
EmbeddingInputs derive_embedding_inputs(std::span<const int> ids, const Vocab& vocab,
                                        const PinyinLexicon& lexicon);

// Concatenates the enabled sources in the fixed order char | glyph |
// pinyin and maps the result back to width D through the fusion layer.
// With both extra sources disabled the char vector is returned unchanged.
Value fuse(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, Value char_vec,
           Value glyph_vec, Value pinyin_vec);

// Full embedding for a token sequence: fusion output plus the learned
// absolute position rows. Output is [T x D].
Value embed_sequence(Tape& tape, const BoundParams& bound, const ModelConfig& cfg,
                     const GlyphAtlas& atlas, const EmbeddingInputs& inputs);

}  // namespace cbert
