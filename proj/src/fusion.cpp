// SPDX-License-Identifier: Apache-2.0
#include "cbert/fusion.hpp"

#include <numeric>

namespace cbert {

EmbeddingInputs derive_embedding_inputs(std::span<const int> ids, const Vocab& vocab,
                                        const PinyinLexicon& lexicon) {
    EmbeddingInputs in;
    in.ids.assign(ids.begin(), ids.end());
    in.codepoints.reserve(ids.size());
    for (int id : ids) in.codepoints.push_back(vocab.codepoint_of(id));
    in.pinyin.reserve(ids.size());
    for (size_t t = 0; t < in.codepoints.size(); ++t) {
        if (in.codepoints[t] == 0) {
            in.pinyin.push_back(PinyinSequence::all_pad());
        } else {
            in.pinyin.push_back(
                PinyinSequence::from_reading(lexicon.resolve(in.codepoints, t)));
        }
    }
    return in;
}

Value fuse(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, Value char_vec,
           Value glyph_vec, Value pinyin_vec) {
    if (!cfg.use_glyph && !cfg.use_pinyin) return char_vec;
    std::vector<Value> parts;
    parts.push_back(char_vec);
    if (cfg.use_glyph) parts.push_back(glyph_vec);
    if (cfg.use_pinyin) parts.push_back(pinyin_vec);
    for (Value p : parts) {
        const Tensor& tp = tape.value(p);
        if (tp.ndim() != 1 || tp.extent(0) != cfg.hidden) {
            throw ShapeError("fuse: expected [" + std::to_string(cfg.hidden) + "] vectors, got " +
                             tp.shape_str());
        }
    }
    Value cat = tape.concat_last(parts);
    Value row = tape.reshape(cat, {1, cfg.fusion_inputs() * cfg.hidden});
    Value fused = tape.add_row(tape.matmul(row, bound["embed.fusion.weight"]),
                               bound["embed.fusion.bias"]);
    return tape.reshape(fused, {cfg.hidden});
}

Value embed_sequence(Tape& tape, const BoundParams& bound, const ModelConfig& cfg,
                     const GlyphAtlas& atlas, const EmbeddingInputs& inputs) {
    const int t_len = static_cast<int>(inputs.ids.size());
    if (t_len == 0) throw ShapeError("embed_sequence: empty sequence");
    if (t_len > cfg.max_len) {
        throw Error("embed_sequence: length " + std::to_string(t_len) + " exceeds max_len " +
                    std::to_string(cfg.max_len));
    }
    for (int id : inputs.ids) {
        if (id < 0 || id >= cfg.vocab_size) {
            throw Error("embed_sequence: token id " + std::to_string(id) +
                        " outside vocab of size " + std::to_string(cfg.vocab_size));
        }
    }

    Value char_rows = tape.gather_rows(bound["embed.char_table"], inputs.ids);

    Value fused;
    if (cfg.fusion_inputs() >= 2) {
        std::vector<Value> parts;
        parts.push_back(char_rows);
        if (cfg.use_glyph) {
            Tensor gx({t_len, kGlyphFlatWidth});
            for (int t = 0; t < t_len; ++t) {
                const Tensor flat = flatten_normalize(atlas.lookup(inputs.codepoints[static_cast<size_t>(t)]));
                for (int j = 0; j < kGlyphFlatWidth; ++j) {
                    gx.at(t, j) = flat[static_cast<size_t>(j)];
                }
            }
            Value glyph_rows =
                tape.add_row(tape.matmul(tape.constant(std::move(gx)), bound["embed.glyph.weight"]),
                             bound["embed.glyph.bias"]);
            parts.push_back(glyph_rows);
        }
        if (cfg.use_pinyin) {
            std::vector<Value> rows;
            rows.reserve(static_cast<size_t>(t_len));
            for (int t = 0; t < t_len; ++t) {
                rows.push_back(pinyin_embed(tape, bound["embed.pinyin.symbol_table"],
                                            bound["embed.pinyin.filters"],
                                            bound["embed.pinyin.bias"],
                                            inputs.pinyin[static_cast<size_t>(t)]));
            }
            parts.push_back(tape.stack_rows(rows));
        }
        Value cat = tape.concat_last(parts);
        fused = tape.add_row(tape.matmul(cat, bound["embed.fusion.weight"]),
                             bound["embed.fusion.bias"]);
    } else {
        fused = char_rows;
    }

    std::vector<int> positions(static_cast<size_t>(t_len));
    std::iota(positions.begin(), positions.end(), 0);
    Value pos_rows = tape.gather_rows(bound["embed.position_table"], positions);
    return tape.add(fused, pos_rows);
}

}  // namespace cbert
