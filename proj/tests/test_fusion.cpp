// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "cbert/fusion.hpp"

#include "cbert/gradcheck.hpp"
#include "cbert/rng.hpp"
#include "cbert/train.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cbert;
using cbert_test::near;

namespace {

// Five CJK characters starting at U+4E00; ids 5..9.
Vocab tiny_vocab() {
    return Vocab::from_codepoints({0x4E00, 0x4E01, 0x4E02, 0x4E03, 0x4E50});
}

PinyinLexicon tiny_lexicon() {
    PinyinLexicon lex;
    lex.add_default(0x4E00, "yi1");
    lex.add_default(0x4E01, "ding1");
    lex.add_default(0x4E02, "kao3");
    lex.add_default(0x4E03, "qi1");
    lex.add_default(0x4E50, "le4");
    lex.add_rule("丁乐", 1, 0x4E50, "yue4");
    return lex;
}

GlyphAtlas tiny_atlas() {
    GlyphAtlas atlas;
    for (uint32_t cp : {0x4E00u, 0x4E01u, 0x4E02u, 0x4E03u, 0x4E50u}) {
        atlas.put(cp, synth_glyph(cp));
    }
    return atlas;
}

ModelConfig tiny_config(bool glyph, bool pinyin) {
    ModelConfig cfg;
    cfg.layers = 0;
    cfg.hidden = 4;
    cfg.heads = 2;
    cfg.max_len = 8;
    cfg.vocab_size = tiny_vocab().size();
    cfg.pinyin_embed_width = 3;
    cfg.dropout = 0.0;
    cfg.use_glyph = glyph;
    cfg.use_pinyin = pinyin;
    return cfg;
}

Tensor randomized(std::vector<int> shape, uint64_t key) {
    CounterRng rng(key);
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[static_cast<size_t>(i)] = rng.next_gaussian();
    return t;
}

}  // namespace

TEST_CASE("fuse maps zero inputs to the fusion bias") {
    const ModelConfig cfg = tiny_config(true, true);
    ParamStore params = init_params(cfg, 1);
    params.at("embed.fusion.bias") = Tensor({cfg.hidden}, {1.5, -2.0, 0.0, 3.25});
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Value zero = tape.constant(Tensor({cfg.hidden}));
    const Tensor& out = tape.value(fuse(tape, bound, cfg, zero, zero, zero));
    CHECK(out[0] == 1.5);
    CHECK(out[1] == -2.0);
    CHECK(out[2] == 0.0);
    CHECK(out[3] == 3.25);
}

TEST_CASE("fuse with both sources disabled returns char_vec unchanged") {
    const ModelConfig cfg = tiny_config(false, false);
    ParamStore params = init_params(cfg, 1);
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Value cv = tape.constant(Tensor({cfg.hidden}, {3, 4, -1, 2}));
    Value out = fuse(tape, bound, cfg, cv, Value{}, Value{});
    CHECK(out.id == cv.id);  // the very same node: bit-exact by construction
}

TEST_CASE("fuse with identity weight on the char slot reproduces char_vec") {
    ModelConfig cfg = tiny_config(true, true);
    cfg.hidden = 2;
    cfg.heads = 1;
    ParamStore params = init_params(cfg, 1);
    Tensor w({3 * cfg.hidden, cfg.hidden});  // rows 0-1 = identity, rest zero
    w.at(0, 0) = 1.0;
    w.at(1, 1) = 1.0;
    params.at("embed.fusion.weight") = w;
    params.at("embed.fusion.bias") = Tensor({cfg.hidden});
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Value cv = tape.constant(Tensor({cfg.hidden}, {3, 4}));
    Value gv = tape.constant(Tensor({cfg.hidden}, {9, -9}));
    Value pv = tape.constant(Tensor({cfg.hidden}, {7, 7}));
    const Tensor& out = tape.value(fuse(tape, bound, cfg, cv, gv, pv));
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 4.0);
}

TEST_CASE("fuse rejects vectors of the wrong width") {
    const ModelConfig cfg = tiny_config(true, true);
    ParamStore params = init_params(cfg, 1);
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Value bad = tape.constant(Tensor({cfg.hidden + 1}));
    Value good = tape.constant(Tensor({cfg.hidden}));
    CHECK_THROWS_AS(fuse(tape, bound, cfg, bad, good, good), ShapeError);
}

TEST_CASE("embed_sequence with all-zero parameters gives zero rows") {
    const ModelConfig cfg = tiny_config(true, true);
    ParamStore store;
    for (const auto& [name, shape] : param_shapes(cfg)) store.add(name, Tensor(shape));
    const Vocab vocab = tiny_vocab();
    const PinyinLexicon lex = tiny_lexicon();
    const GlyphAtlas atlas = tiny_atlas();
    Tape tape;
    BoundParams bound = bind_params(tape, store, false);
    const std::vector<int> ids{5};
    const EmbeddingInputs inputs = derive_embedding_inputs(ids, vocab, lex);
    const Tensor& out = tape.value(embed_sequence(tape, bound, cfg, atlas, inputs));
    CHECK(out.shape() == std::vector<int>{1, cfg.hidden});
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out[static_cast<size_t>(i)] == 0.0);
}

TEST_CASE("special tokens go through the blank-glyph all-pad-pinyin path") {
    const ModelConfig cfg = tiny_config(true, true);
    ParamStore params = init_params(cfg, 3);
    const Vocab vocab = tiny_vocab();
    const PinyinLexicon lex = tiny_lexicon();
    const GlyphAtlas atlas = tiny_atlas();

    const std::vector<int> ids{Vocab::kCls};
    const EmbeddingInputs inputs = derive_embedding_inputs(ids, vocab, lex);
    CHECK(inputs.codepoints[0] == 0);
    CHECK(inputs.pinyin[0] == PinyinSequence::all_pad());

    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    const Tensor& got = tape.value(embed_sequence(tape, bound, cfg, atlas, inputs));

    // Compose the per-module oracles by hand: fuse(char_row, glyph_embed of
    // the blank image, pinyin_embed of the all-pad sequence) + position 0.
    Tape oracle;
    BoundParams ob = bind_params(oracle, params, false);
    const std::vector<int> cls_row{Vocab::kCls};
    Value cv = oracle.reshape(oracle.gather_rows(ob["embed.char_table"], cls_row),
                              {cfg.hidden});
    Value gv = glyph_embed(oracle, ob["embed.glyph.weight"], ob["embed.glyph.bias"],
                           GlyphAtlas::blank());
    Value pv = pinyin_embed(oracle, ob["embed.pinyin.symbol_table"],
                            ob["embed.pinyin.filters"], ob["embed.pinyin.bias"],
                            PinyinSequence::all_pad());
    Value fused = fuse(oracle, ob, cfg, cv, gv, pv);
    const std::vector<int> pos0{0};
    Value want = oracle.add(fused, oracle.reshape(
                                       oracle.gather_rows(ob["embed.position_table"], pos0),
                                       {cfg.hidden}));
    const Tensor& w = oracle.value(want);
    for (int j = 0; j < cfg.hidden; ++j) {
        CHECK(near(got[static_cast<size_t>(j)], w[static_cast<size_t>(j)], 1e-12));
    }
}

TEST_CASE("position rows are purely additive: swapping positions swaps the position term") {
    const ModelConfig cfg = tiny_config(true, true);
    ParamStore params = init_params(cfg, 4);
    const Vocab vocab = tiny_vocab();
    const PinyinLexicon lex = tiny_lexicon();
    const GlyphAtlas atlas = tiny_atlas();

    const std::vector<int> ids{5, 6};
    const EmbeddingInputs inputs = derive_embedding_inputs(ids, vocab, lex);
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    const Tensor out = tape.value(embed_sequence(tape, bound, cfg, atlas, inputs));

    // Same tokens with position rows swapped by editing the table.
    ParamStore swapped = init_params(cfg, 4);
    Tensor& pt = swapped.at("embed.position_table");
    for (int j = 0; j < cfg.hidden; ++j) std::swap(pt.at(0, j), pt.at(1, j));
    Tape tape2;
    BoundParams bound2 = bind_params(tape2, swapped, false);
    const Tensor out2 = tape2.value(embed_sequence(tape2, bound2, cfg, atlas, inputs));

    const Tensor& orig_pt = params.at("embed.position_table");
    for (int t = 0; t < 2; ++t) {
        for (int j = 0; j < cfg.hidden; ++j) {
            const double delta = out2.at(t, j) - out.at(t, j);
            const double want = orig_pt.at(1 - t, j) - orig_pt.at(t, j);
            CHECK(near(delta, want, 1e-12));
        }
    }
}

TEST_CASE("embed_sequence enforces max_len and vocab bounds") {
    const ModelConfig cfg = tiny_config(true, true);
    ParamStore params = init_params(cfg, 5);
    const Vocab vocab = tiny_vocab();
    const PinyinLexicon lex = tiny_lexicon();
    const GlyphAtlas atlas = tiny_atlas();
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);

    std::vector<int> too_long(static_cast<size_t>(cfg.max_len + 1), 5);
    CHECK_THROWS_WITH_AS(
        embed_sequence(tape, bound, cfg, atlas,
                       derive_embedding_inputs(too_long, vocab, lex)),
        doctest::Contains("max_len"), Error);

    // Vocab bound is checked before codepoint derivation can fail.
    EmbeddingInputs bad;
    bad.ids = {cfg.vocab_size};
    bad.codepoints = {0};
    bad.pinyin = {PinyinSequence::all_pad()};
    CHECK_THROWS_WITH_AS(embed_sequence(tape, bound, cfg, atlas, bad),
                         doctest::Contains("vocab"), Error);
}

TEST_CASE("output shape is T x D across configurations and D choices") {
    for (const int d : {8, 16, 32}) {
        for (const bool glyph : {false, true}) {
            for (const bool pinyin : {false, true}) {
                ModelConfig cfg = tiny_config(glyph, pinyin);
                cfg.hidden = d;
                cfg.heads = 2;
                ParamStore params = init_params(cfg, 6);
                const Vocab vocab = tiny_vocab();
                const PinyinLexicon lex = tiny_lexicon();
                const GlyphAtlas atlas = tiny_atlas();
                const std::vector<int> ids{Vocab::kCls, 5, 7, Vocab::kSep};
                Tape tape;
                BoundParams bound = bind_params(tape, params, false);
                const Tensor& out = tape.value(embed_sequence(
                    tape, bound, cfg, atlas, derive_embedding_inputs(ids, vocab, lex)));
                CHECK(out.shape() == std::vector<int>{4, d});
            }
        }
    }
}

TEST_CASE("gradients reach char/glyph/pinyin/fusion parameters; ablation removes them") {
    const Vocab vocab = tiny_vocab();
    const PinyinLexicon lex = tiny_lexicon();
    const GlyphAtlas atlas = tiny_atlas();

    MaskedBatch batch;
    batch.input_ids = {Vocab::kCls, Vocab::kMask, 6, Vocab::kSep};
    batch.labels = {kIgnoreId, 5, kIgnoreId, kIgnoreId};
    batch.attention_mask.assign(4, 1);

    const auto grads_for = [&](const ModelConfig& cfg) {
        ParamStore params = init_params(cfg, 7);
        const ModelContext ctx{&cfg, &vocab, &atlas, &lex};
        Tape tape;
        BoundParams bound = bind_params(tape, params);
        const std::vector<MaskedBatch> b{batch};
        Value loss = mlm_batch_loss(tape, bound, ctx, b, DropoutCtx::off());
        tape.backward(loss);
        std::vector<std::pair<std::string, bool>> nonzero;
        for (size_t i = 0; i < params.size(); ++i) {
            const Tensor g = tape.grad_or_zeros(bound.values[i]);
            bool any = false;
            for (int64_t j = 0; j < g.numel(); ++j) {
                if (g[static_cast<size_t>(j)] != 0.0) any = true;
            }
            nonzero.emplace_back(params.name(i), any);
        }
        return nonzero;
    };

    ModelConfig full = tiny_config(true, true);
    full.layers = 1;
    const auto full_grads = grads_for(full);
    for (const auto& [name, any] : full_grads) {
        if (name == "embed.char_table" || name == "embed.glyph.weight" ||
            name == "embed.pinyin.filters" || name == "embed.fusion.weight") {
            INFO("param: ", name);
            CHECK(any);
        }
    }

    ModelConfig ablated = tiny_config(false, false);
    ablated.layers = 1;
    ParamStore ap = init_params(ablated, 7);
    CHECK_FALSE(ap.has("embed.glyph.weight"));
    CHECK_FALSE(ap.has("embed.pinyin.filters"));
    CHECK_FALSE(ap.has("embed.fusion.weight"));
    const auto ablated_grads = grads_for(ablated);
    for (const auto& [name, any] : ablated_grads) {
        if (name == "embed.char_table") CHECK(any);
    }
}

TEST_CASE("degenerate configuration is bit-identical to a plain char-only construction") {
    ModelConfig cfg = tiny_config(false, false);
    cfg.layers = 2;
    ParamStore params = init_params(cfg, 8);
    const Vocab vocab = tiny_vocab();
    const PinyinLexicon lex = tiny_lexicon();
    const GlyphAtlas atlas = tiny_atlas();
    const std::vector<int> ids{Vocab::kCls, 5, 8, 9, Vocab::kSep};
    const std::vector<uint8_t> mask(ids.size(), 1);

    // Production path.
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Value emb = embed_sequence(tape, bound, cfg, atlas, derive_embedding_inputs(ids, vocab, lex));
    const Tensor hidden =
        tape.value(encoder_forward(tape, bound, cfg, emb, mask, DropoutCtx::off()));

    // Char-only construction that never touches glyph/pinyin/fusion code.
    Tape plain;
    BoundParams pb = bind_params(plain, params, false);
    std::vector<int> positions(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
    Value rows = plain.gather_rows(pb["embed.char_table"], ids);
    Value pos = plain.gather_rows(pb["embed.position_table"], positions);
    Value emb2 = plain.add(rows, pos);
    const Tensor hidden2 =
        plain.value(encoder_forward(plain, pb, cfg, emb2, mask, DropoutCtx::off()));

    REQUIRE(hidden.numel() == hidden2.numel());
    for (int64_t i = 0; i < hidden.numel(); ++i) {
        CHECK(hidden[static_cast<size_t>(i)] == hidden2[static_cast<size_t>(i)]);
    }
}

TEST_CASE("heteronym contexts produce different fusion rows at the same position") {
    ModelConfig cfg = tiny_config(false, true);  // pinyin is the only varying source
    ParamStore params = init_params(cfg, 9);
    const Vocab vocab = tiny_vocab();
    const PinyinLexicon lex = tiny_lexicon();
    const GlyphAtlas atlas = tiny_atlas();

    // 乐 sits at index 1 in both contexts; only its reading differs
    // (rule context "丁乐" forces yue4, default is le4).
    const std::vector<int> music{vocab.id_of(0x4E01), vocab.id_of(0x4E50)};
    const std::vector<int> happy{vocab.id_of(0x4E02), vocab.id_of(0x4E50)};
    const EmbeddingInputs in1 = derive_embedding_inputs(music, vocab, lex);
    const EmbeddingInputs in2 = derive_embedding_inputs(happy, vocab, lex);
    CHECK(in1.pinyin[1].str() == "yue4----");
    CHECK(in2.pinyin[1].str() == "le4-----");

    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    const Tensor e1 = tape.value(embed_sequence(tape, bound, cfg, atlas, in1));
    const Tensor e2 = tape.value(embed_sequence(tape, bound, cfg, atlas, in2));
    bool differ = false;
    for (int j = 0; j < cfg.hidden; ++j) {
        if (e1.at(1, j) != e2.at(1, j)) differ = true;
    }
    CHECK(differ);
}
