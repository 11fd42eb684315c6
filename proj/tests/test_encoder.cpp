// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "cbert/encoder.hpp"

#include "cbert/checkpoint.hpp"
#include "cbert/commands.hpp"
#include "cbert/gradcheck.hpp"
#include "cbert/rng.hpp"
#include "cbert/train.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cbert;
using cbert_test::near;
using cbert_test::temp_path;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.max_len = 8;
    cfg.vocab_size = 12;
    cfg.pinyin_embed_width = 4;
    cfg.dropout = 0.0;
    return cfg;
}

Tensor random_matrix(int r, int c, uint64_t key) {
    CounterRng rng(key);
    Tensor t({r, c});
    for (int64_t i = 0; i < t.numel(); ++i) t[static_cast<size_t>(i)] = rng.next_gaussian();
    return t;
}

}  // namespace

TEST_CASE("zero layers: hidden equals the embedded input") {
    ModelConfig cfg = small_config();
    cfg.layers = 0;
    ParamStore params = init_params(cfg, 1);
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Value x = tape.constant(random_matrix(3, cfg.hidden, 42));
    const std::vector<uint8_t> mask(3, 1);
    Value h = encoder_forward(tape, bound, cfg, x, mask, DropoutCtx::off());
    CHECK(h.id == x.id);
}

TEST_CASE("attention over a single token is its value projection") {
    ModelConfig cfg = small_config();
    ParamStore params = init_params(cfg, 2);
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Tensor xt = random_matrix(1, cfg.hidden, 7);
    Value x = tape.constant(xt);
    const std::vector<uint8_t> mask(1, 1);
    const Tensor got =
        tape.value(attention_sublayer(tape, bound, cfg, 0, x, mask, DropoutCtx::off()));

    // softmax over one element is 1, so the context is exactly V(x).
    Tape oracle;
    BoundParams ob = bind_params(oracle, params, false);
    Value ox = oracle.constant(xt);
    Value v = oracle.add_row(oracle.matmul(ox, ob["layer0.attn.value.weight"]),
                             ob["layer0.attn.value.bias"]);
    Value o = oracle.add_row(oracle.matmul(v, ob["layer0.attn.output.weight"]),
                             ob["layer0.attn.output.bias"]);
    const Tensor& want = oracle.value(o);
    for (int64_t i = 0; i < want.numel(); ++i) {
        CHECK(near(got[static_cast<size_t>(i)], want[static_cast<size_t>(i)], 1e-12));
    }
}

TEST_CASE("attention rows over valid positions sum to 1; padded keys get zero weight") {
    ModelConfig cfg = small_config();
    ParamStore params = init_params(cfg, 3);
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    const int t_len = 6;
    Value x = tape.constant(random_matrix(t_len, cfg.hidden, 8));
    std::vector<uint8_t> mask(t_len, 1);
    mask[4] = 0;
    mask[5] = 0;
    AttnProbe probe;
    (void)encoder_forward(tape, bound, cfg, x, mask, DropoutCtx::off(), &probe);
    REQUIRE(probe.probs.size() == static_cast<size_t>(cfg.layers * cfg.heads));
    for (const Tensor& p : probe.probs) {
        for (int r = 0; r < t_len; ++r) {
            double sum = 0.0;
            for (int c = 0; c < t_len; ++c) {
                if (mask[static_cast<size_t>(c)] == 0) {
                    CHECK(p.at(r, c) == 0.0);
                } else {
                    sum += p.at(r, c);
                }
            }
            CHECK(near(sum, 1.0, 1e-9));
        }
    }
}

TEST_CASE("with zero position table, permuting inputs permutes outputs") {
    ModelConfig cfg = small_config();
    cfg.layers = 2;
    ParamStore params = init_params(cfg, 4);
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    const int t_len = 5;
    Tensor xt = random_matrix(t_len, cfg.hidden, 9);
    const std::vector<uint8_t> mask(t_len, 1);
    const Tensor h1 = tape.value(
        encoder_forward(tape, bound, cfg, tape.constant(xt), mask, DropoutCtx::off()));

    const std::vector<int> perm{3, 0, 4, 2, 1};
    Tensor permuted({t_len, cfg.hidden});
    for (int r = 0; r < t_len; ++r) {
        for (int c = 0; c < cfg.hidden; ++c) permuted.at(r, c) = xt.at(perm[static_cast<size_t>(r)], c);
    }
    Tape tape2;
    BoundParams bound2 = bind_params(tape2, params, false);
    const Tensor h2 = tape2.value(
        encoder_forward(tape2, bound2, cfg, tape2.constant(permuted), mask, DropoutCtx::off()));
    for (int r = 0; r < t_len; ++r) {
        for (int c = 0; c < cfg.hidden; ++c) {
            CHECK(near(h2.at(r, c), h1.at(perm[static_cast<size_t>(r)], c), 1e-9));
        }
    }
}

TEST_CASE("classify head: zero params give zero logits of shape (num_classes,)") {
    ModelConfig cfg = small_config();
    ParamStore params = init_params(cfg, 5);
    add_head_params(params, cfg, HeadKind::Classify, 3, 5);
    params.at("head.classify.weight") = Tensor({cfg.hidden, 3});
    params.at("head.classify.bias") = Tensor({3});
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Value hidden = tape.constant(random_matrix(4, cfg.hidden, 10));
    const Tensor& logits = tape.value(classify_logits(tape, bound, hidden));
    CHECK(logits.shape() == std::vector<int>{3});
    for (int64_t i = 0; i < logits.numel(); ++i) CHECK(logits[static_cast<size_t>(i)] == 0.0);
}

TEST_CASE("tag head: zero params argmax ties break to label 0") {
    ModelConfig cfg = small_config();
    ParamStore params = init_params(cfg, 6);
    add_head_params(params, cfg, HeadKind::Tag, 4, 6);
    params.at("head.tag.weight") = Tensor({cfg.hidden, 4});
    params.at("head.tag.bias") = Tensor({4});
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Value hidden = tape.constant(random_matrix(5, cfg.hidden, 11));
    const Tensor& logits = tape.value(tag_logits(tape, bound, hidden));
    CHECK(logits.shape() == std::vector<int>{5, 4});
    const std::vector<int> pred = argmax_rows(logits);
    for (int p : pred) CHECK(p == 0);
}

TEST_CASE("learning-rate schedule: warmup peak and decay points") {
    TrainConfig cfg;
    cfg.max_lr = 1e-4;
    cfg.warmup_steps = 20000;
    cfg.total_steps = 500000;
    CHECK(near(lr_at(cfg, 20000), 1e-4, 1e-18));        // peak exactly at warmup
    CHECK(near(lr_at(cfg, 10000), 5e-5, 1e-18));        // linear warmup midpoint
    CHECK(near(lr_at(cfg, 500000), 0.0, 1e-18));        // decayed to zero at the end
    const double mid = lr_at(cfg, 260000);              // halfway through decay
    CHECK(near(mid, 1e-4 * 0.5, 1e-9));
    CHECK(lr_at(cfg, 1) > 0.0);

    TrainConfig no_warm;
    no_warm.max_lr = 1.0;
    no_warm.warmup_steps = 0;
    no_warm.total_steps = 10;
    CHECK(near(lr_at(no_warm, 1), 0.9, 1e-12));
}

TEST_CASE("checkpoint round-trip reproduces tensors at f32 precision") {
    ModelConfig cfg = small_config();
    ParamStore params = init_params(cfg, 7);
    CheckpointMeta meta;
    meta.config = cfg;
    meta.vocab_chars = "\u4e00\u4e01\u4e02\u4e03\u4e04\u4e05\u4e06";
    const std::string path = temp_path("roundtrip.ckpt");
    save_checkpoint(params, meta_to_text(meta), path);
    Checkpoint loaded = load_checkpoint(path);
    REQUIRE(loaded.params.size() == params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        CHECK(loaded.params.name(i) == params.name(i));
        const Tensor& a = params.tensor(i);
        const Tensor& b = loaded.params.tensor(i);
        REQUIRE(a.same_shape(b));
        for (int64_t j = 0; j < a.numel(); ++j) {
            const float quantized = static_cast<float>(a[static_cast<size_t>(j)]);
            CHECK(b[static_cast<size_t>(j)] == static_cast<double>(quantized));
        }
    }
    // write -> read -> write is byte-identical
    const std::string bytes1 = checkpoint_to_bytes(params, meta_to_text(meta));
    Checkpoint again = checkpoint_from_bytes(bytes1);
    // Quantization already happened on the first write, so re-serializing
    // the loaded parameters reproduces the file exactly.
    CHECK(checkpoint_to_bytes(again.params, again.config_text) == bytes1);
}

TEST_CASE("checkpoint meta text round-trips exactly") {
    CheckpointMeta meta;
    meta.config = small_config();
    meta.vocab_chars = "水火山";
    meta.task = "tag";
    meta.labels = {"B", "E", "M", "S"};
    meta.run_echo = {{"corpus", "data/corpus.txt"}, {"seed", "1"}};
    const std::string text = meta_to_text(meta);
    const CheckpointMeta parsed = meta_from_text(text);
    CHECK(meta_to_text(parsed) == text);
    CHECK(parsed.labels == meta.labels);
    CHECK(parsed.config.hidden == meta.config.hidden);
}

TEST_CASE("loading a checkpoint with mismatched shapes names the first bad tensor") {
    ModelConfig cfg = small_config();
    ParamStore params = init_params(cfg, 8);
    CheckpointMeta meta;
    meta.config = cfg;
    meta.config.hidden = 16;  // lie about D: every weight is now the wrong shape
    meta.config.heads = 2;
    meta.vocab_chars = "\u4e00\u4e01\u4e02\u4e03\u4e04\u4e05\u4e06";
    const std::string path = temp_path("mismatch.ckpt");
    save_checkpoint(params, meta_to_text(meta), path);
    try {
        (void)load_model(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("embed.char_table") != std::string::npos);
    }
}

TEST_CASE("corrupt magic and truncation are named with offsets") {
    ModelConfig cfg = small_config();
    ParamStore params = init_params(cfg, 9);
    std::string bytes = checkpoint_to_bytes(params, "vocab_size=12\n");
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(checkpoint_from_bytes(bad), doctest::Contains("offset 0"), FormatError);
    std::string cut = bytes.substr(0, bytes.size() - 3);
    CHECK_THROWS_AS(checkpoint_from_bytes(cut), FormatError);
}

TEST_CASE("ablated checkpoints drop glyph/pinyin tensors and shrink") {
    ModelConfig full = small_config();
    ParamStore full_params = init_params(full, 10);

    ModelConfig no_glyph = full;
    no_glyph.use_glyph = false;
    ParamStore ng_params = init_params(no_glyph, 10);
    CHECK_FALSE(ng_params.has("embed.glyph.weight"));
    CHECK(ng_params.has("embed.pinyin.filters"));
    CHECK(ng_params.total_params() < full_params.total_params());

    // The fusion weight narrows from 3D to 2D rows.
    CHECK(full_params.at("embed.fusion.weight").rows() == 3 * full.hidden);
    CHECK(ng_params.at("embed.fusion.weight").rows() == 2 * full.hidden);

    ModelConfig bare = full;
    bare.use_glyph = false;
    bare.use_pinyin = false;
    ParamStore bare_params = init_params(bare, 10);
    CHECK_FALSE(bare_params.has("embed.fusion.weight"));
    CHECK(bare_params.total_params() < ng_params.total_params());
}

TEST_CASE("degenerate model parameter count equals the closed-form char-only count") {
    ModelConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.max_len = 48;
    cfg.vocab_size = 50;
    cfg.use_glyph = false;
    cfg.use_pinyin = false;
    ParamStore params = init_params(cfg, 11);

    const int64_t d = cfg.hidden, v = cfg.vocab_size, l = cfg.layers, f = cfg.ff_width();
    const int64_t embedding = v * d + cfg.max_len * d;
    const int64_t per_layer = 4 * d * d + 3 * d  // q,k,v,o weights; q,v,o biases
                              + 2 * (2 * d)      // two layer norms
                              + d * f + f        // ff in
                              + f * d + d;       // ff out
    const int64_t mlm = d * d + d + 2 * d + d * v + v;
    CHECK(params.total_params() == embedding + l * per_layer + mlm);
}

TEST_CASE("deterministic init: same seed, same tensors; different seed differs") {
    ModelConfig cfg = small_config();
    ParamStore a = init_params(cfg, 21);
    ParamStore b = init_params(cfg, 21);
    ParamStore c = init_params(cfg, 22);
    REQUIRE(a.size() == b.size());
    bool all_equal = true;
    bool any_diff_c = false;
    for (size_t i = 0; i < a.size(); ++i) {
        for (int64_t j = 0; j < a.tensor(i).numel(); ++j) {
            if (a.tensor(i)[static_cast<size_t>(j)] != b.tensor(i)[static_cast<size_t>(j)]) all_equal = false;
            if (a.tensor(i)[static_cast<size_t>(j)] != c.tensor(i)[static_cast<size_t>(j)]) any_diff_c = true;
        }
    }
    CHECK(all_equal);
    CHECK(any_diff_c);
}

TEST_CASE("deterministic dropout: same key and sites reproduce the mask") {
    ModelConfig cfg = small_config();
    cfg.dropout = 0.5;
    ParamStore params = init_params(cfg, 12);
    const Tensor xt = random_matrix(4, cfg.hidden, 13);
    const std::vector<uint8_t> mask(4, 1);
    const auto run = [&](uint64_t step) {
        Tape tape;
        BoundParams bound = bind_params(tape, params, false);
        const DropoutCtx drop = DropoutCtx::train(cfg.dropout, /*seed=*/5, step);
        return tape.value(
            encoder_forward(tape, bound, cfg, tape.constant(xt), mask, drop));
    };
    const Tensor a = run(3);
    const Tensor b = run(3);
    const Tensor c = run(4);
    bool same = true, diff = false;
    for (int64_t i = 0; i < a.numel(); ++i) {
        if (a[static_cast<size_t>(i)] != b[static_cast<size_t>(i)]) same = false;
        if (a[static_cast<size_t>(i)] != c[static_cast<size_t>(i)]) diff = true;
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("end-to-end gradient check through embedding, encoder and MLM loss") {
    // Small full model over the synthetic gradcheck fixture; sampled
    // components per tensor keep this fast while the acceptance suite
    // sweeps every component.
    GradCheckFixture fx = make_gradcheck_fixture(3);
    ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.max_len = 8;
    cfg.vocab_size = fx.vocab.size();
    cfg.pinyin_embed_width = 4;
    cfg.dropout = 0.0;
    ParamStore params = init_params_spread(cfg, 3);
    const ModelContext ctx{&cfg, &fx.vocab, &fx.atlas, &fx.pinyin};
    GradCheckOptions opts;
    opts.max_components_per_tensor = 25;
    opts.sample_seed = 17;
    const GradCheckReport report = grad_check(
        params,
        [&](Tape& tape, const BoundParams& bound) {
            return mlm_batch_loss(tape, bound, ctx, fx.batch, DropoutCtx::off());
        },
        opts);
    INFO("worst: ", report.worst_param, " err=", report.max_rel_err);
    CHECK(report.max_rel_err < 1e-4);
}
