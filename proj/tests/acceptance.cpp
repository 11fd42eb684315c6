// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: every criterion below runs end to end against the
// bundled data and the cbert CLI binary, printing one PASS/FAIL line each.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cbert/checkpoint.hpp"
#include "cbert/commands.hpp"
#include "cbert/gradcheck.hpp"
#include "cbert/io.hpp"
#include "cbert/train.hpp"

using namespace cbert;

namespace {

namespace fs = std::filesystem;

std::string g_work_dir;

std::string data_path(const std::string& name) {
    return (fs::path(CBERT_DATA_DIR) / name).string();
}

std::string work_path(const std::string& name) {
    return (fs::path(g_work_dir) / name).string();
}

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const std::string out_file = work_path("cli_capture.txt");
    const std::string cmd = std::string(CBERT_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = read_file(out_file);
    return r;
}

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) std::cout << " -- " << detail;
    std::cout << std::endl;
    if (!pass) ++g_failures;
}

void run_criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        const auto [pass, detail] = fn();
        report(name, pass, detail);
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) { return format_double(v); }

std::string pretrain_args(const std::string& ckpt, const std::string& log) {
    return "--set corpus=" + data_path("corpus.txt") +
           " --set word_lexicon=" + data_path("word_lexicon.txt") +
           " --set pinyin_lexicon=" + data_path("pinyin_lexicon.txt") +
           " --set atlas=" + work_path("accept.atlas") + " --set checkpoint=" + ckpt +
           " --set log=" + log;
}

std::vector<double> losses_from_log(const std::string& log_text) {
    std::vector<double> losses;
    for (const std::string& line : split(log_text, '\n')) {
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, '\t');
        if (fields.size() == 3) losses.push_back(std::stod(fields[2]));
    }
    return losses;
}

// ---------------------------------------------------------------- criteria

std::pair<bool, std::string> gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    const CliResult r = run_cli("gradcheck --seed 1");  // toy preset: L=2 D=16 H=2 E_p=8, V=50
    const double secs = seconds_since(t0);
    const bool pass = r.exit_code == 0 && r.output.find("PASS") != std::string::npos &&
                      secs < 300.0;
    std::string max_err = "?";
    for (const std::string& line : split(r.output, '\n')) {
        if (line.rfind("PASS\tmax_rel_err\t", 0) == 0) max_err = split(line, '\t')[2];
    }
    return {pass, "max_rel_err=" + max_err + ", " + fmt(secs) + "s (< 300s), exit=" +
                      std::to_string(r.exit_code)};
}

std::pair<bool, std::string> structural_fidelity() {
    bool ok = true;
    std::string detail;
    if (kGlyphFlatWidth != 2352) ok = false;
    detail += "glyph_width=" + std::to_string(kGlyphFlatWidth);
    const Tensor flat = flatten_normalize(synth_glyph(0x732B));
    if (flat.shape() != std::vector<int>{2352}) ok = false;

    // Pinyin sequences: exactly 8 symbols, tone appended after the letters.
    for (const char* reading : {"mao1", "zhuang4", "lv3", "a5"}) {
        const PinyinSequence seq = PinyinSequence::from_reading(std::string(reading));
        std::string s = seq.str();
        if (s.size() != 8) ok = false;
        const size_t letters = std::string(reading).size() - 1;
        if (s[letters] != std::string(reading).back()) ok = false;   // tone right after letters
        for (size_t i = letters + 1; i < 8; ++i) {
            if (s[i] != '-') ok = false;
        }
    }
    detail += ", pinyin_len=8";

    // Fusion layer widths over randomized configs.
    for (const int d : {8, 16, 32}) {
        ModelConfig cfg;
        cfg.layers = 1;
        cfg.hidden = d;
        cfg.heads = 2;
        cfg.max_len = 8;
        cfg.vocab_size = 10;
        cfg.pinyin_embed_width = 4;
        cfg.dropout = 0.0;
        ParamStore params = init_params_spread(cfg, static_cast<uint64_t>(d));
        const Tensor& w = params.at("embed.fusion.weight");
        if (w.shape() != std::vector<int>{3 * d, d}) ok = false;
        Tape tape;
        BoundParams bound = bind_params(tape, params, false);
        CounterRng rng(static_cast<uint64_t>(d) + 99);
        Tensor cv({d}), gv({d}), pv({d});
        for (int j = 0; j < d; ++j) {
            cv[static_cast<size_t>(j)] = rng.next_gaussian();
            gv[static_cast<size_t>(j)] = rng.next_gaussian();
            pv[static_cast<size_t>(j)] = rng.next_gaussian();
        }
        const Tensor& out = tape.value(fuse(tape, bound, cfg, tape.constant(cv),
                                            tape.constant(gv), tape.constant(pv)));
        if (out.shape() != std::vector<int>{d}) ok = false;
    }
    detail += ", fusion 3D->D for D in {8,16,32}";
    return {ok, detail};
}

std::pair<bool, std::string> masking_statistics() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string corpus_text = read_file(data_path("corpus.txt"));
    const Vocab vocab = Vocab::from_corpus_text(corpus_text);
    const WordLexicon words = WordLexicon::load(data_path("word_lexicon.txt"));
    std::vector<SegmentedSentence> sentences;
    for (const auto& line : corpus_lines(corpus_text)) {
        sentences.push_back(segment(line, words, vocab));
    }
    MaskingPolicy policy;
    policy.max_len = 48;

    BuildStats build_stats;
    std::vector<TrainingExample> examples;
    for (uint64_t s = 0; s < 300; ++s) {  // seed sweep
        CounterRng rng = CounterRng::derive({0xACCE, s});
        auto built = build_examples(sentences, policy, rng, &build_stats);
        if (s == 0) examples = std::move(built);
    }
    const int64_t draws = build_stats.packed_draws + build_stats.single_draws;
    const double packed_frac = static_cast<double>(build_stats.packed_draws) / draws;

    int64_t units = 0, selected = 0, bm = 0, br = 0, bk = 0, wwm = 0, batches = 0;
    uint64_t epoch = 0;
    while (units < 100000) {
        EpochStream stream(&examples, &policy, &vocab, 0xACCE17, epoch++);
        for (size_t i = 0; i < stream.size(); ++i) {
            const MaskedBatch b = stream.batch_at(i);
            units += b.stats.units_total;
            selected += b.stats.units_selected;
            bm += b.stats.branch_mask;
            br += b.stats.branch_random;
            bk += b.stats.branch_keep;
            wwm += b.stats.used_wwm ? 1 : 0;
            ++batches;
        }
    }
    const double sel = static_cast<double>(selected) / units;
    const double fm = static_cast<double>(bm) / selected;
    const double fr = static_cast<double>(br) / selected;
    const double fk = static_cast<double>(bk) / selected;
    const double fw = static_cast<double>(wwm) / batches;
    const double secs = seconds_since(t0);

    const bool ok = std::abs(sel - 0.15) <= 0.005 && std::abs(fm - 0.80) <= 0.01 &&
                    std::abs(fr - 0.10) <= 0.01 && std::abs(fk - 0.10) <= 0.01 &&
                    std::abs(fw - 0.90) <= 0.01 && std::abs(packed_frac - 0.90) <= 0.01 &&
                    units >= 100000 && secs < 60.0;
    return {ok, "units=" + std::to_string(units) + " select=" + fmt(sel) + " branches=" +
                    fmt(fm) + "/" + fmt(fr) + "/" + fmt(fk) + " wwm=" + fmt(fw) +
                    " packed=" + fmt(packed_frac) + " draws=" + std::to_string(draws) + " " +
                    fmt(secs) + "s (< 60s)"};
}

std::pair<bool, std::string> wwm_span_integrity() {
    const std::string corpus_text = read_file(data_path("corpus.txt"));
    const Vocab vocab = Vocab::from_corpus_text(corpus_text);
    const WordLexicon words = WordLexicon::load(data_path("word_lexicon.txt"));
    std::vector<SegmentedSentence> sentences;
    for (const auto& line : corpus_lines(corpus_text)) {
        sentences.push_back(segment(line, words, vocab));
    }
    MaskingPolicy policy;
    policy.max_len = 48;
    policy.wwm_prob = 1.0;  // every batch uses the WWM strategy
    CounterRng rng(0x57574D);
    const auto examples = build_examples(sentences, policy, rng);

    int64_t wwm_batches = 0, violations = 0;
    uint64_t epoch = 0;
    while (wwm_batches < 10000) {
        EpochStream stream(&examples, &policy, &vocab, 0x57574D, epoch++);
        for (size_t i = 0; i < stream.size() && wwm_batches < 10000; ++i) {
            const MaskedBatch b = stream.batch_at(i);
            if (!b.stats.used_wwm) continue;
            ++wwm_batches;
            const TrainingExample& ex = examples[i];
            for (const Span& w : ex.word_spans) {
                bool any = false, all = true;
                for (int t = w.begin; t < w.end; ++t) {
                    const bool sel = b.labels[static_cast<size_t>(t)] != kIgnoreId;
                    any = any || sel;
                    all = all && sel;
                }
                if (any != all) ++violations;
            }
            // Specials must never be selected.
            if (b.labels.front() != kIgnoreId || b.labels.back() != kIgnoreId) ++violations;
        }
    }
    return {violations == 0, "wwm_batches=" + std::to_string(wwm_batches) +
                                 " violations=" + std::to_string(violations)};
}

std::pair<bool, std::string> trainability() {
    const auto t0 = std::chrono::steady_clock::now();
    // 500-step run for the loss-halving check.
    const std::string ckpt500 = work_path("train500.ckpt");
    const std::string log500 = work_path("train500.log");
    const CliResult r500 = run_cli("pretrain --seed 1 " + pretrain_args(ckpt500, log500) +
                                   " --set total_steps=500");
    if (r500.exit_code != 0) return {false, "500-step pretrain exit=" + std::to_string(r500.exit_code)};
    const auto losses = losses_from_log(read_file(log500));
    if (losses.size() != 500) return {false, "expected 500 loss rows"};
    const double first10 = std::accumulate(losses.begin(), losses.begin() + 10, 0.0) / 10.0;
    const double last50 = std::accumulate(losses.end() - 50, losses.end(), 0.0) / 50.0;

    // 2000-step run for masked-character recovery.
    const std::string ckpt2k = work_path("train2000.ckpt");
    const std::string log2k = work_path("train2000.log");
    const CliResult r2k = run_cli("pretrain --seed 1 " + pretrain_args(ckpt2k, log2k) +
                                  " --set total_steps=2000 --set warmup_steps=100");
    if (r2k.exit_code != 0) return {false, "2000-step pretrain exit=" + std::to_string(r2k.exit_code)};
    const CliResult ev = run_cli(
        "eval --seed 1 --set init_checkpoint=" + ckpt2k + " --set corpus=" + data_path("corpus.txt") +
        " --set word_lexicon=" + data_path("word_lexicon.txt") +
        " --set pinyin_lexicon=" + data_path("pinyin_lexicon.txt") +
        " --set atlas=" + work_path("accept.atlas"));
    double recovery = -1.0;
    for (const std::string& line : split(ev.output, '\n')) {
        const auto fields = split(line, '\t');
        if (fields.size() == 2 && fields[0] == "recovery_accuracy") recovery = std::stod(fields[1]);
    }
    const double secs = seconds_since(t0);
    const bool ok = last50 <= 0.5 * first10 && recovery >= 0.90 && secs < 900.0;
    return {ok, "first10=" + fmt(first10) + " last50=" + fmt(last50) + " (need <= " +
                    fmt(0.5 * first10) + "), recovery=" + fmt(recovery) + " (need >= 0.9), " +
                    fmt(secs) + "s (< 900s)"};
}

std::pair<bool, std::string> ablation_structure() {
    ModelConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.max_len = 48;
    cfg.vocab_size = 50;
    cfg.pinyin_embed_width = 8;
    cfg.dropout = 0.0;

    ModelConfig bare = cfg;
    bare.use_glyph = false;
    bare.use_pinyin = false;

    // A plain char-only encoder's parameter list, written out directly.
    std::vector<std::pair<std::string, std::vector<int>>> plain;
    const int d = cfg.hidden, v = cfg.vocab_size, f = cfg.ff_width();
    plain.emplace_back("embed.char_table", std::vector<int>{v, d});
    plain.emplace_back("embed.position_table", std::vector<int>{cfg.max_len, d});
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        plain.emplace_back(p + "attn.query.weight", std::vector<int>{d, d});
        plain.emplace_back(p + "attn.query.bias", std::vector<int>{d});
        plain.emplace_back(p + "attn.key.weight", std::vector<int>{d, d});
        plain.emplace_back(p + "attn.value.weight", std::vector<int>{d, d});
        plain.emplace_back(p + "attn.value.bias", std::vector<int>{d});
        plain.emplace_back(p + "attn.output.weight", std::vector<int>{d, d});
        plain.emplace_back(p + "attn.output.bias", std::vector<int>{d});
        plain.emplace_back(p + "attn_norm.gain", std::vector<int>{d});
        plain.emplace_back(p + "attn_norm.bias", std::vector<int>{d});
        plain.emplace_back(p + "ff.in.weight", std::vector<int>{d, f});
        plain.emplace_back(p + "ff.in.bias", std::vector<int>{f});
        plain.emplace_back(p + "ff.out.weight", std::vector<int>{f, d});
        plain.emplace_back(p + "ff.out.bias", std::vector<int>{d});
        plain.emplace_back(p + "ff_norm.gain", std::vector<int>{d});
        plain.emplace_back(p + "ff_norm.bias", std::vector<int>{d});
    }
    plain.emplace_back("mlm.dense.weight", std::vector<int>{d, d});
    plain.emplace_back("mlm.dense.bias", std::vector<int>{d});
    plain.emplace_back("mlm.norm.gain", std::vector<int>{d});
    plain.emplace_back("mlm.norm.bias", std::vector<int>{d});
    plain.emplace_back("mlm.out.weight", std::vector<int>{d, v});
    plain.emplace_back("mlm.out.bias", std::vector<int>{v});

    const auto got = param_shapes(bare);
    bool shapes_equal = got.size() == plain.size();
    if (shapes_equal) {
        for (size_t i = 0; i < got.size(); ++i) {
            if (got[i] != plain[i]) shapes_equal = false;
        }
    }

    // Exact parameter-count ordering: full > single ablations > bare.
    const auto count = [](const ModelConfig& c) {
        int64_t n = 0;
        for (const auto& [name, shape] : param_shapes(c)) n += shape_numel(shape);
        return n;
    };
    ModelConfig no_glyph = cfg;
    no_glyph.use_glyph = false;
    ModelConfig no_pinyin = cfg;
    no_pinyin.use_pinyin = false;
    const int64_t n_full = count(cfg), n_ng = count(no_glyph), n_np = count(no_pinyin),
                  n_bare = count(bare);
    // Expected exact differences from the module shapes.
    const int64_t glyph_block = static_cast<int64_t>(kGlyphFlatWidth) * d + d + static_cast<int64_t>(d) * d;
    const int64_t pinyin_block = static_cast<int64_t>(kPinyinSymbols) * cfg.pinyin_embed_width +
                                 static_cast<int64_t>(d) * (2 * cfg.pinyin_embed_width) + d +
                                 static_cast<int64_t>(d) * d;
    const bool counts_ok = n_full - n_ng == glyph_block && n_full - n_np == pinyin_block &&
                           n_full > n_ng && n_full > n_np && n_ng > n_bare && n_np > n_bare;

    // Bit-exact forward parity with a construction that never calls the
    // glyph/pinyin/fusion code.
    GradCheckFixture fx = make_gradcheck_fixture(2);
    ParamStore params = init_params(bare, 2);
    const std::vector<int> ids = fx.batch[0].input_ids;
    const std::vector<uint8_t> mask(ids.size(), 1);
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    Value emb = embed_sequence(tape, bound, bare, fx.atlas,
                               derive_embedding_inputs(ids, fx.vocab, fx.pinyin));
    const Tensor h1 = tape.value(encoder_forward(tape, bound, bare, emb, mask, DropoutCtx::off()));

    Tape plain_tape;
    BoundParams pb = bind_params(plain_tape, params, false);
    std::vector<int> positions(ids.size());
    std::iota(positions.begin(), positions.end(), 0);
    Value emb2 = plain_tape.add(plain_tape.gather_rows(pb["embed.char_table"], ids),
                                plain_tape.gather_rows(pb["embed.position_table"], positions));
    const Tensor h2 =
        plain_tape.value(encoder_forward(plain_tape, pb, bare, emb2, mask, DropoutCtx::off()));
    bool bit_exact = h1.numel() == h2.numel();
    for (int64_t i = 0; bit_exact && i < h1.numel(); ++i) {
        if (h1[static_cast<size_t>(i)] != h2[static_cast<size_t>(i)]) bit_exact = false;
    }

    const bool ok = shapes_equal && counts_ok && bit_exact;
    return {ok, "shapes_equal=" + std::to_string(shapes_equal) + " counts full/" +
                    std::to_string(n_full) + " -glyph/" + std::to_string(n_ng) + " -pinyin/" +
                    std::to_string(n_np) + " -both/" + std::to_string(n_bare) +
                    " bit_exact=" + std::to_string(bit_exact)};
}

std::pair<bool, std::string> heteronym_mechanism() {
    const PinyinLexicon lex = PinyinLexicon::load(data_path("pinyin_lexicon.txt"));
    const Vocab vocab = Vocab::from_corpus_file(data_path("corpus.txt"));

    const auto music = utf8_decode("音乐");
    const auto happy = utf8_decode("快乐");
    const auto r1 = lex.resolve(music, 1);
    const auto r2 = lex.resolve(happy, 1);
    if (!r1 || !r2) return {false, "readings unresolved"};
    const PinyinSequence s1 = PinyinSequence::from_reading(r1);
    const PinyinSequence s2 = PinyinSequence::from_reading(r2);
    const bool seqs_distinct = !(s1 == s2) && s1.str() == "yue4----" && s2.str() == "le4-----";

    ModelConfig cfg;
    cfg.layers = 0;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.max_len = 8;
    cfg.vocab_size = vocab.size();
    cfg.pinyin_embed_width = 8;
    cfg.dropout = 0.0;
    ParamStore params = init_params_spread(cfg, 0xE4B990);
    GlyphAtlas atlas;
    for (int id = Vocab::kNumSpecial; id < vocab.size(); ++id) {
        atlas.put(vocab.codepoint_of(id), synth_glyph(vocab.codepoint_of(id)));
    }

    const std::vector<int> ids1{vocab.id_of(music[0]), vocab.id_of(music[1])};
    const std::vector<int> ids2{vocab.id_of(happy[0]), vocab.id_of(happy[1])};
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    const Tensor e1 = tape.value(
        embed_sequence(tape, bound, cfg, atlas, derive_embedding_inputs(ids1, vocab, lex)));
    const Tensor e2 = tape.value(
        embed_sequence(tape, bound, cfg, atlas, derive_embedding_inputs(ids2, vocab, lex)));
    // Row 1 holds the same character at the same position in both contexts;
    // only its resolved reading differs.
    bool distinct = false;
    double max_gap = 0.0;
    for (int j = 0; j < cfg.hidden; ++j) {
        const double gap = std::abs(e1.at(1, j) - e2.at(1, j));
        max_gap = std::max(max_gap, gap);
        if (gap != 0.0) distinct = true;
    }
    return {seqs_distinct && distinct,
            "sequences=" + s1.str() + "/" + s2.str() + " max_embedding_gap=" + fmt(max_gap)};
}

std::pair<bool, std::string> oracle_equivalence() {
    CounterRng rng(0xC0171D);
    int64_t checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int w = 2;
        const int t = w + static_cast<int>(rng.next_below(7));
        const int e = 1 + static_cast<int>(rng.next_below(4));
        const int f = 1 + static_cast<int>(rng.next_below(3));
        Tensor seq({t, e}), filters({f, w * e}), bias({f});
        for (int64_t i = 0; i < seq.numel(); ++i) seq[static_cast<size_t>(i)] = rng.next_gaussian();
        for (int64_t i = 0; i < filters.numel(); ++i) filters[static_cast<size_t>(i)] = rng.next_gaussian();
        for (int64_t i = 0; i < bias.numel(); ++i) bias[static_cast<size_t>(i)] = rng.next_gaussian();

        // Brute-force window enumeration, kept independent of the tape op.
        std::vector<double> want(static_cast<size_t>(f));
        for (int fi = 0; fi < f; ++fi) {
            double best = -std::numeric_limits<double>::infinity();
            for (int start = 0; start + w <= t; ++start) {
                double r = bias[static_cast<size_t>(fi)];
                for (int j = 0; j < w; ++j) {
                    for (int c = 0; c < e; ++c) {
                        r += filters.at(fi, j * e + c) * seq.at(start + j, c);
                    }
                }
                best = std::max(best, r);
            }
            want[static_cast<size_t>(fi)] = best;
        }

        Tape tape;
        const Tensor& got = tape.value(tape.conv1d_maxpool(
            tape.constant(seq), tape.constant(filters), tape.constant(bias), w));
        for (int fi = 0; fi < f; ++fi) {
            ++checked;
            if (got[static_cast<size_t>(fi)] != want[static_cast<size_t>(fi)]) {
                return {false, "mismatch in trial " + std::to_string(trial)};
            }
        }
    }
    return {true, "1000 instances, " + std::to_string(checked) + " outputs bit-equal"};
}

std::pair<bool, std::string> reproducibility() {
    const std::string ckpt = work_path("repro.ckpt");
    const std::string log = work_path("repro.log");
    const std::string args = "pretrain --seed 5 " + pretrain_args(ckpt, log) +
                             " --set total_steps=60 --set warmup_steps=10";
    const CliResult r1 = run_cli(args);
    if (r1.exit_code != 0) return {false, "first run exit=" + std::to_string(r1.exit_code)};
    const std::string log1 = read_file(log);
    const std::string ckpt1 = read_file(ckpt);
    const CliResult r2 = run_cli(args);
    if (r2.exit_code != 0) return {false, "second run exit=" + std::to_string(r2.exit_code)};
    const bool ok = read_file(log) == log1 && read_file(ckpt) == ckpt1;
    return {ok, ok ? "logs and checkpoints byte-identical across runs" : "byte mismatch"};
}

std::pair<bool, std::string> format_round_trips() {
    // Atlas: write -> read -> write.
    const std::string atlas_path = work_path("accept.atlas");
    const std::string atlas_bytes1 = read_file(atlas_path);
    GlyphAtlas atlas = atlas_from_bytes(atlas_bytes1, atlas_path);
    const bool atlas_ok = atlas_to_bytes(atlas) == atlas_bytes1 && atlas.size() == 166;

    // Checkpoint: write -> read -> write.
    const std::string ckpt_path = work_path("repro.ckpt");
    const std::string ckpt_bytes1 = read_file(ckpt_path);
    Checkpoint ckpt = checkpoint_from_bytes(ckpt_bytes1, ckpt_path);
    const bool ckpt_ok = checkpoint_to_bytes(ckpt.params, ckpt.config_text) == ckpt_bytes1;

    return {atlas_ok && ckpt_ok, std::string("atlas=") + (atlas_ok ? "exact" : "DIFFERS") +
                                     " checkpoint=" + (ckpt_ok ? "exact" : "DIFFERS")};
}

}  // namespace

int main() {
    g_work_dir = (fs::temp_directory_path() /
                  ("cbert_accept_" + std::to_string(::getpid())))
                     .string();
    fs::create_directories(g_work_dir);

    // Shared artifact: the synthesized atlas over the bundled charset.
    const CliResult atlas = run_cli("synth-atlas " + data_path("charset.txt") + " " +
                                    work_path("accept.atlas"));
    if (atlas.exit_code != 0) {
        std::cout << "[FAIL] setup -- synth-atlas exit=" << atlas.exit_code << "\n"
                  << atlas.output;
        return 1;
    }

    run_criterion("gradient-correctness", gradient_correctness);
    run_criterion("structural-fidelity", structural_fidelity);
    run_criterion("masking-statistics", masking_statistics);
    run_criterion("wwm-span-integrity", wwm_span_integrity);
    run_criterion("trainability-smoke-test", trainability);
    run_criterion("ablation-structure", ablation_structure);
    run_criterion("heteronym-mechanism", heteronym_mechanism);
    run_criterion("oracle-equivalence", oracle_equivalence);
    run_criterion("reproducibility", reproducibility);
    run_criterion("format-round-trips", format_round_trips);

    if (g_failures != 0) {
        std::cout << g_failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all criteria passed" << std::endl;
    return 0;
}
