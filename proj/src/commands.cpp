// SPDX-License-Identifier: Apache-2.0
#include "cbert/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>

#include "cbert/checkpoint.hpp"
#include "cbert/gradcheck.hpp"
#include "cbert/io.hpp"
#include "cbert/metrics.hpp"

namespace cbert {

namespace {

void require_path(const std::string& value, const char* key) {
    if (value.empty()) throw ConfigError(std::string("config: '") + key + "' path is required");
}

std::string loss_row(int step, double lr, double loss) {
    return std::to_string(step) + "\t" + format_double(lr) + "\t" + format_double(loss) + "\n";
}

CheckpointMeta make_meta(const ModelConfig& model, const Vocab& vocab, const RunConfig& cfg,
                         const std::string& task, std::vector<std::string> labels) {
    CheckpointMeta meta;
    meta.config = model;
    meta.vocab_chars = vocab.chars_utf8();
    meta.task = task;
    meta.labels = std::move(labels);
    meta.run_echo = cfg.echo();
    return meta;
}

std::vector<std::string> tags_from_prediction(const std::vector<int>& pred,
                                              const std::vector<std::string>& names,
                                              size_t text_len) {
    std::vector<std::string> tags;
    tags.reserve(text_len);
    for (size_t j = 0; j < text_len; ++j) {
        tags.push_back(names[static_cast<size_t>(pred[j + 1])]);  // skip [CLS]
    }
    return tags;
}

struct FinetuneResult {
    ParamStore params;
    std::string log_text;
};

// Round-robin minibatch finetuning of a head over a labeled dataset.
FinetuneResult run_head_training(ParamStore params, const ModelContext& ctx, HeadKind head,
                                 const std::vector<LabeledExample>& examples,
                                 const TrainConfig& train, const RunConfig& cfg) {
    if (examples.empty()) throw ConfigError("finetune: dataset is empty");
    AdamOptimizer opt(train);
    std::string log_text = cfg.echo_text("# ");
    for (int step = 1; step <= train.total_steps; ++step) {
        std::vector<LabeledExample> batch;
        for (int j = 0; j < train.batch_size; ++j) {
            const size_t g = static_cast<size_t>(step - 1) * train.batch_size + j;
            batch.push_back(examples[g % examples.size()]);
        }
        const double loss = head_step(params, ctx, head, batch, opt, train, step);
        log_text += loss_row(step, lr_at(train, step), loss);
    }
    return {std::move(params), std::move(log_text)};
}

}  // namespace

PretrainData load_pretrain_data(const RunConfig& cfg) {
    require_path(cfg.corpus, "corpus");
    require_path(cfg.word_lexicon, "word_lexicon");
    require_path(cfg.pinyin_lexicon, "pinyin_lexicon");
    require_path(cfg.atlas, "atlas");
    PretrainData data;
    const std::string corpus_text = read_file(cfg.corpus);
    data.vocab = Vocab::from_corpus_text(corpus_text);
    data.words = WordLexicon::load(cfg.word_lexicon);
    data.pinyin = PinyinLexicon::load(cfg.pinyin_lexicon);
    data.atlas = load_atlas(cfg.atlas);

    std::vector<SegmentedSentence> sentences;
    for (const auto& line : corpus_lines(corpus_text)) {
        sentences.push_back(segment(line, data.words, data.vocab));
    }
    CounterRng rng = CounterRng::derive({0x6578616Dull, cfg.seed});
    data.examples = build_examples(sentences, cfg.masking_policy(), rng, &data.build_stats);
    return data;
}

int cmd_synth_atlas(const std::string& charset_path, const std::string& out_path,
                    std::ostream& out) {
    require_path(charset_path, "charset");
    require_path(out_path, "output");
    std::vector<uint32_t> cps;
    for (const std::string& raw : split(read_file(charset_path), '\n')) {
        const std::string line = strip(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("U+", 0) == 0) {
            cps.push_back(parse_codepoint_label(line));
        } else {
            for (uint32_t cp : utf8_decode(line)) cps.push_back(cp);
        }
    }
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    GlyphAtlas atlas;
    for (uint32_t cp : cps) atlas.put(cp, synth_glyph(cp));
    write_atlas(atlas, out_path);
    out << "atlas\t" << out_path << "\nentries\t" << atlas.size() << "\n";
    return 0;
}

int cmd_lexicon_check(const std::string& pinyin_path, const std::string& word_path,
                      std::ostream& out) {
    require_path(pinyin_path, "pinyin_lexicon");
    const PinyinLexicon lex = PinyinLexicon::load(pinyin_path);
    // Every bundled reading must round-trip through the symbol encoding.
    for (const auto& [cp, reading] : lex.defaults()) {
        (void)PinyinSequence::from_reading(reading);
    }
    out << "pinyin_defaults\t" << lex.default_count() << "\n";
    out << "pinyin_rules\t" << lex.rule_count() << "\n";
    if (!word_path.empty()) {
        const WordLexicon words = WordLexicon::load(word_path);
        out << "words\t" << words.size() << "\n";
    }
    out << "ok\n";
    return 0;
}

int cmd_pretrain(const RunConfig& cfg, std::ostream& out) {
    require_path(cfg.checkpoint, "checkpoint");
    require_path(cfg.log, "log");
    PretrainData data = load_pretrain_data(cfg);
    const ModelConfig model = cfg.model_config(data.vocab.size());
    const TrainConfig train = cfg.train_config();
    if (data.examples.empty() && train.total_steps > 0) {
        throw ConfigError("pretrain: corpus produced no examples");
    }

    ParamStore params = init_params(model, cfg.seed);
    const ModelContext ctx{&model, &data.vocab, &data.atlas, &data.pinyin};
    AdamOptimizer opt(train);

    std::string log_text = cfg.echo_text("# ");
    const size_t n = data.examples.size();
    for (int step = 1; step <= train.total_steps; ++step) {
        std::vector<MaskedBatch> batch;
        batch.reserve(static_cast<size_t>(train.batch_size));
        for (int j = 0; j < train.batch_size; ++j) {
            const uint64_t g =
                static_cast<uint64_t>(step - 1) * static_cast<uint64_t>(train.batch_size) +
                static_cast<uint64_t>(j);
            const uint64_t idx = g % n;
            const uint64_t epoch = g / n;
            CounterRng rng(masking_stream_id(cfg.seed, epoch, idx));
            batch.push_back(apply_masking(data.examples[idx], cfg.masking_policy(), data.vocab,
                                          rng));
        }
        const double loss = mlm_step(params, ctx, batch, opt, train, step);
        log_text += loss_row(step, lr_at(train, step), loss);
    }
    write_file(cfg.log, log_text);

    const CheckpointMeta meta = make_meta(model, data.vocab, cfg, "mlm", {});
    save_checkpoint(params, meta_to_text(meta), cfg.checkpoint);
    out << "checkpoint\t" << cfg.checkpoint << "\nsteps\t" << train.total_steps << "\nparams\t"
        << params.total_params() << "\n";
    return 0;
}

int cmd_finetune(const RunConfig& cfg, std::ostream& out) {
    require_path(cfg.init_checkpoint, "init_checkpoint");
    require_path(cfg.train_data, "train_data");
    require_path(cfg.checkpoint, "checkpoint");
    require_path(cfg.atlas, "atlas");
    require_path(cfg.pinyin_lexicon, "pinyin_lexicon");
    if (cfg.task != "classify" && cfg.task != "tag") {
        throw ConfigError("finetune: task must be classify or tag, got '" + cfg.task + "'");
    }
    const HeadKind head = cfg.task == "classify" ? HeadKind::Classify : HeadKind::Tag;

    LoadedModel base = load_model(cfg.init_checkpoint);
    if (base.meta.task != "mlm") {
        throw ConfigError("finetune: init_checkpoint already carries task '" + base.meta.task +
                          "'");
    }
    const GlyphAtlas atlas = load_atlas(cfg.atlas);
    const PinyinLexicon pinyin = PinyinLexicon::load(cfg.pinyin_lexicon);
    ModelConfig model = base.meta.config;
    model.dropout = cfg.dropout;
    const ModelContext ctx{&model, &base.vocab, &atlas, &pinyin};

    std::vector<std::string> labels;
    std::vector<LabeledExample> examples;
    std::vector<std::vector<std::string>> gold_tags;
    if (head == HeadKind::Classify) {
        ClassifyDataset ds = load_classify_dataset(cfg.train_data, base.vocab, model.max_len);
        labels = ds.label_names;
        examples = std::move(ds.examples);
    } else {
        TagDataset ds = load_tag_dataset(cfg.train_data, base.vocab, model.max_len);
        labels = ds.label_names;
        examples = std::move(ds.examples);
        gold_tags = std::move(ds.gold_tags);
    }
    add_head_params(base.params, model, head, static_cast<int>(labels.size()), cfg.seed);

    const TrainConfig train = cfg.train_config();
    FinetuneResult result =
        run_head_training(std::move(base.params), ctx, head, examples, train, cfg);
    if (!cfg.log.empty()) write_file(cfg.log, result.log_text);

    const CheckpointMeta meta = make_meta(model, base.vocab, cfg, cfg.task, labels);
    save_checkpoint(result.params, meta_to_text(meta), cfg.checkpoint);
    out << "checkpoint\t" << cfg.checkpoint << "\nlabels\t" << labels.size() << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const std::string ckpt_path =
        cfg.init_checkpoint.empty() ? cfg.checkpoint : cfg.init_checkpoint;
    require_path(ckpt_path, "init_checkpoint");
    require_path(cfg.atlas, "atlas");
    require_path(cfg.pinyin_lexicon, "pinyin_lexicon");
    LoadedModel loaded = load_model(ckpt_path);
    ModelConfig model = loaded.meta.config;
    model.dropout = 0.0;
    const GlyphAtlas atlas = load_atlas(cfg.atlas);
    const PinyinLexicon pinyin = PinyinLexicon::load(cfg.pinyin_lexicon);
    const ModelContext ctx{&model, &loaded.vocab, &atlas, &pinyin};

    if (loaded.meta.task == "mlm") {
        require_path(cfg.corpus, "corpus");
        require_path(cfg.word_lexicon, "word_lexicon");
        // Rebuild examples exactly as pretraining saw them, then measure
        // recovery on a fresh masking stream.
        RunConfig data_cfg = cfg;
        PretrainData data = load_pretrain_data(data_cfg);
        if (data.vocab.chars_utf8() != loaded.vocab.chars_utf8()) {
            throw ConfigError("eval: corpus vocabulary differs from checkpoint vocabulary");
        }
        constexpr uint64_t kEvalEpoch = 1u << 20;
        const double acc = mlm_recovery_accuracy(loaded.params, ctx, data.examples,
                                                 cfg.masking_policy(), cfg.seed, kEvalEpoch);
        out << "task\tmlm\nrecovery_accuracy\t" << format_double(acc) << "\n";
        return 0;
    }

    require_path(cfg.eval_data, "eval_data");
    const HeadKind head = loaded.meta.task == "classify" ? HeadKind::Classify : HeadKind::Tag;
    if (head == HeadKind::Classify) {
        ClassifyDataset ds = parse_classify_dataset(read_file(cfg.eval_data), loaded.vocab,
                                                    model.max_len, &loaded.meta.labels);
        int64_t hit = 0;
        for (const LabeledExample& ex : ds.examples) {
            const std::vector<int> pred = head_predict(loaded.params, ctx, head, ex.ids);
            if (pred[0] == ex.labels[0]) ++hit;
        }
        const double acc =
            ds.examples.empty() ? 0.0 : static_cast<double>(hit) / ds.examples.size();
        out << "task\tclassify\nexamples\t" << ds.examples.size() << "\naccuracy\t"
            << format_double(acc) << "\n";
        return 0;
    }

    TagDataset ds = parse_tag_dataset(read_file(cfg.eval_data), loaded.vocab, model.max_len,
                                      &loaded.meta.labels);
    std::vector<std::vector<std::string>> pred_tags;
    for (size_t i = 0; i < ds.examples.size(); ++i) {
        const std::vector<int> pred =
            head_predict(loaded.params, ctx, head, ds.examples[i].ids);
        pred_tags.push_back(
            tags_from_prediction(pred, loaded.meta.labels, ds.gold_tags[i].size()));
    }
    const Prf prf = span_prf(ds.gold_tags, pred_tags);
    const double acc = position_accuracy(ds.gold_tags, pred_tags);
    out << "task\ttag\nexamples\t" << ds.examples.size() << "\naccuracy\t" << format_double(acc)
        << "\nprecision\t" << format_double(prf.precision) << "\nrecall\t"
        << format_double(prf.recall) << "\nf1\t" << format_double(prf.f1) << "\n";
    return 0;
}

GradCheckFixture make_gradcheck_fixture(uint64_t seed) {
    GradCheckFixture fx;
    // 45 consecutive CJK codepoints -> vocab size 50 with specials.
    std::vector<uint32_t> cps;
    for (uint32_t cp = 0x4E00; cp < 0x4E00 + 45; ++cp) cps.push_back(cp);
    fx.vocab = Vocab::from_codepoints(cps);
    for (uint32_t cp : cps) fx.atlas.put(cp, synth_glyph(cp));

    // Generated readings cycling through a small syllable bank.
    static const char* kSyllables[] = {"ba",   "po",  "mi",    "fu",  "da",  "ti",
                                       "nu",   "lv",  "ge",    "ke",  "he",  "ji",
                                       "qu",   "xi",  "zhang", "chi", "shu", "ren",
                                       "zi",   "ci",  "si",    "ya",  "wo",  "yue",
                                       "liang"};
    constexpr int kBank = static_cast<int>(sizeof(kSyllables) / sizeof(kSyllables[0]));
    for (size_t i = 0; i < cps.size(); ++i) {
        const std::string reading =
            std::string(kSyllables[i % kBank]) + static_cast<char>('1' + (i % 5));
        fx.pinyin.add_default(cps[i], reading);
    }

    // Two short sentences with a mix of mask/random/keep corruptions.
    const auto id = [&](int k) { return Vocab::kNumSpecial + k; };
    MaskedBatch a;
    a.input_ids = {Vocab::kCls, id(0), Vocab::kMask, id(7), id(3), Vocab::kMask, Vocab::kSep};
    a.labels = {kIgnoreId, kIgnoreId, id(1), kIgnoreId, kIgnoreId, id(5), kIgnoreId};
    a.attention_mask.assign(a.input_ids.size(), 1);
    a.stream_id = CounterRng::derive_key({0x67636B62ull, seed, 0});
    MaskedBatch b;
    b.input_ids = {Vocab::kCls, id(9), id(12), Vocab::kMask, id(2), id(30), Vocab::kSep};
    b.labels = {kIgnoreId, kIgnoreId, id(12), id(20), kIgnoreId, id(8), kIgnoreId};
    b.attention_mask.assign(b.input_ids.size(), 1);
    b.stream_id = CounterRng::derive_key({0x67636B62ull, seed, 1});
    fx.batch = {std::move(a), std::move(b)};
    return fx;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
    GradCheckFixture fx = make_gradcheck_fixture(cfg.seed);
    ModelConfig model = cfg.model_config(fx.vocab.size());
    model.dropout = 0.0;  // dropout is always disabled during gradient checks

    ParamStore params = init_params_spread(model, cfg.seed);
    if (params.total_params() > kGradCheckMaxParams) {
        throw ConfigError("gradcheck: " + std::to_string(params.total_params()) +
                          " parameters exceed the enforced limit of " +
                          std::to_string(kGradCheckMaxParams));
    }
    const ModelContext ctx{&model, &fx.vocab, &fx.atlas, &fx.pinyin};

    GradCheckOptions opts;
    opts.eps = cfg.gradcheck_eps;
    opts.corrupt_param = cfg.debug_corrupt_grad;
    // The checked scalar is the loss scaled by an exact power of two. The
    // scaling shrinks the central-difference rounding floor (ulp of the
    // evaluated value) without introducing any rounding of its own, so
    // components whose true gradient is near zero compare cleanly under
    // the 1e-8 relative-error denominator.
    const GradCheckReport report =
        grad_check(params,
                   [&](Tape& tape, const BoundParams& bound) {
                       Value loss = mlm_batch_loss(tape, bound, ctx, fx.batch, DropoutCtx::off());
                       return tape.scale(loss, 0.0625);
                   },
                   opts);

    for (const GradCheckEntry& e : report.entries) {
        out << e.name << "\t" << format_double(e.max_rel_err) << "\t" << e.checked << "\n";
    }
    if (!report.passes(kGradCheckTol)) {
        out << "FAIL\t" << report.worst_param << "\t" << format_double(report.max_rel_err)
            << "\n";
        return 3;
    }
    out << "PASS\tmax_rel_err\t" << format_double(report.max_rel_err) << "\n";
    return 0;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
    require_path(cfg.train_data, "train_data");
    require_path(cfg.out_dir, "out_dir");
    require_path(cfg.atlas, "atlas");
    require_path(cfg.pinyin_lexicon, "pinyin_lexicon");
    std::filesystem::create_directories(cfg.out_dir);

    const std::string train_text = read_file(cfg.train_data);
    // Shared vocabulary: every character of the finetune data.
    std::string char_source;
    for (const std::string& raw : split(train_text, '\n')) {
        const auto fields = split(strip(raw), '\t');
        if (!fields.empty()) char_source += fields[0];
    }
    const Vocab vocab = Vocab::from_corpus_text(char_source);
    const GlyphAtlas atlas = load_atlas(cfg.atlas);
    const PinyinLexicon pinyin = PinyinLexicon::load(cfg.pinyin_lexicon);

    struct Variant {
        const char* name;
        bool use_glyph;
        bool use_pinyin;
    };
    const Variant variants[] = {{"full", true, true},
                                {"-glyph", false, true},
                                {"-pinyin", true, false},
                                {"-glyph-pinyin", false, false}};

    std::string table = "model\tparams\tprecision\trecall\tf1\n";
    for (const Variant& v : variants) {
        RunConfig vcfg = cfg;
        vcfg.use_glyph = v.use_glyph;
        vcfg.use_pinyin = v.use_pinyin;
        const ModelConfig model = vcfg.model_config(vocab.size());
        const ModelContext ctx{&model, &vocab, &atlas, &pinyin};

        TagDataset ds = parse_tag_dataset(train_text, vocab, model.max_len);
        ParamStore params = init_params(model, cfg.seed);
        add_head_params(params, model, HeadKind::Tag, static_cast<int>(ds.label_names.size()),
                        cfg.seed);
        const TrainConfig train = vcfg.train_config();
        FinetuneResult result =
            run_head_training(std::move(params), ctx, HeadKind::Tag, ds.examples, train, vcfg);

        // Evaluate on eval_data when given, else on the training set.
        TagDataset eval_ds =
            cfg.eval_data.empty()
                ? parse_tag_dataset(train_text, vocab, model.max_len, &ds.label_names)
                : parse_tag_dataset(read_file(cfg.eval_data), vocab, model.max_len,
                                    &ds.label_names);
        std::vector<std::vector<std::string>> pred_tags;
        for (size_t i = 0; i < eval_ds.examples.size(); ++i) {
            const std::vector<int> pred =
                head_predict(result.params, ctx, HeadKind::Tag, eval_ds.examples[i].ids);
            pred_tags.push_back(
                tags_from_prediction(pred, ds.label_names, eval_ds.gold_tags[i].size()));
        }
        const Prf prf = span_prf(eval_ds.gold_tags, pred_tags);

        const CheckpointMeta meta = make_meta(model, vocab, vcfg, "tag", ds.label_names);
        const std::string ckpt_path =
            (std::filesystem::path(cfg.out_dir) / (std::string("ablate_") +
                                                   (v.use_glyph ? "g" : "x") +
                                                   (v.use_pinyin ? "p" : "x") + ".ckpt"))
                .string();
        save_checkpoint(result.params, meta_to_text(meta), ckpt_path);

        table += std::string(v.name) + "\t" + std::to_string(result.params.total_params()) +
                 "\t" + format_double(prf.precision) + "\t" + format_double(prf.recall) + "\t" +
                 format_double(prf.f1) + "\n";
    }
    const std::string table_path =
        (std::filesystem::path(cfg.out_dir) / "ablation.tsv").string();
    write_file(table_path, table);
    out << table;
    return 0;
}

int cmd_inspect(const RunConfig& cfg, std::ostream& out) {
    const std::string ckpt_path =
        cfg.init_checkpoint.empty() ? cfg.checkpoint : cfg.init_checkpoint;
    require_path(ckpt_path, "init_checkpoint");
    require_path(cfg.atlas, "atlas");
    require_path(cfg.pinyin_lexicon, "pinyin_lexicon");
    if (cfg.inspect_char.empty()) throw ConfigError("inspect: set inspect_char=<character>");

    const auto char_cps = utf8_decode(cfg.inspect_char);
    if (char_cps.size() != 1) throw ConfigError("inspect: inspect_char must be one character");
    const uint32_t cp = char_cps[0];
    std::vector<uint32_t> context = cfg.inspect_context.empty()
                                        ? std::vector<uint32_t>{cp}
                                        : utf8_decode(cfg.inspect_context);
    size_t index = context.size();
    for (size_t i = 0; i < context.size(); ++i) {
        if (context[i] == cp) {
            index = i;
            break;
        }
    }
    if (index == context.size()) {
        throw ConfigError("inspect: inspect_context does not contain inspect_char");
    }

    LoadedModel loaded = load_model(ckpt_path);
    const ModelConfig& model = loaded.meta.config;
    const GlyphAtlas atlas = load_atlas(cfg.atlas);
    const PinyinLexicon pinyin = PinyinLexicon::load(cfg.pinyin_lexicon);

    const int id = loaded.vocab.id_of(cp);
    const auto reading = pinyin.resolve(context, index);
    const PinyinSequence seq = PinyinSequence::from_reading(reading);

    Tape tape;
    BoundParams bound = bind_params(tape, loaded.params, /*requires_grad=*/false);
    const std::vector<int> one_id{id};
    Value char_vec = tape.reshape(tape.gather_rows(bound["embed.char_table"], one_id),
                                  {model.hidden});
    Value glyph_vec;
    if (model.use_glyph) {
        glyph_vec = glyph_embed(tape, bound["embed.glyph.weight"], bound["embed.glyph.bias"],
                                atlas.lookup(cp));
    }
    Value pinyin_vec;
    if (model.use_pinyin) {
        pinyin_vec = pinyin_embed(tape, bound["embed.pinyin.symbol_table"],
                                  bound["embed.pinyin.filters"], bound["embed.pinyin.bias"], seq);
    }
    Value fusion_vec = fuse(tape, bound, model, char_vec, glyph_vec, pinyin_vec);

    const auto dump = [&](const char* label, Value v) {
        out << label;
        const Tensor& t = tape.value(v);
        for (int64_t i = 0; i < t.numel(); ++i) out << "\t" << format_double(t[static_cast<size_t>(i)]);
        out << "\n";
    };
    out << "char\t" << cfg.inspect_char << "\n";
    out << "codepoint\t" << codepoint_label(cp) << "\n";
    out << "id\t" << id << "\n";
    out << "reading\t" << (reading.has_value() ? *reading : "-") << "\n";
    out << "pinyin_sequence\t" << seq.str() << "\n";
    dump("char_vec", char_vec);
    if (model.use_glyph) dump("glyph_vec", glyph_vec);
    if (model.use_pinyin) dump("pinyin_vec", pinyin_vec);
    dump("fusion_vec", fusion_vec);
    return 0;
}

}  // namespace cbert
