// SPDX-License-Identifier: Apache-2.0
#include "cbert/runconfig.hpp"

#include <charconv>

#include "cbert/io.hpp"

namespace cbert {

namespace {

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int n = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs an integer, got '" + v + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t n = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs an unsigned integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config: key '" + key + "' needs a boolean (1/0/true/false), got '" + v +
                      "'");
}

struct Preset {
    int layers, hidden, heads, pinyin_embed_width, max_len;
    double dropout, max_lr;
    int warmup_steps, total_steps, batch_size;
};

Preset preset_for(const std::string& name) {
    if (name == "toy") return {2, 16, 2, 8, 48, 0.0, 3e-3, 100, 500, 4};
    if (name == "base") return {12, 768, 12, 32, 512, 0.1, 1e-4, 20000, 500000, 3200};
    if (name == "large") return {24, 1024, 16, 32, 512, 0.1, 3e-4, 90000, 280000, 8000};
    throw ConfigError("config: unknown preset '" + name + "' (expected toy|base|large)");
}

}  // namespace

ModelConfig RunConfig::model_config(int vocab_size) const {
    ModelConfig m;
    m.layers = layers;
    m.hidden = hidden;
    m.heads = heads;
    m.max_len = max_len;
    m.vocab_size = vocab_size;
    m.pinyin_embed_width = pinyin_embed_width;
    m.dropout = dropout;
    m.use_glyph = use_glyph;
    m.use_pinyin = use_pinyin;
    m.validate();
    return m;
}

MaskingPolicy RunConfig::masking_policy() const {
    MaskingPolicy p;
    p.wwm_prob = wwm_prob;
    p.select_prob = select_prob;
    p.mask_frac = mask_frac;
    p.random_frac = random_frac;
    p.keep_frac = keep_frac;
    p.packed_prob = packed_prob;
    p.max_len = max_len;
    p.validate();
    return p;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.max_lr = max_lr;
    t.warmup_steps = warmup_steps;
    t.total_steps = total_steps;
    t.batch_size = batch_size;
    t.seed = seed;
    t.weight_decay = weight_decay;
    t.validate();
    return t;
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
    std::vector<std::pair<std::string, std::string>> e;
    const auto put = [&e](const char* k, const std::string& v) { e.emplace_back(k, v); };
    put("preset", preset);
    put("layers", std::to_string(layers));
    put("hidden", std::to_string(hidden));
    put("heads", std::to_string(heads));
    put("pinyin_embed_width", std::to_string(pinyin_embed_width));
    put("max_len", std::to_string(max_len));
    put("dropout", format_double(dropout));
    put("use_glyph", use_glyph ? "1" : "0");
    put("use_pinyin", use_pinyin ? "1" : "0");
    put("seed", std::to_string(seed));
    put("corpus", corpus);
    put("word_lexicon", word_lexicon);
    put("pinyin_lexicon", pinyin_lexicon);
    put("atlas", atlas);
    put("checkpoint", checkpoint);
    put("init_checkpoint", init_checkpoint);
    put("log", log);
    put("out_dir", out_dir);
    put("train_data", train_data);
    put("eval_data", eval_data);
    put("max_lr", format_double(max_lr));
    put("warmup_steps", std::to_string(warmup_steps));
    put("total_steps", std::to_string(total_steps));
    put("batch_size", std::to_string(batch_size));
    put("weight_decay", format_double(weight_decay));
    put("wwm_prob", format_double(wwm_prob));
    put("select_prob", format_double(select_prob));
    put("mask_frac", format_double(mask_frac));
    put("random_frac", format_double(random_frac));
    put("keep_frac", format_double(keep_frac));
    put("packed_prob", format_double(packed_prob));
    put("task", task);
    put("gradcheck_eps", format_double(gradcheck_eps));
    put("debug_corrupt_grad", debug_corrupt_grad);
    put("inspect_char", inspect_char);
    put("inspect_context", inspect_context);
    return e;
}

std::string RunConfig::echo_text(const std::string& line_prefix) const {
    std::string s;
    for (const auto& [k, v] : echo()) s += line_prefix + k + "=" + v + "\n";
    return s;
}

RunConfig resolve_run_config(const std::string& config_path,
                             const std::vector<std::string>& set_overrides,
                             const uint64_t* seed_override) {
    // Collect raw key=value pairs: file first, then --set in order.
    std::vector<std::pair<std::string, std::string>> raw;
    if (!config_path.empty()) {
        size_t line_no = 0;
        for (const std::string& raw_line : split(read_file(config_path), '\n')) {
            ++line_no;
            const std::string line = strip(raw_line);
            if (line.empty() || line[0] == '#') continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(config_path + ":" + std::to_string(line_no) +
                                  ": expected key=value");
            }
            raw.emplace_back(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
        }
    }
    for (const std::string& s : set_overrides) {
        const size_t eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set needs key=value, got '" + s + "'");
        raw.emplace_back(strip(s.substr(0, eq)), strip(s.substr(eq + 1)));
    }

    RunConfig cfg;

    // Preset must be known before other keys resolve their defaults.
    for (const auto& [k, v] : raw) {
        if (k == "preset") cfg.preset = v;
    }
    const Preset p = preset_for(cfg.preset);
    cfg.layers = p.layers;
    cfg.hidden = p.hidden;
    cfg.heads = p.heads;
    cfg.pinyin_embed_width = p.pinyin_embed_width;
    cfg.max_len = p.max_len;
    cfg.dropout = p.dropout;
    cfg.max_lr = p.max_lr;
    cfg.warmup_steps = p.warmup_steps;
    cfg.total_steps = p.total_steps;
    cfg.batch_size = p.batch_size;

    for (const auto& [k, v] : raw) {
        if (k == "preset") {
            // handled above
        } else if (k == "layers") {
            cfg.layers = to_int(k, v);
        } else if (k == "hidden") {
            cfg.hidden = to_int(k, v);
        } else if (k == "heads") {
            cfg.heads = to_int(k, v);
        } else if (k == "pinyin_embed_width") {
            cfg.pinyin_embed_width = to_int(k, v);
        } else if (k == "max_len") {
            cfg.max_len = to_int(k, v);
        } else if (k == "dropout") {
            cfg.dropout = to_double(k, v);
        } else if (k == "use_glyph") {
            cfg.use_glyph = to_bool(k, v);
        } else if (k == "use_pinyin") {
            cfg.use_pinyin = to_bool(k, v);
        } else if (k == "seed") {
            cfg.seed = to_u64(k, v);
        } else if (k == "corpus") {
            cfg.corpus = v;
        } else if (k == "word_lexicon") {
            cfg.word_lexicon = v;
        } else if (k == "pinyin_lexicon") {
            cfg.pinyin_lexicon = v;
        } else if (k == "atlas") {
            cfg.atlas = v;
        } else if (k == "checkpoint") {
            cfg.checkpoint = v;
        } else if (k == "init_checkpoint") {
            cfg.init_checkpoint = v;
        } else if (k == "log") {
            cfg.log = v;
        } else if (k == "out_dir") {
            cfg.out_dir = v;
        } else if (k == "train_data") {
            cfg.train_data = v;
        } else if (k == "eval_data") {
            cfg.eval_data = v;
        } else if (k == "max_lr") {
            cfg.max_lr = to_double(k, v);
        } else if (k == "warmup_steps") {
            cfg.warmup_steps = to_int(k, v);
        } else if (k == "total_steps") {
            cfg.total_steps = to_int(k, v);
        } else if (k == "batch_size") {
            cfg.batch_size = to_int(k, v);
        } else if (k == "weight_decay") {
            cfg.weight_decay = to_double(k, v);
        } else if (k == "wwm_prob") {
            cfg.wwm_prob = to_double(k, v);
        } else if (k == "select_prob") {
            cfg.select_prob = to_double(k, v);
        } else if (k == "mask_frac") {
            cfg.mask_frac = to_double(k, v);
        } else if (k == "random_frac") {
            cfg.random_frac = to_double(k, v);
        } else if (k == "keep_frac") {
            cfg.keep_frac = to_double(k, v);
        } else if (k == "packed_prob") {
            cfg.packed_prob = to_double(k, v);
        } else if (k == "task") {
            cfg.task = v;
        } else if (k == "gradcheck_eps") {
            cfg.gradcheck_eps = to_double(k, v);
        } else if (k == "debug_corrupt_grad") {
            cfg.debug_corrupt_grad = v;
        } else if (k == "inspect_char") {
            cfg.inspect_char = v;
        } else if (k == "inspect_context") {
            cfg.inspect_context = v;
        } else {
            throw ConfigError("config: unknown key '" + k + "'");
        }
    }

    if (seed_override != nullptr) cfg.seed = *seed_override;
    return cfg;
}

}  // namespace cbert
