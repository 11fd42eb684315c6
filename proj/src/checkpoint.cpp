// SPDX-License-Identifier: Apache-2.0
#include "cbert/checkpoint.hpp"

#include "cbert/io.hpp"

namespace cbert {

namespace {
constexpr char kMagic[4] = {'C', 'B', 'R', 'T'};
constexpr uint16_t kVersion = 1;
}  // namespace

std::string checkpoint_to_bytes(const ParamStore& params, const std::string& config_text) {
    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u16(kVersion);
    w.u32(static_cast<uint32_t>(config_text.size()));
    w.str(config_text);
    w.u32(static_cast<uint32_t>(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params.name(i);
        const Tensor& t = params.tensor(i);
        w.u16(static_cast<uint16_t>(name.size()));
        w.str(name);
        w.u8(static_cast<uint8_t>(t.ndim()));
        for (int e : t.shape()) w.u32(static_cast<uint32_t>(e));
        const size_t n = static_cast<size_t>(t.numel());
        for (size_t j = 0; j < n; ++j) w.f32(static_cast<float>(t[j]));
    }
    return w.buffer();
}

Checkpoint checkpoint_from_bytes(const std::string& data, const std::string& source) {
    ByteReader r(data, source);
    const std::string magic = r.bytes(4);
    if (magic != std::string(kMagic, 4)) {
        ByteReader at_start(data, source);
        at_start.fail("bad checkpoint magic");
    }
    const uint16_t version = r.u16();
    if (version != kVersion) {
        throw FormatError((source.empty() ? "checkpoint" : source) + ": unsupported version " +
                          std::to_string(version) + " at offset 4");
    }
    Checkpoint ckpt;
    const uint32_t cfg_len = r.u32();
    ckpt.config_text = r.bytes(cfg_len);
    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = r.u16();
        const std::string name = r.bytes(name_len);
        const uint8_t ndim = r.u8();
        std::vector<int> shape;
        shape.reserve(ndim);
        for (uint8_t d = 0; d < ndim; ++d) {
            const uint32_t e = r.u32();
            if (e == 0 || e > (1u << 28)) r.fail("tensor '" + name + "' has bad extent");
            shape.push_back(static_cast<int>(e));
        }
        const int64_t n = shape_numel(shape);
        std::vector<double> values(static_cast<size_t>(n));
        for (int64_t j = 0; j < n; ++j) {
            values[static_cast<size_t>(j)] = static_cast<double>(r.f32());
        }
        ckpt.params.add(name, Tensor(std::move(shape), std::move(values)));
    }
    r.expect_end();
    return ckpt;
}

void save_checkpoint(const ParamStore& params, const std::string& config_text,
                     const std::string& path) {
    write_file(path, checkpoint_to_bytes(params, config_text));
}

Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_bytes(read_file(path), path);
}

std::string meta_to_text(const CheckpointMeta& meta) {
    const ModelConfig& c = meta.config;
    std::string s;
    const auto kv = [&s](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
    kv("layers", std::to_string(c.layers));
    kv("hidden", std::to_string(c.hidden));
    kv("heads", std::to_string(c.heads));
    kv("max_len", std::to_string(c.max_len));
    kv("vocab_size", std::to_string(c.vocab_size));
    kv("pinyin_embed_width", std::to_string(c.pinyin_embed_width));
    kv("dropout", format_double(c.dropout));
    kv("use_glyph", c.use_glyph ? "1" : "0");
    kv("use_pinyin", c.use_pinyin ? "1" : "0");
    kv("task", meta.task);
    if (!meta.labels.empty()) {
        std::string joined;
        for (size_t i = 0; i < meta.labels.size(); ++i) {
            if (i) joined += ",";
            joined += meta.labels[i];
        }
        kv("labels", joined);
    }
    kv("vocab_chars", meta.vocab_chars);
    for (const auto& [k, v] : meta.run_echo) kv("run." + k, v);
    return s;
}

CheckpointMeta meta_from_text(const std::string& text) {
    CheckpointMeta meta;
    bool saw_vocab_size = false;
    for (const std::string& raw : split(text, '\n')) {
        if (raw.empty()) continue;
        const size_t eq = raw.find('=');
        if (eq == std::string::npos) {
            throw FormatError("checkpoint config: line without '=': '" + raw + "'");
        }
        const std::string key = raw.substr(0, eq);
        const std::string val = raw.substr(eq + 1);
        if (key.rfind("run.", 0) == 0) {
            meta.run_echo.emplace_back(key.substr(4), val);
            continue;
        }
        if (key == "layers") {
            meta.config.layers = std::stoi(val);
        } else if (key == "hidden") {
            meta.config.hidden = std::stoi(val);
        } else if (key == "heads") {
            meta.config.heads = std::stoi(val);
        } else if (key == "max_len") {
            meta.config.max_len = std::stoi(val);
        } else if (key == "vocab_size") {
            meta.config.vocab_size = std::stoi(val);
            saw_vocab_size = true;
        } else if (key == "pinyin_embed_width") {
            meta.config.pinyin_embed_width = std::stoi(val);
        } else if (key == "dropout") {
            meta.config.dropout = std::stod(val);
        } else if (key == "use_glyph") {
            meta.config.use_glyph = val == "1";
        } else if (key == "use_pinyin") {
            meta.config.use_pinyin = val == "1";
        } else if (key == "task") {
            meta.task = val;
        } else if (key == "labels") {
            meta.labels = split(val, ',');
        } else if (key == "vocab_chars") {
            meta.vocab_chars = val;
        } else {
            throw FormatError("checkpoint config: unknown key '" + key + "'");
        }
    }
    if (!saw_vocab_size) throw FormatError("checkpoint config: missing vocab_size");
    return meta;
}

LoadedModel load_model(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    LoadedModel model;
    model.meta = meta_from_text(ckpt.config_text);
    model.vocab = Vocab::from_chars_utf8(model.meta.vocab_chars);
    if (model.vocab.size() != model.meta.config.vocab_size) {
        throw FormatError(path + ": vocab_chars holds " + std::to_string(model.vocab.size()) +
                          " entries but vocab_size=" +
                          std::to_string(model.meta.config.vocab_size));
    }
    const bool has_head = model.meta.task != "mlm";
    const HeadKind head = model.meta.task == "classify" ? HeadKind::Classify : HeadKind::Tag;
    if (has_head && model.meta.labels.size() < 2) {
        throw FormatError(path + ": task '" + model.meta.task + "' needs at least 2 labels");
    }
    validate_params(ckpt.params, model.meta.config, head,
                    static_cast<int>(model.meta.labels.size()), has_head);
    model.params = std::move(ckpt.params);
    return model;
}

}  // namespace cbert
