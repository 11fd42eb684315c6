// SPDX-License-Identifier: Apache-2.0
#include "cbert/model.hpp"

#include "cbert/glyph.hpp"
#include "cbert/pinyin.hpp"
#include "cbert/rng.hpp"
#include "cbert/vocab.hpp"

namespace cbert {

void ModelConfig::validate() const {
    if (layers < 0) throw ConfigError("model: layers must be >= 0");
    if (hidden < 2) throw ConfigError("model: hidden must be >= 2");
    if (heads < 1 || hidden % heads != 0) {
        throw ConfigError("model: hidden (" + std::to_string(hidden) +
                          ") must be divisible by heads (" + std::to_string(heads) + ")");
    }
    if (max_len < 3) throw ConfigError("model: max_len must be >= 3");
    if (vocab_size <= Vocab::kNumSpecial) {
        throw ConfigError("model: vocab_size must exceed the special-token count");
    }
    if (pinyin_embed_width < 1) throw ConfigError("model: pinyin_embed_width must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0,1)");
}

std::vector<std::pair<std::string, std::vector<int>>> param_shapes(const ModelConfig& cfg) {
    cfg.validate();
    const int d = cfg.hidden;
    std::vector<std::pair<std::string, std::vector<int>>> out;
    out.emplace_back("embed.char_table", std::vector<int>{cfg.vocab_size, d});
    out.emplace_back("embed.position_table", std::vector<int>{cfg.max_len, d});
    if (cfg.use_glyph) {
        out.emplace_back("embed.glyph.weight", std::vector<int>{kGlyphFlatWidth, d});
        out.emplace_back("embed.glyph.bias", std::vector<int>{d});
    }
    if (cfg.use_pinyin) {
        out.emplace_back("embed.pinyin.symbol_table",
                         std::vector<int>{kPinyinSymbols, cfg.pinyin_embed_width});
        out.emplace_back("embed.pinyin.filters",
                         std::vector<int>{d, kPinyinConvWidth * cfg.pinyin_embed_width});
        out.emplace_back("embed.pinyin.bias", std::vector<int>{d});
    }
    if (cfg.fusion_inputs() >= 2) {
        out.emplace_back("embed.fusion.weight", std::vector<int>{cfg.fusion_inputs() * d, d});
        out.emplace_back("embed.fusion.bias", std::vector<int>{d});
    }
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        // The key projection carries no bias: softmax is invariant to the
        // per-row score shift a key bias induces, so the parameter would be
        // unlearnable dead weight with an identically-zero gradient.
        for (const char* proj : {"query", "key", "value", "output"}) {
            out.emplace_back(p + "attn." + proj + ".weight", std::vector<int>{d, d});
            if (std::string(proj) != "key") {
                out.emplace_back(p + "attn." + proj + ".bias", std::vector<int>{d});
            }
        }
        out.emplace_back(p + "attn_norm.gain", std::vector<int>{d});
        out.emplace_back(p + "attn_norm.bias", std::vector<int>{d});
        out.emplace_back(p + "ff.in.weight", std::vector<int>{d, cfg.ff_width()});
        out.emplace_back(p + "ff.in.bias", std::vector<int>{cfg.ff_width()});
        out.emplace_back(p + "ff.out.weight", std::vector<int>{cfg.ff_width(), d});
        out.emplace_back(p + "ff.out.bias", std::vector<int>{d});
        out.emplace_back(p + "ff_norm.gain", std::vector<int>{d});
        out.emplace_back(p + "ff_norm.bias", std::vector<int>{d});
    }
    out.emplace_back("mlm.dense.weight", std::vector<int>{d, d});
    out.emplace_back("mlm.dense.bias", std::vector<int>{d});
    out.emplace_back("mlm.norm.gain", std::vector<int>{d});
    out.emplace_back("mlm.norm.bias", std::vector<int>{d});
    out.emplace_back("mlm.out.weight", std::vector<int>{d, cfg.vocab_size});
    out.emplace_back("mlm.out.bias", std::vector<int>{cfg.vocab_size});
    return out;
}

const char* head_kind_name(HeadKind head) {
    return head == HeadKind::Classify ? "classify" : "tag";
}

std::vector<std::pair<std::string, std::vector<int>>> head_param_shapes(const ModelConfig& cfg,
                                                                        HeadKind head,
                                                                        int num_labels) {
    if (num_labels < 2) throw ConfigError("head: need at least 2 labels");
    const std::string p = std::string("head.") + head_kind_name(head) + ".";
    return {{p + "weight", {cfg.hidden, num_labels}}, {p + "bias", {num_labels}}};
}

namespace {

Tensor init_tensor(const std::string& name, const std::vector<int>& shape, uint64_t seed) {
    Tensor t(shape);
    if (ends_with(name, ".bias")) return t;  // zeros
    if (ends_with(name, ".gain")) return Tensor::full(shape, 1.0);
    CounterRng rng = CounterRng::derive({0x696E6974ull, seed, fnv1a(name.c_str())});
    const size_t n = static_cast<size_t>(t.numel());
    for (size_t i = 0; i < n; ++i) t[i] = kInitStd * rng.next_gaussian();
    return t;
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, uint64_t seed) {
    ParamStore store;
    for (const auto& [name, shape] : param_shapes(cfg)) {
        store.add(name, init_tensor(name, shape, seed));
    }
    return store;
}

ParamStore init_params_spread(const ModelConfig& cfg, uint64_t seed) {
    ParamStore store;
    for (const auto& [name, shape] : param_shapes(cfg)) {
        Tensor t(shape);
        CounterRng rng = CounterRng::derive({0x7370726Cull, seed, fnv1a(name.c_str())});
        const bool is_gain = ends_with(name, ".gain");
        const bool is_table = ends_with(name, "_table");
        // Matmul weights scale with fan-in so activations stay O(1) and no
        // path saturates; lookup tables and biases use a fixed spread.
        double std_dev = 0.3;
        if (shape.size() == 2 && !is_table) std_dev = 1.0 / std::sqrt(shape[0]);
        const size_t n = static_cast<size_t>(t.numel());
        for (size_t i = 0; i < n; ++i) {
            t[i] = is_gain ? 1.0 + 0.2 * rng.next_gaussian() : std_dev * rng.next_gaussian();
        }
        store.add(name, std::move(t));
    }
    return store;
}

void add_head_params(ParamStore& store, const ModelConfig& cfg, HeadKind head, int num_labels,
                     uint64_t seed) {
    for (const auto& [name, shape] : head_param_shapes(cfg, head, num_labels)) {
        store.add(name, init_tensor(name, shape, seed));
    }
}

void validate_params(const ParamStore& store, const ModelConfig& cfg, HeadKind head,
                     int num_labels, bool has_head) {
    auto expected = param_shapes(cfg);
    if (has_head) {
        for (auto& e : head_param_shapes(cfg, head, num_labels)) expected.push_back(std::move(e));
    }
    if (store.size() != expected.size()) {
        // Find the first name present on one side only.
        for (const auto& [name, shape] : expected) {
            if (!store.has(name)) {
                throw FormatError("checkpoint: missing tensor '" + name + "'");
            }
        }
        for (size_t i = 0; i < store.size(); ++i) {
            bool found = false;
            for (const auto& [name, shape] : expected) {
                if (name == store.name(i)) {
                    found = true;
                    break;
                }
            }
            if (!found) throw FormatError("checkpoint: unexpected tensor '" + store.name(i) + "'");
        }
    }
    for (size_t i = 0; i < store.size(); ++i) {
        const std::string& name = store.name(i);
        const std::vector<int>* want = nullptr;
        for (const auto& [ename, eshape] : expected) {
            if (ename == name) {
                want = &eshape;
                break;
            }
        }
        if (want == nullptr) {
            throw FormatError("checkpoint: unexpected tensor '" + name + "'");
        }
        if (*want != store.tensor(i).shape()) {
            throw FormatError("checkpoint: tensor '" + name + "' has shape " +
                              store.tensor(i).shape_str() + ", expected " +
                              shape_to_string(*want));
        }
    }
}

}  // namespace cbert
