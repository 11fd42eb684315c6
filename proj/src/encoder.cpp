// SPDX-License-Identifier: Apache-2.0
#include "cbert/encoder.hpp"

#include <cmath>

#include "cbert/rng.hpp"

namespace cbert {

DropoutCtx DropoutCtx::train(double rate, uint64_t seed, uint64_t step) {
    DropoutCtx d;
    d.enabled = rate > 0.0;
    d.rate = rate;
    d.key = CounterRng::derive_key({0x64726F70ull, seed, step});
    return d;
}

Value apply_dropout(Tape& tape, Value x, const DropoutCtx& drop) {
    if (!drop.enabled || drop.rate <= 0.0) return x;
    const Tensor& tx = tape.value(x);
    Tensor mask(tx.shape());
    CounterRng rng = CounterRng::derive({drop.key, drop.site++});
    const double keep_scale = 1.0 / (1.0 - drop.rate);
    const size_t n = static_cast<size_t>(mask.numel());
    for (size_t i = 0; i < n; ++i) {
        mask[i] = rng.next_unit() < drop.rate ? 0.0 : keep_scale;
    }
    return tape.mul(x, tape.constant(std::move(mask)));
}

Value attention_sublayer(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, int layer,
                         Value hidden, std::span<const uint8_t> attention_mask,
                         const DropoutCtx& drop, AttnProbe* probe) {
    const std::string p = "layer" + std::to_string(layer) + ".attn.";
    const int t_len = tape.value(hidden).rows();
    if (static_cast<int>(attention_mask.size()) != t_len) {
        throw ShapeError("attention: mask length " + std::to_string(attention_mask.size()) +
                         " does not match T=" + std::to_string(t_len));
    }

    Value q = tape.add_row(tape.matmul(hidden, bound[p + "query.weight"]),
                           bound[p + "query.bias"]);
    Value k = tape.matmul(hidden, bound[p + "key.weight"]);  // no bias, see param_shapes
    Value v = tape.add_row(tape.matmul(hidden, bound[p + "value.weight"]),
                           bound[p + "value.bias"]);

    // Additive key mask, shared across heads.
    Tensor key_mask({t_len});
    for (int t = 0; t < t_len; ++t) {
        key_mask[static_cast<size_t>(t)] = attention_mask[static_cast<size_t>(t)] ? 0.0
                                                                                  : kAttnMaskPenalty;
    }
    Value mask_row = tape.constant(std::move(key_mask));

    const int dh = cfg.head_dim();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Value> head_ctx;
    head_ctx.reserve(static_cast<size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
        Value qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
        Value kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
        Value vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
        Value scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dh);
        scores = tape.add_row(scores, mask_row);
        Value probs = tape.softmax(scores, -1);
        if (probe != nullptr) probe->probs.push_back(tape.value(probs));
        probs = apply_dropout(tape, probs, drop);
        head_ctx.push_back(tape.matmul(probs, vh));
    }
    Value ctx = tape.concat_last(head_ctx);
    Value out = tape.add_row(tape.matmul(ctx, bound[p + "output.weight"]),
                             bound[p + "output.bias"]);
    return apply_dropout(tape, out, drop);
}

Value ff_sublayer(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, int layer,
                  Value hidden, const DropoutCtx& drop) {
    const std::string p = "layer" + std::to_string(layer) + ".ff.";
    Value inner = tape.gelu(
        tape.add_row(tape.matmul(hidden, bound[p + "in.weight"]), bound[p + "in.bias"]));
    Value out = tape.add_row(tape.matmul(inner, bound[p + "out.weight"]), bound[p + "out.bias"]);
    return apply_dropout(tape, out, drop);
}

Value encoder_forward(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, Value embedded,
                      std::span<const uint8_t> attention_mask, const DropoutCtx& drop,
                      AttnProbe* probe) {
    Value h = embedded;
    for (int layer = 0; layer < cfg.layers; ++layer) {
        const std::string p = "layer" + std::to_string(layer) + ".";
        Value attn = attention_sublayer(tape, bound, cfg, layer, h, attention_mask, drop, probe);
        h = tape.layer_norm(tape.add(h, attn), bound[p + "attn_norm.gain"],
                            bound[p + "attn_norm.bias"], kLayerNormEps);
        Value ff = ff_sublayer(tape, bound, cfg, layer, h, drop);
        h = tape.layer_norm(tape.add(h, ff), bound[p + "ff_norm.gain"],
                            bound[p + "ff_norm.bias"], kLayerNormEps);
    }
    return h;
}

Value mlm_logits(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, Value hidden) {
    (void)cfg;
    Value dense = tape.gelu(tape.add_row(tape.matmul(hidden, bound["mlm.dense.weight"]),
                                         bound["mlm.dense.bias"]));
    Value normed =
        tape.layer_norm(dense, bound["mlm.norm.gain"], bound["mlm.norm.bias"], kLayerNormEps);
    return tape.add_row(tape.matmul(normed, bound["mlm.out.weight"]), bound["mlm.out.bias"]);
}

Value classify_logits(Tape& tape, const BoundParams& bound, Value hidden) {
    const std::vector<int> first{0};
    Value cls = tape.gather_rows(hidden, first);  // [1 x D]
    Value logits = tape.add_row(tape.matmul(cls, bound["head.classify.weight"]),
                                bound["head.classify.bias"]);
    return tape.reshape(logits, {tape.value(logits).cols()});
}

Value tag_logits(Tape& tape, const BoundParams& bound, Value hidden) {
    return tape.add_row(tape.matmul(hidden, bound["head.tag.weight"]), bound["head.tag.bias"]);
}

std::vector<int> argmax_rows(const Tensor& logits) {
    if (logits.ndim() == 1) {
        int best = 0;
        for (int j = 1; j < logits.extent(0); ++j) {
            if (logits[static_cast<size_t>(j)] > logits[static_cast<size_t>(best)]) best = j;
        }
        return {best};
    }
    std::vector<int> out;
    out.reserve(static_cast<size_t>(logits.rows()));
    for (int r = 0; r < logits.rows(); ++r) {
        int best = 0;
        for (int j = 1; j < logits.cols(); ++j) {
            if (logits.at(r, j) > logits.at(r, best)) best = j;
        }
        out.push_back(best);
    }
    return out;
}

}  // namespace cbert
