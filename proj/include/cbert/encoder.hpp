// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "cbert/model.hpp"
#include "cbert/params.hpp"

namespace cbert {

// Additive pre-softmax penalty for masked-out key positions.
inline constexpr double kAttnMaskPenalty = -1e30;

// Deterministic dropout context. Mask bits for every application are a
// pure function of (key, site index), so a fixed (seed, step) pair
// reproduces the identical forward pass.
struct DropoutCtx {
    bool enabled = false;
    double rate = 0.0;
    uint64_t key = 0;
    mutable uint64_t site = 0;

    static DropoutCtx off() { return {}; }
    static DropoutCtx train(double rate, uint64_t seed, uint64_t step);
};

// Inverted dropout; identity (no tape node) when disabled or rate is 0.
Value apply_dropout(Tape& tape, Value x, const DropoutCtx& drop);

// Captures per-layer, per-head attention weights for inspection.
struct AttnProbe {
    std::vector<Tensor> probs;  // layers*heads entries of [T x T]
};

// Self-attention sublayer output (before the residual add): softmaxed
// scaled dot-product per head, heads concatenated, output-projected.
// attention_mask marks real key positions; padded keys receive zero weight.
Value attention_sublayer(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, int layer,
                         Value hidden, std::span<const uint8_t> attention_mask,
                         const DropoutCtx& drop, AttnProbe* probe = nullptr);

Value ff_sublayer(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, int layer,
                  Value hidden, const DropoutCtx& drop);

// Post-layer-norm stack: per layer, h = LN(h + Attn(h)); h = LN(h + FF(h)).
// With zero layers the input is returned unchanged.
Value encoder_forward(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, Value embedded,
                      std::span<const uint8_t> attention_mask, const DropoutCtx& drop,
                      AttnProbe* probe = nullptr);

// MLM head: dense + gelu + layer norm + projection to vocab logits [T x V].
Value mlm_logits(Tape& tape, const BoundParams& bound, const ModelConfig& cfg, Value hidden);

// Sequence-classification logits from the [CLS] row; shape [K].
Value classify_logits(Tape& tape, const BoundParams& bound, Value hidden);

// Per-position label logits [T x K].
Value tag_logits(Tape& tape, const BoundParams& bound, Value hidden);

// Argmax per row with ties broken toward the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace cbert
