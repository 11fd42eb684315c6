// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cbert/params.hpp"

namespace cbert {

inline constexpr double kLayerNormEps = 1e-12;
inline constexpr double kInitStd = 0.02;

// Encoder shape and input-channel switches. Presets: base (12, 768, 12),
// large (24, 1024, 16), toy (2, 16, 2).
struct ModelConfig {
    int layers = 2;
    int hidden = 16;
    int heads = 2;
    int max_len = 48;
    int vocab_size = 0;
    int pinyin_embed_width = 8;
    double dropout = 0.1;
    bool use_glyph = true;
    bool use_pinyin = true;

    int ff_width() const { return 4 * hidden; }
    int head_dim() const { return hidden / heads; }
    // Number of concatenated sources feeding the fusion layer.
    int fusion_inputs() const { return 1 + (use_glyph ? 1 : 0) + (use_pinyin ? 1 : 0); }

    void validate() const;
};

enum class HeadKind { Classify, Tag };

// Canonical parameter list (name, shape) for a configuration, in
// registration order. num_head_labels == 0 means no finetuning head.
std::vector<std::pair<std::string, std::vector<int>>> param_shapes(const ModelConfig& cfg);
std::vector<std::pair<std::string, std::vector<int>>> head_param_shapes(const ModelConfig& cfg,
                                                                        HeadKind head,
                                                                        int num_labels);

// Fresh parameters: weights ~ N(0, 0.02) from a per-tensor stream derived
// from (seed, tensor name), biases zero, norm gains one. Identical seeds
// give identical parameters regardless of registration order elsewhere.
ParamStore init_params(const ModelConfig& cfg, uint64_t seed);
void add_head_params(ParamStore& store, const ModelConfig& cfg, HeadKind head, int num_labels,
                     uint64_t seed);

// Wide-spread initialization for gradient checking: training-scale init
// leaves some gradients below the finite-difference noise floor, so the
// check would compare rounding error instead of calculus. Weights and
// biases ~ N(0, 0.3), gains 1 + N(0, 0.2).
ParamStore init_params_spread(const ModelConfig& cfg, uint64_t seed);

// Checks that `store` holds exactly the tensors the config prescribes;
// raises FormatError naming the first mismatched tensor.
void validate_params(const ParamStore& store, const ModelConfig& cfg, HeadKind head,
                     int num_labels, bool has_head);

const char* head_kind_name(HeadKind head);

}  // namespace cbert
