// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "cbert/encoder.hpp"
#include "cbert/fusion.hpp"
#include "cbert/masking.hpp"

namespace cbert {

struct TrainConfig {
    double max_lr = 1e-4;
    int warmup_steps = 20000;
    int total_steps = 500000;
    int batch_size = 4;
    uint64_t seed = 1;
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

// Linear warmup to max_lr at step == warmup_steps, then linear decay to 0
// at step == total_steps.
double lr_at(const TrainConfig& cfg, int step);

// Adam with decoupled weight decay; biases and norm gains are excluded
// from decay. Parameters that received no gradient this step are left
// untouched (their moment state does not advance).
class AdamOptimizer {
public:
    explicit AdamOptimizer(const TrainConfig& cfg) : cfg_(cfg) {}

    // grads is aligned with the store; an empty tensor means "no gradient".
    void step(ParamStore& params, const std::vector<Tensor>& grads, int step_index);

private:
    TrainConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::vector<int64_t> updates_;
};

bool weight_decay_applies(const std::string& param_name);

// Static lookups a forward pass needs besides the parameters.
struct ModelContext {
    const ModelConfig* config = nullptr;
    const Vocab* vocab = nullptr;
    const GlyphAtlas* atlas = nullptr;
    const PinyinLexicon* pinyin = nullptr;
};

// Mean cross-entropy over all labeled positions of a batch, on the tape.
Value mlm_batch_loss(Tape& tape, const BoundParams& bound, const ModelContext& ctx,
                     std::span<const MaskedBatch> batch, const DropoutCtx& drop);

// One MLM training step over a batch of masked examples: forward,
// cross-entropy over labeled positions (weighted so the result is the
// mean over all labeled positions in the batch), backward, Adam update.
// Returns the loss. Non-finite losses abort with parameter diagnostics.
double mlm_step(ParamStore& params, const ModelContext& ctx, std::span<const MaskedBatch> batch,
                AdamOptimizer& opt, const TrainConfig& train, int step);

// Forward-only MLM logits for one masked example (dropout off).
Tensor mlm_forward_logits(const ParamStore& params, const ModelContext& ctx,
                          const MaskedBatch& batch);

// Fraction of labeled positions whose argmax prediction recovers the
// original character, over a deterministic masking of `examples`.
double mlm_recovery_accuracy(const ParamStore& params, const ModelContext& ctx,
                             const std::vector<TrainingExample>& examples,
                             const MaskingPolicy& policy, uint64_t seed, uint64_t epoch);

// Supervised example for the finetuning heads. Classify: labels has
// exactly one entry (the class). Tag: labels are per position with
// kIgnoreId at specials.
struct LabeledExample {
    std::vector<int> ids;
    std::vector<int> labels;
};

double head_step(ParamStore& params, const ModelContext& ctx, HeadKind head,
                 std::span<const LabeledExample> batch, AdamOptimizer& opt,
                 const TrainConfig& train, int step);

std::vector<int> head_predict(const ParamStore& params, const ModelContext& ctx, HeadKind head,
                              std::span<const int> ids);

// Scans parameters and gradients for non-finite values; returns the names.
std::vector<std::string> non_finite_params(const ParamStore& params);

}  // namespace cbert
