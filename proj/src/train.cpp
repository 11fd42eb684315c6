// SPDX-License-Identifier: Apache-2.0
#include "cbert/train.hpp"

#include <cmath>

namespace cbert {

void TrainConfig::validate() const {
    if (max_lr < 0.0) throw ConfigError("train: max_lr must be >= 0");
    if (warmup_steps < 0 || total_steps < 0) throw ConfigError("train: negative step counts");
    if (warmup_steps > total_steps) {
        throw ConfigError("train: warmup_steps (" + std::to_string(warmup_steps) +
                          ") must not exceed total_steps (" + std::to_string(total_steps) + ")");
    }
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

double lr_at(const TrainConfig& cfg, int step) {
    const double warm = cfg.warmup_steps == 0
                            ? 1.0
                            : static_cast<double>(step) / cfg.warmup_steps;
    const double decay = cfg.total_steps == cfg.warmup_steps
                             ? 1.0
                             : static_cast<double>(cfg.total_steps - step) /
                                   (cfg.total_steps - cfg.warmup_steps);
    const double lr = cfg.max_lr * std::min(warm, decay);
    return lr > 0.0 ? lr : 0.0;
}

bool weight_decay_applies(const std::string& param_name) {
    return !ends_with(param_name, ".bias") && !ends_with(param_name, ".gain");
}

void AdamOptimizer::step(ParamStore& params, const std::vector<Tensor>& grads, int step_index) {
    if (grads.size() != params.size()) {
        throw Error("adam: gradient list does not match parameter store");
    }
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        updates_.assign(params.size(), 0);
    }
    const double lr = lr_at(cfg_, step_index);
    for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& g = grads[i];
        if (g.empty()) continue;
        Tensor& p = params.tensor(i);
        if (!g.same_shape(p)) {
            throw ShapeError("adam: gradient shape " + g.shape_str() + " for '" +
                             params.name(i) + "' does not match " + p.shape_str());
        }
        if (m_[i].empty()) {
            m_[i] = Tensor::zeros(p.shape());
            v_[i] = Tensor::zeros(p.shape());
        }
        const int64_t t = ++updates_[i];
        const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t));
        const bool decay = cfg_.weight_decay > 0.0 && weight_decay_applies(params.name(i));
        const size_t n = static_cast<size_t>(p.numel());
        for (size_t j = 0; j < n; ++j) {
            m_[i][j] = cfg_.adam_beta1 * m_[i][j] + (1.0 - cfg_.adam_beta1) * g[j];
            v_[i][j] = cfg_.adam_beta2 * v_[i][j] + (1.0 - cfg_.adam_beta2) * g[j] * g[j];
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            double update = mhat / (std::sqrt(vhat) + cfg_.adam_eps);
            if (decay) update += cfg_.weight_decay * p[j];
            p[j] -= lr * update;
        }
    }
}

// Assembled from per-example means weighted by their label counts.
Value mlm_batch_loss(Tape& tape, const BoundParams& bound, const ModelContext& ctx,
                     std::span<const MaskedBatch> batch, const DropoutCtx& drop) {
    int64_t total_labeled = 0;
    std::vector<int64_t> counts;
    counts.reserve(batch.size());
    for (const MaskedBatch& b : batch) {
        int64_t n = 0;
        for (int label : b.labels) {
            if (label != kIgnoreId) ++n;
        }
        counts.push_back(n);
        total_labeled += n;
    }
    if (total_labeled == 0) {
        throw Error("mlm loss: batch has no labeled positions");
    }
    Value loss;
    for (size_t i = 0; i < batch.size(); ++i) {
        if (counts[i] == 0) continue;
        const MaskedBatch& b = batch[i];
        const EmbeddingInputs inputs =
            derive_embedding_inputs(b.input_ids, *ctx.vocab, *ctx.pinyin);
        Value emb = embed_sequence(tape, bound, *ctx.config, *ctx.atlas, inputs);
        Value hidden = encoder_forward(tape, bound, *ctx.config, emb, b.attention_mask, drop);
        Value logits = mlm_logits(tape, bound, *ctx.config, hidden);
        Value ce = tape.cross_entropy_masked(logits, b.labels, kIgnoreId);
        Value weighted =
            tape.scale(ce, static_cast<double>(counts[i]) / static_cast<double>(total_labeled));
        loss = loss.valid() ? tape.add(loss, weighted) : weighted;
    }
    return loss;
}

namespace {

std::vector<Tensor> collect_grads(const Tape& tape, const BoundParams& bound) {
    std::vector<Tensor> grads(bound.values.size());
    for (size_t i = 0; i < bound.values.size(); ++i) {
        if (const Tensor* g = tape.maybe_grad(bound.values[i])) grads[i] = *g;
    }
    return grads;
}

[[noreturn]] void rethrow_with_param_diagnostics(const NumericError& e,
                                                 const ParamStore& params) {
    std::string msg = e.what();
    const auto bad = non_finite_params(params);
    if (!bad.empty()) {
        msg += "; non-finite parameters:";
        for (const auto& name : bad) msg += " " + name;
    }
    throw NumericError(msg);
}

}  // namespace

std::vector<std::string> non_finite_params(const ParamStore& params) {
    std::vector<std::string> bad;
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params.tensor(i).all_finite()) bad.push_back(params.name(i));
    }
    return bad;
}

double mlm_step(ParamStore& params, const ModelContext& ctx, std::span<const MaskedBatch> batch,
                AdamOptimizer& opt, const TrainConfig& train, int step) {
    try {
        Tape tape;
        BoundParams bound = bind_params(tape, params);
        const DropoutCtx drop =
            DropoutCtx::train(ctx.config->dropout, train.seed, static_cast<uint64_t>(step));
        Value loss = mlm_batch_loss(tape, bound, ctx, batch, drop);
        tape.backward(loss);
        opt.step(params, collect_grads(tape, bound), step);
        return tape.value(loss)[0];
    } catch (const NumericError& e) {
        rethrow_with_param_diagnostics(e, params);
    }
}

Tensor mlm_forward_logits(const ParamStore& params, const ModelContext& ctx,
                          const MaskedBatch& batch) {
    Tape tape;
    BoundParams bound = bind_params(tape, params, /*requires_grad=*/false);
    const EmbeddingInputs inputs =
        derive_embedding_inputs(batch.input_ids, *ctx.vocab, *ctx.pinyin);
    Value emb = embed_sequence(tape, bound, *ctx.config, *ctx.atlas, inputs);
    Value hidden = encoder_forward(tape, bound, *ctx.config, emb, batch.attention_mask,
                                   DropoutCtx::off());
    Value logits = mlm_logits(tape, bound, *ctx.config, hidden);
    return tape.value(logits);
}

double mlm_recovery_accuracy(const ParamStore& params, const ModelContext& ctx,
                             const std::vector<TrainingExample>& examples,
                             const MaskingPolicy& policy, uint64_t seed, uint64_t epoch) {
    int64_t labeled = 0;
    int64_t correct = 0;
    for (size_t i = 0; i < examples.size(); ++i) {
        CounterRng rng(masking_stream_id(seed, epoch, i));
        const MaskedBatch batch = apply_masking(examples[i], policy, *ctx.vocab, rng);
        bool any = false;
        for (int label : batch.labels) {
            if (label != kIgnoreId) {
                any = true;
                break;
            }
        }
        if (!any) continue;
        const Tensor logits = mlm_forward_logits(params, ctx, batch);
        const std::vector<int> pred = argmax_rows(logits);
        for (size_t t = 0; t < batch.labels.size(); ++t) {
            if (batch.labels[t] == kIgnoreId) continue;
            ++labeled;
            if (pred[t] == batch.labels[t]) ++correct;
        }
    }
    if (labeled == 0) return 0.0;
    return static_cast<double>(correct) / static_cast<double>(labeled);
}

double head_step(ParamStore& params, const ModelContext& ctx, HeadKind head,
                 std::span<const LabeledExample> batch, AdamOptimizer& opt,
                 const TrainConfig& train, int step) {
    try {
        Tape tape;
        BoundParams bound = bind_params(tape, params);
        const DropoutCtx drop =
            DropoutCtx::train(ctx.config->dropout, train.seed, static_cast<uint64_t>(step));
        int64_t total = 0;
        std::vector<int64_t> counts;
        for (const LabeledExample& ex : batch) {
            int64_t n = 0;
            for (int label : ex.labels) {
                if (label != kIgnoreId) ++n;
            }
            counts.push_back(n);
            total += n;
        }
        if (total == 0) throw Error("head loss: batch has no labeled positions");
        Value loss;
        for (size_t i = 0; i < batch.size(); ++i) {
            if (counts[i] == 0) continue;
            const LabeledExample& ex = batch[i];
            const EmbeddingInputs inputs =
                derive_embedding_inputs(ex.ids, *ctx.vocab, *ctx.pinyin);
            const std::vector<uint8_t> mask(ex.ids.size(), 1);
            Value emb = embed_sequence(tape, bound, *ctx.config, *ctx.atlas, inputs);
            Value hidden = encoder_forward(tape, bound, *ctx.config, emb, mask, drop);
            Value logits;
            if (head == HeadKind::Classify) {
                Value vec = classify_logits(tape, bound, hidden);  // [K]
                logits = tape.reshape(vec, {1, tape.value(vec).extent(0)});
            } else {
                logits = tag_logits(tape, bound, hidden);
            }
            Value ce = tape.cross_entropy_masked(logits, ex.labels, kIgnoreId);
            Value weighted =
                tape.scale(ce, static_cast<double>(counts[i]) / static_cast<double>(total));
            loss = loss.valid() ? tape.add(loss, weighted) : weighted;
        }
        tape.backward(loss);
        opt.step(params, collect_grads(tape, bound), step);
        return tape.value(loss)[0];
    } catch (const NumericError& e) {
        rethrow_with_param_diagnostics(e, params);
    }
}

std::vector<int> head_predict(const ParamStore& params, const ModelContext& ctx, HeadKind head,
                              std::span<const int> ids) {
    Tape tape;
    BoundParams bound = bind_params(tape, params, /*requires_grad=*/false);
    const EmbeddingInputs inputs = derive_embedding_inputs(ids, *ctx.vocab, *ctx.pinyin);
    const std::vector<uint8_t> mask(ids.size(), 1);
    Value emb = embed_sequence(tape, bound, *ctx.config, *ctx.atlas, inputs);
    Value hidden = encoder_forward(tape, bound, *ctx.config, emb, mask, DropoutCtx::off());
    Value logits = head == HeadKind::Classify ? classify_logits(tape, bound, hidden)
                                              : tag_logits(tape, bound, hidden);
    return argmax_rows(tape.value(logits));
}

}  // namespace cbert
