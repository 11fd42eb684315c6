// SPDX-License-Identifier: Apache-2.0
#include "cbert/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cbert/rng.hpp"

namespace cbert {

namespace {

double eval_loss(ParamStore& params, const LossBuilder& build) {
    Tape tape;
    BoundParams bound = bind_params(tape, params, /*requires_grad=*/false);
    const Value loss = build(tape, bound);
    const Tensor& out = tape.value(loss);
    if (out.numel() != 1) {
        throw ShapeError("grad_check: loss must be scalar, got " + out.shape_str());
    }
    return out[0];
}

std::vector<int64_t> component_sample(int64_t numel, const GradCheckOptions& opts,
                                      size_t tensor_index) {
    std::vector<int64_t> idx;
    if (opts.max_components_per_tensor <= 0 || numel <= opts.max_components_per_tensor) {
        idx.resize(static_cast<size_t>(numel));
        for (int64_t i = 0; i < numel; ++i) idx[static_cast<size_t>(i)] = i;
        return idx;
    }
    // One index per stratum so the sample covers the whole tensor.
    CounterRng rng = CounterRng::derive(
        {0x67636B73ull, opts.sample_seed, static_cast<uint64_t>(tensor_index)});
    const int64_t k = opts.max_components_per_tensor;
    idx.reserve(static_cast<size_t>(k));
    for (int64_t s = 0; s < k; ++s) {
        const int64_t lo = s * numel / k;
        const int64_t hi = (s + 1) * numel / k;
        idx.push_back(lo + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(hi - lo))));
    }
    return idx;
}

}  // namespace

GradCheckReport grad_check(ParamStore& params, const LossBuilder& build,
                           const GradCheckOptions& opts) {
    if (opts.eps < 1e-6 || opts.eps > 1e-4) {
        throw ConfigError("grad_check: eps must lie in [1e-6, 1e-4], got " +
                          format_double(opts.eps));
    }

    // Analytic pass.
    std::vector<Tensor> analytic(params.size());
    {
        Tape tape;
        BoundParams bound = bind_params(tape, params, /*requires_grad=*/true);
        const Value loss = build(tape, bound);
        const Tensor& out = tape.value(loss);
        if (out.numel() != 1) {
            throw ShapeError("grad_check: loss must be scalar, got " + out.shape_str());
        }
        tape.backward(loss);
        for (size_t i = 0; i < params.size(); ++i) {
            analytic[i] = tape.grad_or_zeros(bound.values[i]);
        }
    }
    if (!opts.corrupt_param.empty()) {
        const int i = params.index_of(opts.corrupt_param);
        if (i < 0) throw ConfigError("grad_check: unknown corrupt_param '" + opts.corrupt_param + "'");
        analytic[static_cast<size_t>(i)][0] += opts.corrupt_amount;
    }

    GradCheckReport report;
    for (size_t i = 0; i < params.size(); ++i) {
        GradCheckEntry entry;
        entry.name = params.name(i);
        Tensor& p = params.tensor(i);
        const auto sample = component_sample(p.numel(), opts, i);
        for (int64_t j : sample) {
            const size_t sj = static_cast<size_t>(j);
            const double saved = p[sj];
            p[sj] = saved + opts.eps;
            const double up = eval_loss(params, build);
            p[sj] = saved - opts.eps;
            const double down = eval_loss(params, build);
            p[sj] = saved;
            const double numeric = (up - down) / (2.0 * opts.eps);
            const double a = analytic[i][sj];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            ++entry.checked;
            if (rel > entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.worst_index = j;
                entry.analytic = a;
                entry.numeric = numeric;
            }
        }
        if (entry.max_rel_err > report.max_rel_err) {
            report.max_rel_err = entry.max_rel_err;
            report.worst_param = entry.name;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace cbert
