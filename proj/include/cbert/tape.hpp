// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cbert/tensor.hpp"

namespace cbert {

// Handle to a node on a Tape.
struct Value {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Nodes are appended in execution order, which
// is therefore a valid topological order; backward() walks them once in
// reverse. A Tape is confined to a single thread and is discarded after
// the step that built it.
//
// Every forward op validates shapes up front and checks its output for
// non-finite values (NaN/Inf anywhere is an error state, raised as
// NumericError naming the op).
class Tape {
public:
    // Leaf holding a copy of `t`; participates in backward iff
    // t.requires_grad is set.
    Value leaf(Tensor t);

    // Leaf that never receives gradient.
    Value constant(Tensor t);

    // Valid for the tape's lifetime (nodes are never reallocated).
    const Tensor& value(Value v) const { return node(v).out; }

    // Gradient of the last backward() root w.r.t. node v, or nullptr if no
    // gradient reached it.
    const Tensor* maybe_grad(Value v) const;
    Tensor grad_or_zeros(Value v) const;

    // Seeds d(root)/d(root) = 1 and accumulates gradients for every
    // reachable node that requires grad. `root` must be scalar.
    void backward(Value root);

    size_t size() const { return nodes_.size(); }

    // ---- ops ----
    Value add(Value a, Value b);                 // same shape
    Value mul(Value a, Value b);                 // elementwise, same shape
    Value scale(Value a, double c);
    Value add_row(Value m, Value row);           // [T x N] + [N], broadcast over rows
    Value matmul(Value a, Value b);              // [m x k] . [k x n]
    Value transpose(Value a);                    // 2-D
    Value softmax(Value a, int axis);
    Value layer_norm(Value x, Value gain, Value bias, double eps);
    Value gelu(Value x);                         // x * Phi(x), exact erf form
    Value conv1d_maxpool(Value seq, Value filters, Value bias, int width);
    Value cross_entropy_masked(Value logits, std::span<const int> labels, int ignore_id);
    Value gather_rows(Value table, std::span<const int> ids);
    Value concat_last(std::span<const Value> parts);
    Value slice_cols(Value m, int col_begin, int col_end);
    Value stack_rows(std::span<const Value> rows);  // k vectors [N] -> [k x N]
    Value reshape(Value a, std::vector<int> shape);
    Value sum_all(Value a);

private:
    struct Node {
        std::string op;
        std::vector<int32_t> inputs;
        Tensor out;
        bool requires_grad = false;
        // Accumulates input gradients given the output gradient.
        std::function<void(Tape&, const Tensor&)> backward;
    };

    const Node& node(Value v) const;
    Value push(std::string op, std::vector<int32_t> inputs, Tensor out,
               std::function<void(Tape&, const Tensor&)> bw);
    bool any_requires_grad(const std::vector<int32_t>& inputs) const;
    void accumulate(int32_t id, const Tensor& delta);
    void accumulate_scaled(int32_t id, const Tensor& delta, double c);

    std::deque<Node> nodes_;  // deque: value() references stay valid as ops push
    std::vector<Tensor> grads_;
};

}  // namespace cbert
