// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cbert/tape.hpp"
#include "cbert/tensor.hpp"

namespace cbert {

// Ordered collection of named parameter tensors. Registration order is
// the canonical order used by the optimizer, checkpoints and gradient
// checks, so it must be deterministic.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t);
    bool has(std::string_view name) const;
    Tensor& at(std::string_view name);
    const Tensor& at(std::string_view name) const;
    int index_of(std::string_view name) const;  // -1 when absent

    size_t size() const { return names_.size(); }
    const std::string& name(size_t i) const { return names_[i]; }
    Tensor& tensor(size_t i) { return tensors_[i]; }
    const Tensor& tensor(size_t i) const { return tensors_[i]; }

    int64_t total_params() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, size_t> index_;
};

// Tape handles for every tensor of a ParamStore, in store order.
struct BoundParams {
    Tape* tape = nullptr;
    const ParamStore* store = nullptr;
    std::vector<Value> values;

    Value operator[](std::string_view name) const;
    Value at_index(size_t i) const { return values[i]; }
};

// Registers every parameter as a tape leaf (with gradient when
// `requires_grad` is set).
BoundParams bind_params(Tape& tape, const ParamStore& store, bool requires_grad = true);

}  // namespace cbert
