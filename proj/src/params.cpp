// SPDX-License-Identifier: Apache-2.0
#include "cbert/params.hpp"

namespace cbert {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
    if (index_.count(name) != 0) throw Error("param '" + name + "' registered twice");
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    return tensors_.back();
}

bool ParamStore::has(std::string_view name) const {
    return index_.count(std::string(name)) != 0;
}

int ParamStore::index_of(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? -1 : static_cast<int>(it->second);
}

Tensor& ParamStore::at(std::string_view name) {
    const int i = index_of(name);
    if (i < 0) throw Error("unknown param '" + std::string(name) + "'");
    return tensors_[static_cast<size_t>(i)];
}

const Tensor& ParamStore::at(std::string_view name) const {
    const int i = index_of(name);
    if (i < 0) throw Error("unknown param '" + std::string(name) + "'");
    return tensors_[static_cast<size_t>(i)];
}

int64_t ParamStore::total_params() const {
    int64_t n = 0;
    for (const Tensor& t : tensors_) n += t.numel();
    return n;
}

Value BoundParams::operator[](std::string_view name) const {
    const int i = store->index_of(name);
    if (i < 0) throw Error("unknown param '" + std::string(name) + "'");
    return values[static_cast<size_t>(i)];
}

BoundParams bind_params(Tape& tape, const ParamStore& store, bool requires_grad) {
    BoundParams bound;
    bound.tape = &tape;
    bound.store = &store;
    bound.values.reserve(store.size());
    for (size_t i = 0; i < store.size(); ++i) {
        Tensor t = store.tensor(i);
        t.requires_grad = requires_grad;
        bound.values.push_back(tape.leaf(std::move(t)));
    }
    return bound;
}

}  // namespace cbert
