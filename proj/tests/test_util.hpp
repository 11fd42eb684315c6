// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "cbert/tape.hpp"

namespace cbert_test {

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline std::string data_path(const std::string& name) {
    return (std::filesystem::path(CBERT_DATA_DIR) / name).string();
}

inline std::string temp_path(const std::string& name) {
    static const std::string dir = [] {
        const auto d = std::filesystem::temp_directory_path() /
                       ("cbert_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(d);
        return d.string();
    }();
    return (std::filesystem::path(dir) / name).string();
}

// Forward-only scalar evaluation of a single-input op for finite differences.
template <typename Fn>
double eval_scalar(Fn&& fn) {
    cbert::Tape tape;
    return tape.value(fn(tape))[0];
}

}  // namespace cbert_test
