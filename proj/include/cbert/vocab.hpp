// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cbert/common.hpp"

namespace cbert {

// Character vocabulary. Special tokens occupy fixed ids; every other id
// maps bijectively to a codepoint, assigned in ascending codepoint order.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumSpecial = 5;

    static Vocab from_codepoints(std::vector<uint32_t> codepoints);  // deduped + sorted
    static Vocab from_corpus_text(const std::string& text);
    static Vocab from_corpus_file(const std::string& path);
    // Inverse of chars_utf8().
    static Vocab from_chars_utf8(const std::string& chars);

    int size() const { return kNumSpecial + static_cast<int>(codepoints_.size()); }
    int id_of(uint32_t codepoint) const;          // kUnk when absent
    bool contains(uint32_t codepoint) const { return to_id_.count(codepoint) != 0; }
    // 0 for special ids (they have no character form).
    uint32_t codepoint_of(int id) const;
    bool is_special(int id) const { return id >= 0 && id < kNumSpecial; }
    std::string chars_utf8() const;

    static const char* special_name(int id);

private:
    std::vector<uint32_t> codepoints_;  // index i <-> id i + kNumSpecial
    std::unordered_map<uint32_t, int> to_id_;
};

}  // namespace cbert
