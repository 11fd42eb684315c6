// SPDX-License-Identifier: Apache-2.0
#include "cbert/vocab.hpp"

#include <algorithm>

#include "cbert/io.hpp"

namespace cbert {

Vocab Vocab::from_codepoints(std::vector<uint32_t> codepoints) {
    std::sort(codepoints.begin(), codepoints.end());
    codepoints.erase(std::unique(codepoints.begin(), codepoints.end()), codepoints.end());
    Vocab v;
    v.codepoints_ = std::move(codepoints);
    for (size_t i = 0; i < v.codepoints_.size(); ++i) {
        v.to_id_[v.codepoints_[i]] = static_cast<int>(i) + kNumSpecial;
    }
    return v;
}

Vocab Vocab::from_corpus_text(const std::string& text) {
    std::vector<uint32_t> cps;
    for (uint32_t cp : utf8_decode(text)) {
        if (cp == '\n' || cp == '\r' || cp == ' ' || cp == '\t') continue;
        cps.push_back(cp);
    }
    return from_codepoints(std::move(cps));
}

Vocab Vocab::from_corpus_file(const std::string& path) {
    return from_corpus_text(read_file(path));
}

Vocab Vocab::from_chars_utf8(const std::string& chars) {
    std::vector<uint32_t> cps = utf8_decode(chars);
    Vocab v = from_codepoints(cps);
    if (v.codepoints_ != cps) {
        throw FormatError("vocab chars are not sorted unique codepoints");
    }
    return v;
}

int Vocab::id_of(uint32_t codepoint) const {
    const auto it = to_id_.find(codepoint);
    return it == to_id_.end() ? kUnk : it->second;
}

uint32_t Vocab::codepoint_of(int id) const {
    if (id < 0 || id >= size()) {
        throw Error("vocab: id " + std::to_string(id) + " out of range [0," +
                    std::to_string(size()) + ")");
    }
    if (id < kNumSpecial) return 0;
    return codepoints_[static_cast<size_t>(id - kNumSpecial)];
}

std::string Vocab::chars_utf8() const { return utf8_encode(codepoints_); }

const char* Vocab::special_name(int id) {
    switch (id) {
        case kPad: return "[PAD]";
        case kUnk: return "[UNK]";
        case kCls: return "[CLS]";
        case kSep: return "[SEP]";
        case kMask: return "[MASK]";
        default: return "";
    }
}

}  // namespace cbert
