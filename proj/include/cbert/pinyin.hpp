// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cbert/tape.hpp"

namespace cbert {

inline constexpr int kPinyinLen = 8;
inline constexpr int kPinyinConvWidth = 2;
// Symbol table height. Indices 0-25 are letters a-z, 26-30 the tone
// tokens 1-5, 31 the pad '-'; row 32 is reserved and never produced.
inline constexpr int kPinyinSymbols = 33;
inline constexpr char kPinyinPad = '-';

int pinyin_symbol_index(char c);

// Fixed-length-8 romanization: a contiguous letter prefix, exactly one
// tone digit, then '-' pads -- or the all-pad sequence when a character
// has no reading.
struct PinyinSequence {
    std::array<char, kPinyinLen> symbols;

    static PinyinSequence all_pad();
    static PinyinSequence from_reading(const std::optional<std::string>& reading);

    std::array<int, kPinyinLen> symbol_ids() const;
    std::string str() const { return std::string(symbols.begin(), symbols.end()); }
    bool operator==(const PinyinSequence&) const = default;
};

// Validates "letters{1..7} + tone digit 1-5" with letters in [a-z]
// ('v' stands for the u-umlaut). Raises FormatError otherwise.
void validate_reading(const std::string& reading);

struct PinyinRule {
    std::vector<uint32_t> context;
    int offset = 0;  // position of the target character within the context
    uint32_t codepoint = 0;
    std::string reading;
};

// Dictionary plus ordered context-override rules. Rules are consulted
// first, in file order; the first match wins, then the default reading.
class PinyinLexicon {
public:
    void add_default(uint32_t codepoint, const std::string& reading);
    void add_rule(const std::string& context_utf8, int offset, uint32_t codepoint,
                  const std::string& reading);

    std::optional<std::string> resolve(std::span<const uint32_t> text, size_t index) const;
    std::optional<std::string> default_reading(uint32_t codepoint) const;

    size_t default_count() const { return defaults_.size(); }
    size_t rule_count() const { return rules_.size(); }
    const std::unordered_map<uint32_t, std::string>& defaults() const { return defaults_; }

    // Lexicon file: UTF-8 lines "U+XXXX<TAB>reading" for defaults and
    // "#rule<TAB>context<TAB>offset<TAB>U+XXXX<TAB>reading" for rules;
    // other lines starting with '#' are comments.
    static PinyinLexicon load(const std::string& path);
    static PinyinLexicon parse(const std::string& text, const std::string& source = "");

private:
    std::unordered_map<uint32_t, std::string> defaults_;
    std::vector<PinyinRule> rules_;
};

// Embeds the 8 symbols through the symbol table, applies the width-2
// convolution over the 7 windows and max-pools into a single vector, so
// the output width is independent of the reading length.
Value pinyin_embed(Tape& tape, Value symbol_table, Value filters, Value bias,
                   const PinyinSequence& seq);

}  // namespace cbert
