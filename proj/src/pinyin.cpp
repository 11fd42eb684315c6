// SPDX-License-Identifier: Apache-2.0
#include "cbert/pinyin.hpp"

#include <fstream>

#include "cbert/common.hpp"
#include "cbert/io.hpp"

namespace cbert {

int pinyin_symbol_index(char c) {
    if (c >= 'a' && c <= 'z') return c - 'a';
    if (c >= '1' && c <= '5') return 26 + (c - '1');
    if (c == kPinyinPad) return 31;
    throw FormatError(std::string("pinyin: symbol '") + c + "' is not in the alphabet");
}

PinyinSequence PinyinSequence::all_pad() {
    PinyinSequence s;
    s.symbols.fill(kPinyinPad);
    return s;
}

void validate_reading(const std::string& reading) {
    if (reading.size() < 2) {
        throw FormatError("pinyin: reading '" + reading + "' too short (need letters + tone)");
    }
    if (reading.size() > kPinyinLen) {
        throw FormatError("pinyin: reading '" + reading + "' exceeds " +
                          std::to_string(kPinyinLen - 1) + " letters + tone");
    }
    const char tone = reading.back();
    if (tone < '1' || tone > '5') {
        throw FormatError("pinyin: reading '" + reading + "' must end with tone digit 1-5");
    }
    for (size_t i = 0; i + 1 < reading.size(); ++i) {
        const char c = reading[i];
        if (c < 'a' || c > 'z') {
            throw FormatError("pinyin: reading '" + reading + "' has non-letter '" +
                              std::string(1, c) + "'");
        }
    }
}

PinyinSequence PinyinSequence::from_reading(const std::optional<std::string>& reading) {
    if (!reading.has_value()) return all_pad();
    validate_reading(*reading);
    PinyinSequence s = all_pad();
    for (size_t i = 0; i < reading->size(); ++i) s.symbols[i] = (*reading)[i];
    return s;
}

std::array<int, kPinyinLen> PinyinSequence::symbol_ids() const {
    std::array<int, kPinyinLen> ids{};
    for (int i = 0; i < kPinyinLen; ++i) ids[static_cast<size_t>(i)] = pinyin_symbol_index(symbols[static_cast<size_t>(i)]);
    return ids;
}

void PinyinLexicon::add_default(uint32_t codepoint, const std::string& reading) {
    validate_reading(reading);
    defaults_[codepoint] = reading;
}

void PinyinLexicon::add_rule(const std::string& context_utf8, int offset, uint32_t codepoint,
                             const std::string& reading) {
    validate_reading(reading);
    PinyinRule rule;
    rule.context = utf8_decode(context_utf8);
    rule.offset = offset;
    rule.codepoint = codepoint;
    rule.reading = reading;
    if (rule.context.empty()) throw FormatError("pinyin rule: empty context");
    if (offset < 0 || static_cast<size_t>(offset) >= rule.context.size()) {
        throw FormatError("pinyin rule: offset " + std::to_string(offset) +
                          " outside context of length " + std::to_string(rule.context.size()));
    }
    if (rule.context[static_cast<size_t>(offset)] != codepoint) {
        throw FormatError("pinyin rule: context character at offset " + std::to_string(offset) +
                          " is not " + codepoint_label(codepoint));
    }
    rules_.push_back(std::move(rule));
}

std::optional<std::string> PinyinLexicon::default_reading(uint32_t codepoint) const {
    const auto it = defaults_.find(codepoint);
    if (it == defaults_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> PinyinLexicon::resolve(std::span<const uint32_t> text,
                                                  size_t index) const {
    if (index >= text.size()) {
        throw Error("pinyin resolve: index " + std::to_string(index) + " out of range");
    }
    const uint32_t cp = text[index];
    for (const PinyinRule& rule : rules_) {
        if (rule.codepoint != cp) continue;
        const size_t off = static_cast<size_t>(rule.offset);
        if (index < off) continue;
        const size_t start = index - off;
        if (start + rule.context.size() > text.size()) continue;
        bool match = true;
        for (size_t j = 0; j < rule.context.size(); ++j) {
            if (text[start + j] != rule.context[j]) {
                match = false;
                break;
            }
        }
        if (match) return rule.reading;
    }
    return default_reading(cp);
}

PinyinLexicon PinyinLexicon::parse(const std::string& text, const std::string& source) {
    PinyinLexicon lex;
    const std::string where = source.empty() ? "pinyin lexicon" : source;
    size_t line_no = 0;
    for (const std::string& raw_line : split(text, '\n')) {
        ++line_no;
        const std::string line = strip(raw_line);
        if (line.empty()) continue;
        try {
            if (line.rfind("#rule\t", 0) == 0) {
                const auto fields = split(line, '\t');
                if (fields.size() != 5) {
                    throw FormatError("rule needs 5 tab-separated fields, got " +
                                      std::to_string(fields.size()));
                }
                const int offset = std::stoi(fields[2]);
                lex.add_rule(fields[1], offset, parse_codepoint_label(fields[3]), fields[4]);
            } else if (line[0] == '#') {
                continue;  // comment
            } else {
                const auto fields = split(line, '\t');
                if (fields.size() != 2) {
                    throw FormatError("default needs 'U+XXXX<TAB>reading', got '" + line + "'");
                }
                lex.add_default(parse_codepoint_label(fields[0]), fields[1]);
            }
        } catch (const std::exception& e) {
            throw FormatError(where + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return lex;
}

PinyinLexicon PinyinLexicon::load(const std::string& path) {
    return parse(read_file(path), path);
}

Value pinyin_embed(Tape& tape, Value symbol_table, Value filters, Value bias,
                   const PinyinSequence& seq) {
    const auto ids = seq.symbol_ids();
    Value rows = tape.gather_rows(symbol_table, std::span<const int>(ids.data(), ids.size()));
    return tape.conv1d_maxpool(rows, filters, bias, kPinyinConvWidth);
}

}  // namespace cbert
