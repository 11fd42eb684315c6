// SPDX-License-Identifier: Apache-2.0
#include "cbert/masking.hpp"

#include <algorithm>
#include <cmath>

#include "cbert/io.hpp"

namespace cbert {

void WordLexicon::add(const std::vector<uint32_t>& word) {
    if (word.empty()) return;
    words_.insert(std::u32string(word.begin(), word.end()));
    max_len_ = std::max(max_len_, word.size());
}

bool WordLexicon::contains(std::span<const uint32_t> word) const {
    return words_.count(std::u32string(word.begin(), word.end())) != 0;
}

WordLexicon WordLexicon::parse(const std::string& text) {
    WordLexicon lex;
    for (const std::string& raw : split(text, '\n')) {
        const std::string line = strip(raw);
        if (line.empty() || line[0] == '#') continue;
        lex.add(utf8_decode(line));
    }
    return lex;
}

WordLexicon WordLexicon::load(const std::string& path) { return parse(read_file(path)); }

SegmentedSentence segment(std::span<const uint32_t> text, const WordLexicon& words,
                          const Vocab& vocab) {
    SegmentedSentence out;
    out.ids.reserve(text.size());
    out.codepoints.assign(text.begin(), text.end());
    for (uint32_t cp : text) out.ids.push_back(vocab.id_of(cp));

    size_t pos = 0;
    while (pos < text.size()) {
        size_t best = 1;
        const size_t longest = std::min(words.max_word_len(), text.size() - pos);
        for (size_t len = longest; len >= 2; --len) {
            if (words.contains(text.subspan(pos, len))) {
                best = len;
                break;
            }
        }
        out.word_spans.push_back(
            {static_cast<int>(pos), static_cast<int>(pos + best)});
        pos += best;
    }
    return out;
}

void MaskingPolicy::validate() const {
    const double branch_sum = mask_frac + random_frac + keep_frac;
    if (std::abs(branch_sum - 1.0) > 1e-12) {
        throw ConfigError("masking policy: mask/random/keep fractions must sum to 1, got " +
                          format_double(branch_sum));
    }
    const auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in01(wwm_prob) || !in01(select_prob) || !in01(mask_frac) || !in01(random_frac) ||
        !in01(keep_frac) || !in01(packed_prob)) {
        throw ConfigError("masking policy: probabilities must lie in [0,1]");
    }
    if (max_len < 3) throw ConfigError("masking policy: max_len must be >= 3");
}

namespace {

// Wraps body tokens as [CLS] body [SEP], shifting spans by one.
TrainingExample wrap_example(const std::vector<int>& body_ids,
                             const std::vector<Span>& body_spans) {
    TrainingExample ex;
    ex.ids.reserve(body_ids.size() + 2);
    ex.ids.push_back(Vocab::kCls);
    ex.ids.insert(ex.ids.end(), body_ids.begin(), body_ids.end());
    ex.ids.push_back(Vocab::kSep);
    ex.word_spans.reserve(body_spans.size());
    for (const Span& s : body_spans) ex.word_spans.push_back({s.begin + 1, s.end + 1});
    return ex;
}

// Splits an oversized sentence into chunks of at most `budget` characters,
// cutting word spans at chunk boundaries.
std::vector<SegmentedSentence> split_oversized(const SegmentedSentence& s, int budget) {
    std::vector<SegmentedSentence> chunks;
    const int n = static_cast<int>(s.ids.size());
    for (int start = 0; start < n; start += budget) {
        const int stop = std::min(n, start + budget);
        SegmentedSentence c;
        c.ids.assign(s.ids.begin() + start, s.ids.begin() + stop);
        c.codepoints.assign(s.codepoints.begin() + start, s.codepoints.begin() + stop);
        for (const Span& w : s.word_spans) {
            const int b = std::max(w.begin, start);
            const int e = std::min(w.end, stop);
            if (b < e) c.word_spans.push_back({b - start, e - start});
        }
        chunks.push_back(std::move(c));
    }
    return chunks;
}

}  // namespace

std::vector<TrainingExample> build_examples(const std::vector<SegmentedSentence>& sentences,
                                            const MaskingPolicy& policy, CounterRng& rng,
                                            BuildStats* stats) {
    policy.validate();
    const int budget = policy.max_len - 2;  // room for [CLS]/[SEP]

    std::vector<SegmentedSentence> normalized;
    normalized.reserve(sentences.size());
    for (const SegmentedSentence& s : sentences) {
        if (s.ids.empty()) continue;
        if (static_cast<int>(s.ids.size()) > budget) {
            for (auto& c : split_oversized(s, budget)) normalized.push_back(std::move(c));
        } else {
            normalized.push_back(s);
        }
    }

    std::vector<TrainingExample> out;
    size_t i = 0;
    while (i < normalized.size()) {
        const bool packed = rng.next_unit() < policy.packed_prob;
        if (stats != nullptr) {
            if (packed) {
                ++stats->packed_draws;
            } else {
                ++stats->single_draws;
            }
        }
        std::vector<int> body;
        std::vector<Span> spans;
        const auto append = [&](const SegmentedSentence& s) {
            const int base = static_cast<int>(body.size());
            body.insert(body.end(), s.ids.begin(), s.ids.end());
            for (const Span& w : s.word_spans) spans.push_back({w.begin + base, w.end + base});
        };
        append(normalized[i]);
        ++i;
        if (packed) {
            while (i < normalized.size() &&
                   body.size() + normalized[i].ids.size() <= static_cast<size_t>(budget)) {
                append(normalized[i]);
                ++i;
            }
        }
        out.push_back(wrap_example(body, spans));
    }
    return out;
}

MaskedBatch apply_masking(const TrainingExample& example, const MaskingPolicy& policy,
                          const Vocab& vocab, CounterRng& rng) {
    const int t_len = static_cast<int>(example.ids.size());
    MaskedBatch batch;
    batch.input_ids = example.ids;
    batch.labels.assign(static_cast<size_t>(t_len), kIgnoreId);
    batch.attention_mask.assign(static_cast<size_t>(t_len), 1);
    batch.stream_id = rng.key();

    const int content_chars = vocab.size() - Vocab::kNumSpecial;
    if (content_chars <= 0) throw ConfigError("apply_masking: vocab has no characters");

    const bool use_wwm = rng.next_unit() < policy.wwm_prob;
    batch.stats.used_wwm = use_wwm;

    // One unit = one word span under WWM, one character under CM.
    std::vector<Span> units;
    if (use_wwm) {
        units = example.word_spans;
    } else {
        for (int t = 0; t < t_len; ++t) {
            if (!vocab.is_special(example.ids[static_cast<size_t>(t)])) units.push_back({t, t + 1});
        }
    }

    for (const Span& unit : units) {
        ++batch.stats.units_total;
        if (rng.next_unit() >= policy.select_prob) continue;
        ++batch.stats.units_selected;
        const double branch = rng.next_unit();
        enum class Branch { Mask, Random, Keep } b;
        if (branch < policy.mask_frac) {
            b = Branch::Mask;
            ++batch.stats.branch_mask;
        } else if (branch < policy.mask_frac + policy.random_frac) {
            b = Branch::Random;
            ++batch.stats.branch_random;
        } else {
            b = Branch::Keep;
            ++batch.stats.branch_keep;
        }
        for (int t = unit.begin; t < unit.end; ++t) {
            const size_t idx = static_cast<size_t>(t);
            if (vocab.is_special(example.ids[idx])) {
                throw Error("apply_masking: word span covers a special token");
            }
            batch.labels[idx] = example.ids[idx];
            switch (b) {
                case Branch::Mask:
                    batch.input_ids[idx] = Vocab::kMask;
                    break;
                case Branch::Random:
                    batch.input_ids[idx] =
                        Vocab::kNumSpecial +
                        static_cast<int>(rng.next_below(static_cast<uint64_t>(content_chars)));
                    break;
                case Branch::Keep:
                    break;
            }
        }
    }
    return batch;
}

uint64_t masking_stream_id(uint64_t seed, uint64_t epoch, uint64_t example_index) {
    return CounterRng::derive_key({0x6D61736Bull, seed, epoch, example_index});
}

MaskedBatch EpochStream::batch_at(size_t index) const {
    if (index >= examples_->size()) throw Error("epoch stream: index out of range");
    CounterRng rng(masking_stream_id(seed_, epoch_, index));
    return apply_masking((*examples_)[index], *policy_, *vocab_, rng);
}

std::vector<std::vector<uint32_t>> corpus_lines(const std::string& text) {
    std::vector<std::vector<uint32_t>> lines;
    for (const std::string& raw : split(text, '\n')) {
        const std::string line = strip(raw);
        if (line.empty()) continue;
        lines.push_back(utf8_decode(line));
    }
    return lines;
}

}  // namespace cbert
