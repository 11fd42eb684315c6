// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "cbert/rng.hpp"
#include "cbert/vocab.hpp"

namespace cbert {

inline constexpr int kIgnoreId = -100;

struct Span {
    int begin = 0;
    int end = 0;  // half-open
    bool operator==(const Span&) const = default;
};

// Word list for segmentation. One word per line, UTF-8.
class WordLexicon {
public:
    void add(const std::vector<uint32_t>& word);
    bool contains(std::span<const uint32_t> word) const;
    size_t max_word_len() const { return max_len_; }
    size_t size() const { return words_.size(); }

    static WordLexicon load(const std::string& path);
    static WordLexicon parse(const std::string& text);

private:
    std::unordered_set<std::u32string> words_;
    size_t max_len_ = 0;
};

struct SegmentedSentence {
    std::vector<int> ids;               // vocab ids, no specials
    std::vector<uint32_t> codepoints;   // aligned with ids
    std::vector<Span> word_spans;       // sorted, tiling [0, ids.size())
};

// Greedy forward maximum match; unmatched characters become singletons.
SegmentedSentence segment(std::span<const uint32_t> text, const WordLexicon& words,
                          const Vocab& vocab);

// Sampling constants for example building and masking.
struct MaskingPolicy {
    double wwm_prob = 0.9;
    double select_prob = 0.15;
    double mask_frac = 0.8;
    double random_frac = 0.1;
    double keep_frac = 0.1;
    double packed_prob = 0.9;
    int max_len = 512;

    void validate() const;
};

// A [CLS] ... [SEP] token sequence with word spans in token coordinates.
struct TrainingExample {
    std::vector<int> ids;
    std::vector<Span> word_spans;  // cover exactly the non-special positions
};

struct BuildStats {
    int64_t packed_draws = 0;
    int64_t single_draws = 0;
};

// Packs consecutive sentences (with probability packed_prob per example)
// until the next sentence would exceed max_len, otherwise emits a single
// sentence. Oversized sentences are split at max_len - 2 with word spans
// cut at the boundary.
std::vector<TrainingExample> build_examples(const std::vector<SegmentedSentence>& sentences,
                                            const MaskingPolicy& policy, CounterRng& rng,
                                            BuildStats* stats = nullptr);

struct MaskStats {
    bool used_wwm = false;
    int64_t units_total = 0;     // words under WWM, characters under CM
    int64_t units_selected = 0;
    int64_t branch_mask = 0;     // per selected unit
    int64_t branch_random = 0;
    int64_t branch_keep = 0;
};

struct MaskedBatch {
    std::vector<int> input_ids;           // corrupted
    std::vector<int> labels;              // kIgnoreId except at selected positions
    std::vector<uint8_t> attention_mask;  // 1 for real positions
    uint64_t stream_id = 0;
    MaskStats stats;
};

// Draws WWM vs CM, selects units at select_prob, and applies the
// mask/random/keep branch. Under WWM all characters of a selected word
// share one branch draw; the random branch replaces each character
// independently by a uniform non-special vocab character. Special tokens
// are never selected.
MaskedBatch apply_masking(const TrainingExample& example, const MaskingPolicy& policy,
                          const Vocab& vocab, CounterRng& rng);

// Dynamic masking: batch i of epoch e uses the RNG stream derived from
// (seed, epoch, i), so identical triples reproduce bit-identical batches
// and different epochs mask independently.
class EpochStream {
public:
    EpochStream(const std::vector<TrainingExample>* examples, const MaskingPolicy* policy,
                const Vocab* vocab, uint64_t seed, uint64_t epoch)
        : examples_(examples), policy_(policy), vocab_(vocab), seed_(seed), epoch_(epoch) {}

    size_t size() const { return examples_->size(); }
    MaskedBatch batch_at(size_t index) const;

    class Iterator {
    public:
        Iterator(const EpochStream* s, size_t i) : stream_(s), index_(i) {}
        MaskedBatch operator*() const { return stream_->batch_at(index_); }
        Iterator& operator++() {
            ++index_;
            return *this;
        }
        bool operator!=(const Iterator& o) const { return index_ != o.index_; }

    private:
        const EpochStream* stream_;
        size_t index_;
    };

    Iterator begin() const { return Iterator(this, 0); }
    Iterator end() const { return Iterator(this, examples_->size()); }

private:
    const std::vector<TrainingExample>* examples_;
    const MaskingPolicy* policy_;
    const Vocab* vocab_;
    uint64_t seed_;
    uint64_t epoch_;
};

uint64_t masking_stream_id(uint64_t seed, uint64_t epoch, uint64_t example_index);

// Splits corpus text into per-line codepoint sequences, skipping empty lines.
std::vector<std::vector<uint32_t>> corpus_lines(const std::string& text);

}  // namespace cbert
