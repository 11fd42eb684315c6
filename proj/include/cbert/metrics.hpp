// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "cbert/train.hpp"

namespace cbert {

// Labeled span in a tag sequence: [begin, end) plus an entity/word type.
struct TagSpan {
    int begin = 0;
    int end = 0;
    std::string type;
    bool operator==(const TagSpan&) const = default;
};

// Decodes BIO/BMES-style tag sequences ("B-PER", "I-PER", "O", or bare
// "B"/"M"/"I"/"E"/"S") into spans. Malformed continuations start new spans,
// matching common evaluation scripts.
std::vector<TagSpan> decode_tag_spans(const std::vector<std::string>& tags);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Span-level micro precision/recall/F1 over a corpus.
Prf span_prf(const std::vector<std::vector<std::string>>& gold,
             const std::vector<std::vector<std::string>>& pred);

double position_accuracy(const std::vector<std::vector<std::string>>& gold,
                         const std::vector<std::vector<std::string>>& pred);

// ---- datasets ----

struct ClassifyDataset {
    std::vector<std::string> label_names;              // sorted unique
    std::vector<LabeledExample> examples;              // ids = [CLS] text [SEP]
};

struct TagDataset {
    std::vector<std::string> label_names;
    std::vector<LabeledExample> examples;              // labels ignore specials
    std::vector<std::vector<std::string>> gold_tags;   // per text position
};

// File format: one example per line, "label<TAB>text".
ClassifyDataset load_classify_dataset(const std::string& path, const Vocab& vocab, int max_len);
ClassifyDataset parse_classify_dataset(const std::string& text, const Vocab& vocab, int max_len,
                                       const std::vector<std::string>* fixed_labels = nullptr);

// File format: one example per line, "text<TAB>tag1 tag2 ..." with one tag
// per character.
TagDataset load_tag_dataset(const std::string& path, const Vocab& vocab, int max_len);
TagDataset parse_tag_dataset(const std::string& text, const Vocab& vocab, int max_len,
                             const std::vector<std::string>* fixed_labels = nullptr);

}  // namespace cbert
