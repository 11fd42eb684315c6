// SPDX-License-Identifier: Apache-2.0
#include "cbert/metrics.hpp"

#include <algorithm>
#include <map>

#include "cbert/io.hpp"

namespace cbert {

namespace {

struct TagParts {
    char role = 'O';   // B, M (or I), E, S, O
    std::string type;  // after "B-", empty for bare tags
};

TagParts parse_tag(const std::string& tag) {
    TagParts p;
    if (tag.empty() || tag == "O") return p;
    const char head = tag[0];
    if (head != 'B' && head != 'I' && head != 'M' && head != 'E' && head != 'S') return p;
    p.role = head == 'I' ? 'M' : head;
    if (tag.size() >= 2 && tag[1] == '-') p.type = tag.substr(2);
    return p;
}

}  // namespace

std::vector<TagSpan> decode_tag_spans(const std::vector<std::string>& tags) {
    std::vector<TagSpan> spans;
    int start = -1;
    std::string type;
    const auto flush = [&](int end) {
        if (start >= 0) spans.push_back({start, end, type});
        start = -1;
        type.clear();
    };
    for (size_t i = 0; i < tags.size(); ++i) {
        const TagParts p = parse_tag(tags[i]);
        const int pos = static_cast<int>(i);
        switch (p.role) {
            case 'B':
                flush(pos);
                start = pos;
                type = p.type;
                break;
            case 'M':
                if (start < 0 || p.type != type) {  // stray continuation starts a span
                    flush(pos);
                    start = pos;
                    type = p.type;
                }
                break;
            case 'E':
                if (start < 0 || p.type != type) {
                    flush(pos);
                    start = pos;
                    type = p.type;
                }
                flush(pos + 1);
                break;
            case 'S':
                flush(pos);
                spans.push_back({pos, pos + 1, p.type});
                break;
            default:
                flush(pos);
                break;
        }
    }
    flush(static_cast<int>(tags.size()));
    return spans;
}

Prf span_prf(const std::vector<std::vector<std::string>>& gold,
             const std::vector<std::vector<std::string>>& pred) {
    if (gold.size() != pred.size()) throw Error("span_prf: corpus sizes differ");
    int64_t n_gold = 0, n_pred = 0, n_hit = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        const auto gs = decode_tag_spans(gold[i]);
        const auto ps = decode_tag_spans(pred[i]);
        n_gold += static_cast<int64_t>(gs.size());
        n_pred += static_cast<int64_t>(ps.size());
        for (const TagSpan& s : ps) {
            if (std::find(gs.begin(), gs.end(), s) != gs.end()) ++n_hit;
        }
    }
    Prf out;
    out.precision = n_pred == 0 ? 0.0 : static_cast<double>(n_hit) / n_pred;
    out.recall = n_gold == 0 ? 0.0 : static_cast<double>(n_hit) / n_gold;
    out.f1 = (out.precision + out.recall) == 0.0
                 ? 0.0
                 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

double position_accuracy(const std::vector<std::vector<std::string>>& gold,
                         const std::vector<std::vector<std::string>>& pred) {
    if (gold.size() != pred.size()) throw Error("position_accuracy: corpus sizes differ");
    int64_t total = 0, hit = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].size() != pred[i].size()) throw Error("position_accuracy: lengths differ");
        for (size_t j = 0; j < gold[i].size(); ++j) {
            ++total;
            if (gold[i][j] == pred[i][j]) ++hit;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / total;
}

namespace {

std::vector<int> wrap_ids(const std::vector<uint32_t>& cps, const Vocab& vocab, int max_len,
                          const std::string& where) {
    if (static_cast<int>(cps.size()) > max_len - 2) {
        throw FormatError(where + ": text of " + std::to_string(cps.size()) +
                          " chars exceeds max_len-2=" + std::to_string(max_len - 2));
    }
    std::vector<int> ids;
    ids.reserve(cps.size() + 2);
    ids.push_back(Vocab::kCls);
    for (uint32_t cp : cps) ids.push_back(vocab.id_of(cp));
    ids.push_back(Vocab::kSep);
    return ids;
}

int label_index(const std::vector<std::string>& names, const std::string& label,
                const std::string& where) {
    const auto it = std::find(names.begin(), names.end(), label);
    if (it == names.end()) throw FormatError(where + ": unknown label '" + label + "'");
    return static_cast<int>(it - names.begin());
}

}  // namespace

ClassifyDataset parse_classify_dataset(const std::string& text, const Vocab& vocab, int max_len,
                                       const std::vector<std::string>* fixed_labels) {
    std::vector<std::pair<std::string, std::vector<uint32_t>>> rows;
    std::vector<std::string> names;
    size_t line_no = 0;
    for (const std::string& raw : split(text, '\n')) {
        ++line_no;
        const std::string line = strip(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 2 || fields[0].empty()) {
            throw FormatError("classify data:" + std::to_string(line_no) +
                              ": expected 'label<TAB>text'");
        }
        rows.emplace_back(fields[0], utf8_decode(fields[1]));
        names.push_back(fields[0]);
    }
    ClassifyDataset ds;
    if (fixed_labels != nullptr) {
        ds.label_names = *fixed_labels;
    } else {
        std::sort(names.begin(), names.end());
        names.erase(std::unique(names.begin(), names.end()), names.end());
        ds.label_names = std::move(names);
    }
    for (size_t i = 0; i < rows.size(); ++i) {
        LabeledExample ex;
        ex.ids = wrap_ids(rows[i].second, vocab, max_len,
                          "classify data:" + std::to_string(i + 1));
        ex.labels = {label_index(ds.label_names, rows[i].first, "classify data")};
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

ClassifyDataset load_classify_dataset(const std::string& path, const Vocab& vocab, int max_len) {
    return parse_classify_dataset(read_file(path), vocab, max_len);
}

TagDataset parse_tag_dataset(const std::string& text, const Vocab& vocab, int max_len,
                             const std::vector<std::string>* fixed_labels) {
    std::vector<std::pair<std::vector<uint32_t>, std::vector<std::string>>> rows;
    std::vector<std::string> names;
    size_t line_no = 0;
    for (const std::string& raw : split(text, '\n')) {
        ++line_no;
        const std::string line = strip(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 2) {
            throw FormatError("tag data:" + std::to_string(line_no) +
                              ": expected 'text<TAB>tags'");
        }
        const auto cps = utf8_decode(fields[0]);
        std::vector<std::string> tags;
        for (const std::string& t : split(fields[1], ' ')) {
            if (!t.empty()) tags.push_back(t);
        }
        if (tags.size() != cps.size()) {
            throw FormatError("tag data:" + std::to_string(line_no) + ": " +
                              std::to_string(cps.size()) + " chars but " +
                              std::to_string(tags.size()) + " tags");
        }
        for (const auto& t : tags) names.push_back(t);
        rows.emplace_back(cps, std::move(tags));
    }
    TagDataset ds;
    if (fixed_labels != nullptr) {
        ds.label_names = *fixed_labels;
    } else {
        std::sort(names.begin(), names.end());
        names.erase(std::unique(names.begin(), names.end()), names.end());
        ds.label_names = std::move(names);
    }
    for (size_t i = 0; i < rows.size(); ++i) {
        LabeledExample ex;
        ex.ids = wrap_ids(rows[i].first, vocab, max_len, "tag data:" + std::to_string(i + 1));
        ex.labels.assign(ex.ids.size(), kIgnoreId);
        for (size_t j = 0; j < rows[i].second.size(); ++j) {
            ex.labels[j + 1] = label_index(ds.label_names, rows[i].second[j], "tag data");
        }
        ds.examples.push_back(std::move(ex));
        ds.gold_tags.push_back(rows[i].second);
    }
    return ds;
}

TagDataset load_tag_dataset(const std::string& path, const Vocab& vocab, int max_len) {
    return parse_tag_dataset(read_file(path), vocab, max_len);
}

}  // namespace cbert
