#ifndef GRAMINSPECT_CORPUS_HPP
#define GRAMINSPECT_CORPUS_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graminspect/common.hpp"

namespace graminspect {

// ---------------------------------------------------------------------------
// The four CGED error categories.

enum class ErrorType : int { R = 0, M = 1, S = 2, W = 3 };

inline constexpr int kErrorTypeCount = 4;

inline char error_type_char(ErrorType t) {
    switch (t) {
        case ErrorType::R: return 'R';
        case ErrorType::M: return 'M';
        case ErrorType::S: return 'S';
        case ErrorType::W: return 'W';
    }
    return '?';
}

inline ErrorType parse_error_type(const std::string& s) {
    if (s == "R") return ErrorType::R;
    if (s == "M") return ErrorType::M;
    if (s == "S") return ErrorType::S;
    if (s == "W") return ErrorType::W;
    throw ParseError("unknown error type token '" + s + "'");
}

// Character offsets are 1-based inclusive, the CGED quadruple convention.
// Anything that indexes into a char array converts locally to 0-based.
struct ErrorSpan {
    int start = 0;
    int end = 0;
    ErrorType type = ErrorType::R;

    int width() const { return end - start + 1; }

    friend bool operator==(const ErrorSpan&, const ErrorSpan&) = default;
    friend auto operator<=>(const ErrorSpan& a, const ErrorSpan& b) {
        return std::tie(a.start, a.end, a.type) <=> std::tie(b.start, b.end, b.type);
    }

    std::string describe() const {
        return "(" + std::to_string(start) + "," + std::to_string(end) + "," +
               error_type_char(type) + ")";
    }
};

inline bool spans_overlap(const ErrorSpan& a, const ErrorSpan& b) {
    return a.start <= b.end && b.start <= a.end;
}

struct Sentence {
    std::string id;
    std::u32string chars;                  // Unicode scalar values
    std::vector<ErrorSpan> gold;           // sorted by (start, end, type)

    std::size_t length() const { return chars.size(); }
    std::string text() const { return utf8_encode(chars); }
};

// ---------------------------------------------------------------------------
// BIO labels: O plus B/I per type, fixed index mapping
// O=0, B-R=1, I-R=2, B-M=3, I-M=4, B-S=5, I-S=6, B-W=7, I-W=8.

enum class Label : int {
    O = 0,
    BR = 1, IR = 2,
    BM = 3, IM = 4,
    BS = 5, IS = 6,
    BW = 7, IW = 8,
};

inline constexpr int kLabelCount = 9;

using TagSequence = std::vector<Label>;

inline int label_index(Label l) { return static_cast<int>(l); }

inline Label label_from_index(int i) {
    if (i < 0 || i >= kLabelCount) throw std::invalid_argument("bad label index");
    return static_cast<Label>(i);
}

inline Label begin_label(ErrorType t) { return static_cast<Label>(1 + 2 * static_cast<int>(t)); }
inline Label inside_label(ErrorType t) { return static_cast<Label>(2 + 2 * static_cast<int>(t)); }
inline bool is_begin(Label l) { return l != Label::O && (label_index(l) % 2) == 1; }
inline bool is_inside(Label l) { return l != Label::O && (label_index(l) % 2) == 0; }

inline ErrorType label_type(Label l) {
    if (l == Label::O) throw std::invalid_argument("label O carries no type");
    return static_cast<ErrorType>((label_index(l) - 1) / 2);
}

inline std::string label_name(Label l) {
    if (l == Label::O) return "O";
    return std::string(is_begin(l) ? "B-" : "I-") + error_type_char(label_type(l));
}

// ---------------------------------------------------------------------------
// BIO encoding / decoding.

// Spans must be pairwise non-overlapping (any types) and lie within [1, n].
inline TagSequence spans_to_bio(const std::vector<ErrorSpan>& spans, std::size_t n) {
    TagSequence tags(n, Label::O);
    for (const ErrorSpan& s : spans) {
        if (s.start < 1 || s.end > static_cast<int>(n) || s.start > s.end)
            throw std::invalid_argument("span out of range: " + s.describe());
        for (int p = s.start; p <= s.end; ++p) {
            if (tags[p - 1] != Label::O)
                throw std::invalid_argument("overlapping span: " + s.describe());
            tags[p - 1] = p == s.start ? begin_label(s.type) : inside_label(s.type);
        }
    }
    return tags;
}

// Total over arbitrary label sequences: an I-t with no compatible predecessor
// is promoted to B-t. Returns spans sorted by (start, end, type).
inline std::vector<ErrorSpan> bio_to_spans(const TagSequence& tags) {
    std::vector<ErrorSpan> spans;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const Label l = tags[i];
        if (l == Label::O) continue;
        const ErrorType t = label_type(l);
        if (is_inside(l) && !spans.empty() && spans.back().type == t &&
            spans.back().end == static_cast<int>(i)) {
            spans.back().end = static_cast<int>(i) + 1;
        } else {
            spans.push_back({static_cast<int>(i) + 1, static_cast<int>(i) + 1, t});
        }
    }
    std::sort(spans.begin(), spans.end());
    return spans;
}

// Largest subset of gold that a single BIO sequence can express: greedy by
// (start, end, type) order, dropping spans that overlap an already-kept one.
inline std::vector<ErrorSpan> non_overlapping_subset(std::vector<ErrorSpan> spans) {
    std::sort(spans.begin(), spans.end());
    std::vector<ErrorSpan> kept;
    for (const ErrorSpan& s : spans) {
        bool clash = false;
        for (const ErrorSpan& k : kept)
            if (spans_overlap(s, k)) { clash = true; break; }
        if (!clash) kept.push_back(s);
    }
    return kept;
}

// ---------------------------------------------------------------------------
// Gold corpus: UTF-8 line-delimited JSON records
//   {"id": "...", "text": "...", "errors": [{"start":i,"end":j,"type":"R"}]}

inline std::vector<Sentence> read_corpus(std::istream& is, const std::string& origin) {
    std::vector<Sentence> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ": bad record: " + e.what());
        }
        Sentence s;
        try {
            s.id = rec.at("id").get<std::string>();
            s.chars = utf8_decode(rec.at("text").get<std::string>());
            if (rec.contains("errors")) {
                for (const auto& e : rec.at("errors")) {
                    ErrorSpan span;
                    span.start = e.at("start").get<int>();
                    span.end = e.at("end").get<int>();
                    span.type = parse_error_type(e.at("type").get<std::string>());
                    s.gold.push_back(span);
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ": bad record: " + e.what());
        }
        if (s.chars.empty())
            throw ParseError(where + ": sentence '" + s.id + "' has empty text");
        const int n = static_cast<int>(s.chars.size());
        std::sort(s.gold.begin(), s.gold.end());
        for (std::size_t i = 0; i < s.gold.size(); ++i) {
            const ErrorSpan& sp = s.gold[i];
            if (sp.start < 1 || sp.end < sp.start || sp.end > n)
                throw ParseError(where + ": sentence '" + s.id + "' span " +
                                 sp.describe() + " out of range [1," +
                                 std::to_string(n) + "]");
            // Same-type overlaps are invalid gold; cross-type overlaps are allowed.
            for (std::size_t j = i + 1; j < s.gold.size(); ++j) {
                if (s.gold[j].type == sp.type && spans_overlap(sp, s.gold[j]))
                    throw ParseError(where + ": sentence '" + s.id +
                                     "' has overlapping " +
                                     std::string(1, error_type_char(sp.type)) +
                                     " spans " + sp.describe() + " and " +
                                     s.gold[j].describe());
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<Sentence> read_corpus(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open corpus file: " + path);
    return read_corpus(is, path);
}

inline void write_corpus(const std::vector<Sentence>& sentences, std::ostream& os) {
    for (const Sentence& s : sentences) {
        nlohmann::json rec;
        rec["id"] = s.id;
        rec["text"] = s.text();
        rec["errors"] = nlohmann::json::array();
        for (const ErrorSpan& sp : s.gold) {
            rec["errors"].push_back({{"start", sp.start},
                                     {"end", sp.end},
                                     {"type", std::string(1, error_type_char(sp.type))}});
        }
        os << rec.dump() << "\n";
    }
}

inline void write_corpus(const std::vector<Sentence>& sentences, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot write corpus file: " + path);
    write_corpus(sentences, os);
}

// ---------------------------------------------------------------------------
// Prediction files: TSV, one error per line `sid<TAB>start<TAB>end<TAB>type`,
// or `sid<TAB>correct` for an explicitly error-free sentence. A sentence with
// no entry at all also means "predicted correct".

struct PredictionSet {
    std::string model_id;
    bool is_lgn = false;
    std::map<std::string, std::vector<ErrorSpan>> by_sentence;

    void add(const std::string& sid, const ErrorSpan& span) {
        auto& v = by_sentence[sid];
        if (std::find(v.begin(), v.end(), span) == v.end()) v.push_back(span);
    }
    void mark_correct(const std::string& sid) { by_sentence[sid]; }

    void canonicalize() {
        for (auto& [sid, spans] : by_sentence) {
            std::sort(spans.begin(), spans.end());
            spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
        }
    }
};

inline PredictionSet read_predictions(std::istream& is, const std::string& origin) {
    PredictionSet out;
    out.model_id = origin;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        const std::vector<std::string> f = split(line, '\t');
        if (f.size() == 2 && f[1] == "correct") {
            out.mark_correct(f[0]);
            continue;
        }
        if (f.size() != 4)
            throw ParseError(where + ": expected 'sid<TAB>start<TAB>end<TAB>type' or 'sid<TAB>correct'");
        ErrorSpan span;
        try {
            std::size_t pos = 0;
            span.start = std::stoi(f[1], &pos);
            if (pos != f[1].size()) throw std::invalid_argument(f[1]);
            span.end = std::stoi(f[2], &pos);
            if (pos != f[2].size()) throw std::invalid_argument(f[2]);
        } catch (const std::exception&) {
            throw ParseError(where + ": non-numeric offset");
        }
        span.type = parse_error_type(f[3]);
        if (span.start < 1 || span.end < span.start)
            throw ParseError(where + ": invalid span " + span.describe());
        out.add(f[0], span);
    }
    out.canonicalize();
    return out;
}

inline PredictionSet read_predictions(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open prediction file: " + path);
    return read_predictions(is, path);
}

// Canonical order: by sentence id, then (start, end, type).
inline void write_predictions(const PredictionSet& preds, std::ostream& os) {
    for (const auto& [sid, spans] : preds.by_sentence) {
        std::vector<ErrorSpan> sorted = spans;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        if (sorted.empty()) {
            os << sid << "\tcorrect\n";
            continue;
        }
        for (const ErrorSpan& s : sorted) {
            os << sid << "\t" << s.start << "\t" << s.end << "\t"
               << error_type_char(s.type) << "\n";
        }
    }
}

inline void write_predictions(const PredictionSet& preds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot write prediction file: " + path);
    write_predictions(preds, os);
}

}  // namespace graminspect

#endif  // GRAMINSPECT_CORPUS_HPP
