#ifndef GRAMINSPECT_EVAL_HPP
#define GRAMINSPECT_EVAL_HPP

#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "graminspect/corpus.hpp"

namespace graminspect {

// CGED scoring at three granularities:
//   detection      - is the sentence erroneous at all
//   identification - (sentence, error type) pairs
//   position       - exact (sentence, start, end, type) quadruples
// All levels use set semantics; duplicates never count twice.

struct LevelCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;

    double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
    double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
};

inline double f1(double precision, double recall) {
    if (precision < 0.0 || precision > 1.0 || recall < 0.0 || recall > 1.0)
        throw std::invalid_argument("f1: inputs must lie in [0,1]");
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

struct EvalReport {
    LevelCounts detection;
    LevelCounts identification;
    LevelCounts position;

    double detection_f1() const { return f1(detection.precision(), detection.recall()); }
    double identification_f1() const {
        return f1(identification.precision(), identification.recall());
    }
    double position_f1() const { return f1(position.precision(), position.recall()); }
};

namespace detail {

inline LevelCounts count_sets(std::size_t gold, std::size_t pred, std::size_t both) {
    LevelCounts c;
    c.tp = static_cast<long>(both);
    c.fp = static_cast<long>(pred - both);
    c.fn = static_cast<long>(gold - both);
    return c;
}

}  // namespace detail

inline EvalReport evaluate(const PredictionSet& pred, const std::vector<Sentence>& gold) {
    std::set<std::string> gold_ids;
    std::set<std::string> gold_detect;
    std::set<std::pair<std::string, ErrorType>> gold_ident;
    std::set<std::tuple<std::string, int, int, ErrorType>> gold_pos;
    for (const Sentence& s : gold) {
        gold_ids.insert(s.id);
        for (const ErrorSpan& e : s.gold) {
            gold_detect.insert(s.id);
            gold_ident.emplace(s.id, e.type);
            gold_pos.emplace(s.id, e.start, e.end, e.type);
        }
    }

    std::set<std::string> pred_detect;
    std::set<std::pair<std::string, ErrorType>> pred_ident;
    std::set<std::tuple<std::string, int, int, ErrorType>> pred_pos;
    for (const auto& [sid, spans] : pred.by_sentence) {
        if (!gold_ids.count(sid))
            throw ParseError("prediction references unknown sentence id '" + sid + "'");
        for (const ErrorSpan& e : spans) {
            pred_detect.insert(sid);
            pred_ident.emplace(sid, e.type);
            pred_pos.emplace(sid, e.start, e.end, e.type);
        }
    }

    const auto overlap = [](const auto& a, const auto& b) {
        std::size_t n = 0;
        for (const auto& x : a) n += b.count(x);
        return n;
    };

    EvalReport r;
    r.detection = detail::count_sets(gold_detect.size(), pred_detect.size(),
                                     overlap(gold_detect, pred_detect));
    r.identification = detail::count_sets(gold_ident.size(), pred_ident.size(),
                                          overlap(gold_ident, pred_ident));
    r.position = detail::count_sets(gold_pos.size(), pred_pos.size(),
                                    overlap(gold_pos, pred_pos));
    return r;
}

// ---------------------------------------------------------------------------
// Report rendering: a TSV for machines and a fixed-width table for humans.

inline std::string format_metric(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

inline std::string report_tsv(const EvalReport& r) {
    const auto line = [](const char* level, const LevelCounts& c, double f) {
        std::string s = level;
        s += "\t" + format_metric(c.precision()) + "\t" + format_metric(c.recall()) +
             "\t" + format_metric(f) + "\t" + std::to_string(c.tp) + "\t" +
             std::to_string(c.fp) + "\t" + std::to_string(c.fn) + "\n";
        return s;
    };
    std::string out = "level\tprecision\trecall\tf1\ttp\tfp\tfn\n";
    out += line("detection", r.detection, r.detection_f1());
    out += line("identification", r.identification, r.identification_f1());
    out += line("position", r.position, r.position_f1());
    return out;
}

// Columns mirror the Detection / Identification / Position blocks of the
// standard CGED result tables.
inline std::string render_report_table(
    const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::size_t name_w = 5;
    for (const auto& [name, r] : rows) name_w = std::max(name_w, name.size());
    std::string out;
    const auto pad = [&](const std::string& s, std::size_t w) {
        std::string p = s;
        p.resize(w, ' ');
        return p;
    };
    out += pad("model", name_w) +
           "  Detection                 Identification            Position\n";
    out += pad("", name_w) +
           "  Prec    Rec     F1        Prec    Rec     F1        Prec    Rec     F1\n";
    for (const auto& [name, r] : rows) {
        const auto block = [&](const LevelCounts& c, double f) {
            return format_metric(c.precision()) + "  " + format_metric(c.recall()) +
                   "  " + format_metric(f);
        };
        out += pad(name, name_w) + "  " + block(r.detection, r.detection_f1()) + "    " +
               block(r.identification, r.identification_f1()) + "    " +
               block(r.position, r.position_f1()) + "\n";
    }
    return out;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_EVAL_HPP
