#ifndef GRAMINSPECT_ENSEMBLE_HPP
#define GRAMINSPECT_ENSEMBLE_HPP

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "graminspect/corpus.hpp"
#include "graminspect/eval.hpp"

namespace graminspect {

// Three-stage voting over span-tuple predictions from many models. LGN-style
// models (low recall, high precision) are excluded from vote denominators
// except where they themselves predicted the span in question.

enum class LargestRule { Widest, MostVoted };
enum class Objective { Detection, Identification, Position };

inline Objective parse_objective(const std::string& s) {
    if (s == "detection") return Objective::Detection;
    if (s == "identification") return Objective::Identification;
    if (s == "position") return Objective::Position;
    throw UsageError("unknown objective '" + s +
                     "' (expected detection, identification or position)");
}

inline double objective_value(const EvalReport& r, Objective o) {
    switch (o) {
        case Objective::Detection: return r.detection_f1();
        case Objective::Identification: return r.identification_f1();
        case Objective::Position: return r.position_f1();
    }
    return 0.0;
}

struct EnsembleConfig {
    double theta1 = 0.5;
    double theta2 = 0.5;
    double theta3 = 0.5;
    LargestRule largest = LargestRule::Widest;
    Objective objective = Objective::Identification;

    void validate() const {
        for (double t : {theta1, theta2, theta3})
            if (t < 0.0 || t > 1.0)
                throw UsageError("ensemble thresholds must lie in [0,1]");
    }
};

// Per-sentence vote bookkeeping, derived once per sentence and independent of
// the thresholds.
struct VoteTally {
    int non_lgn_models = 0;
    int lgn_models = 0;
    std::array<int, kErrorTypeCount> type_votes{};        // non-LGN models per type
    std::map<ErrorSpan, std::pair<int, int>> span_votes;  // span -> (non-LGN, LGN)
    long total_non_lgn_errors = 0;

    int total_votes(const ErrorSpan& s) const {
        auto it = span_votes.find(s);
        return it == span_votes.end() ? 0 : it->second.first + it->second.second;
    }
};

inline VoteTally build_vote_tally(const std::vector<PredictionSet>& predictions,
                                  const std::string& sid) {
    VoteTally tally;
    for (const PredictionSet& model : predictions) {
        (model.is_lgn ? tally.lgn_models : tally.non_lgn_models) += 1;
        auto it = model.by_sentence.find(sid);
        if (it == model.by_sentence.end()) continue;
        std::array<bool, kErrorTypeCount> has_type{};
        for (const ErrorSpan& s : it->second) {
            auto& [non_lgn, lgn] = tally.span_votes[s];
            (model.is_lgn ? lgn : non_lgn) += 1;
            if (!model.is_lgn) {
                has_type[static_cast<int>(s.type)] = true;
                tally.total_non_lgn_errors += 1;
            }
        }
        for (int t = 0; t < kErrorTypeCount; ++t)
            if (has_type[t]) tally.type_votes[t] += 1;
    }
    return tally;
}

namespace detail {

// Strict "more than theta fraction" with a guard against the binary rounding
// of theta * n at exact-fraction boundaries.
inline bool exceeds_fraction(long count, double theta, long n) {
    return static_cast<double>(count) > theta * static_cast<double>(n) + 1e-9;
}

// Candidate ordering for stage 1 and stage 3: primary criterion per rule,
// then vote count / width, then smaller start, then type order R<M<S<W.
inline bool better_candidate(const ErrorSpan& a, int votes_a, const ErrorSpan& b,
                             int votes_b, LargestRule rule) {
    const int wa = a.width(), wb = b.width();
    if (rule == LargestRule::Widest) {
        if (wa != wb) return wa > wb;
        if (votes_a != votes_b) return votes_a > votes_b;
    } else {
        if (votes_a != votes_b) return votes_a > votes_b;
        if (wa != wb) return wa > wb;
    }
    if (a.start != b.start) return a.start < b.start;
    return static_cast<int>(a.type) < static_cast<int>(b.type);
}

}  // namespace detail

inline std::vector<ErrorSpan> ensemble_from_tally(const VoteTally& tally,
                                                  const EnsembleConfig& config) {
    if (tally.non_lgn_models < 1)
        throw UsageError("ensemble requires at least one non-LGN model");
    config.validate();
    std::vector<ErrorSpan> out;

    // Stage 1: per-type presence vote among non-LGN models; the emitted span
    // is the largest prediction of that type across all models.
    for (int t = 0; t < kErrorTypeCount; ++t) {
        if (!detail::exceeds_fraction(tally.type_votes[t], config.theta1,
                                      tally.non_lgn_models))
            continue;
        const ErrorSpan* best = nullptr;
        int best_votes = 0;
        for (const auto& [span, votes] : tally.span_votes) {
            if (static_cast<int>(span.type) != t) continue;
            const int v = votes.first + votes.second;
            if (!best || detail::better_candidate(span, v, *best, best_votes, config.largest)) {
                best = &span;
                best_votes = v;
            }
        }
        if (best) out.push_back(*best);
    }

    // Stage 2: exact-span vote. LGN models join the electorate only for spans
    // they themselves predicted.
    for (const auto& [span, votes] : tally.span_votes) {
        const auto [non_lgn, lgn] = votes;
        const long supporters = lgn > 0 ? non_lgn + lgn : non_lgn;
        const long electorate =
            lgn > 0 ? tally.non_lgn_models + tally.lgn_models : tally.non_lgn_models;
        if (detail::exceeds_fraction(supporters, config.theta2, electorate))
            out.push_back(span);
    }

    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (!out.empty()) return out;

    // Stage 3: existence fallback when the first two stages emitted nothing.
    if (detail::exceeds_fraction(tally.total_non_lgn_errors, config.theta3,
                                 tally.non_lgn_models)) {
        const ErrorSpan* best = nullptr;
        int best_votes = 0;
        for (const auto& [span, votes] : tally.span_votes) {
            const int v = votes.first + votes.second;
            if (!best ||
                detail::better_candidate(span, v, *best, best_votes, LargestRule::MostVoted)) {
                best = &span;
                best_votes = v;
            }
        }
        if (best) out.push_back(*best);
    }
    return out;
}

inline std::vector<ErrorSpan> ensemble_sentence(const std::vector<PredictionSet>& predictions,
                                                const std::string& sid,
                                                const EnsembleConfig& config) {
    return ensemble_from_tally(build_vote_tally(predictions, sid), config);
}

// Ensemble over every sentence id mentioned by any model; sentences that end
// up with no spans are recorded as predicted-correct.
inline PredictionSet ensemble_predictions(const std::vector<PredictionSet>& predictions,
                                          const EnsembleConfig& config,
                                          const std::string& model_id = "ensemble") {
    std::set<std::string> sids;
    for (const PredictionSet& m : predictions)
        for (const auto& [sid, spans] : m.by_sentence) sids.insert(sid);
    PredictionSet out;
    out.model_id = model_id;
    for (const std::string& sid : sids)
        out.by_sentence[sid] = ensemble_sentence(predictions, sid, config);
    return out;
}

// ---------------------------------------------------------------------------
// Threshold tuning: exhaustive grid search against gold labels.

struct TuneRow {
    double theta1 = 0.0, theta2 = 0.0, theta3 = 0.0;
    double detection_f1 = 0.0, identification_f1 = 0.0, position_f1 = 0.0;
};

struct TuneResult {
    EnsembleConfig best;
    double best_score = 0.0;
    std::vector<TuneRow> table;
};

inline std::vector<double> default_threshold_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 19; ++i) g.push_back(i * 0.05);
    return g;
}

inline TuneResult tune_thresholds(const std::vector<PredictionSet>& predictions,
                                  const std::vector<Sentence>& gold,
                                  const std::vector<double>& grid,
                                  Objective objective,
                                  LargestRule largest = LargestRule::Widest) {
    if (grid.empty()) throw UsageError("threshold grid is empty");

    // Tallies are threshold-independent; build once per sentence.
    std::vector<VoteTally> tallies;
    tallies.reserve(gold.size());
    for (const Sentence& s : gold) tallies.push_back(build_vote_tally(predictions, s.id));

    TuneResult result;
    bool first = true;
    for (double t1 : grid)
        for (double t2 : grid)
            for (double t3 : grid) {
                EnsembleConfig cfg;
                cfg.theta1 = t1;
                cfg.theta2 = t2;
                cfg.theta3 = t3;
                cfg.largest = largest;
                cfg.objective = objective;
                PredictionSet preds;
                preds.model_id = "ensemble";
                for (std::size_t i = 0; i < gold.size(); ++i)
                    preds.by_sentence[gold[i].id] = ensemble_from_tally(tallies[i], cfg);
                const EvalReport report = evaluate(preds, gold);
                TuneRow row{t1, t2, t3, report.detection_f1(),
                            report.identification_f1(), report.position_f1()};
                result.table.push_back(row);
                const double score = objective_value(report, objective);
                // Grid iteration is lexicographically ascending, so keeping
                // strict improvements ties toward the smallest thetas.
                if (first || score > result.best_score) {
                    first = false;
                    result.best = cfg;
                    result.best_score = score;
                }
            }
    return result;
}

inline std::string tune_report_tsv(const TuneResult& r) {
    std::ostringstream os;
    os << "theta1\ttheta2\ttheta3\tdetection_f1\tidentification_f1\tposition_f1\n";
    for (const TuneRow& row : r.table) {
        os << format_metric(row.theta1) << "\t" << format_metric(row.theta2) << "\t"
           << format_metric(row.theta3) << "\t" << format_metric(row.detection_f1)
           << "\t" << format_metric(row.identification_f1) << "\t"
           << format_metric(row.position_f1) << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Model-list manifest: `prediction_file_path<TAB>is_lgn(0|1)` per line.
// Relative paths resolve against the manifest's own directory.

inline std::vector<PredictionSet> read_model_manifest(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open model manifest: " + path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::vector<PredictionSet> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split(line, '\t');
        if (f.size() != 2 || (f[1] != "0" && f[1] != "1"))
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 'prediction_file_path<TAB>is_lgn(0|1)'");
        std::filesystem::path p(f[0]);
        if (p.is_relative()) p = base / p;
        PredictionSet preds = read_predictions(p.string());
        preds.is_lgn = f[1] == "1";
        out.push_back(std::move(preds));
    }
    if (out.empty()) throw ParseError("model manifest is empty: " + path);
    return out;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_ENSEMBLE_HPP
