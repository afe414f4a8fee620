#ifndef GRAMINSPECT_TAGGER_HPP
#define GRAMINSPECT_TAGGER_HPP

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graminspect/corpus.hpp"
#include "graminspect/crf.hpp"
#include "graminspect/encoder.hpp"
#include "graminspect/gat.hpp"
#include "graminspect/graphs.hpp"
#include "graminspect/lstm.hpp"
#include "graminspect/numerics.hpp"

namespace graminspect {

// The three pipeline variants:
//   A: encoder -> GAT over the dependency graph -> concat -> BiLSTM -> CRF
//   B: encoder (+) frozen contextual features -> projection -> BiLSTM -> CRF
//   C: encoder -> GAT over the lexicon graph -> projection -> CRF
enum class Variant { A, B, C };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::A: return "a";
        case Variant::B: return "b";
        case Variant::C: return "c";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "a" || s == "A") return Variant::A;
    if (s == "b" || s == "B") return Variant::B;
    if (s == "c" || s == "C") return Variant::C;
    throw UsageError("unknown variant '" + s + "' (expected a, b or c)");
}

struct ModelConfig {
    Variant variant = Variant::A;
    EncoderConfig encoder;
    int gat_hidden = 512;        // interior layer width per head
    int gat_hidden_heads = 8;
    int gat_out = 1024;          // averaged output layer width
    int gat_out_heads = 8;
    int lstm_hidden = 2048;
    int combine_dim = 0;         // variant B projection width; 0 -> embed_dim
    int frozen_width = 0;        // variant B, width of the frozen feature rows

    int effective_combine_dim() const {
        return combine_dim > 0 ? combine_dim : encoder.embed_dim;
    }
};

// Precomputed per-sentence feature matrices that are never updated.
struct FrozenEmbeddingTable {
    int width = 0;
    std::map<std::string, Tensor> rows;   // sid -> N x width

    const Tensor& lookup(const std::string& sid) const {
        auto it = rows.find(sid);
        if (it == rows.end())
            throw ParseError("no frozen embedding entry for sentence '" + sid + "'");
        return it->second;
    }
};

struct ModelParams {
    ModelConfig config;
    Vocabulary vocab;
    EncoderParams encoder;
    GatStack gat;           // variants A and C
    Param combine_w;        // variant B
    Param combine_b;
    BiLstmParams lstm;      // variants A and B
    Param emit_w;           // K x emit_in
    Param emit_b;           // K
    Param trans;            // (K+2) x (K+2)

    int emit_input_width() const {
        switch (config.variant) {
            case Variant::A:
            case Variant::B: return lstm.output_width();
            case Variant::C: return gat.output_width();
        }
        return 0;
    }

    void init(Rng& rng) {
        encoder.config = config.encoder;
        encoder.init(rng, vocab.size());
        const int d = config.encoder.embed_dim;
        if (config.variant == Variant::A || config.variant == Variant::C) {
            gat = make_gat_stack(d, config.gat_hidden, config.gat_hidden_heads,
                                 config.gat_out, config.gat_out_heads);
            gat.init(rng);
        }
        int lstm_in = 0;
        if (config.variant == Variant::A) {
            lstm_in = d + gat.output_width();
        } else if (config.variant == Variant::B) {
            const int cd = effective_combine();
            combine_w.init_shape({static_cast<std::size_t>(cd),
                                  static_cast<std::size_t>(d + config.frozen_width)});
            combine_b.init_shape({static_cast<std::size_t>(cd)});
            const double lim = std::sqrt(6.0 / (d + config.frozen_width + cd));
            for (double& x : combine_w.value.data()) x = rng.uniform(-lim, lim);
            lstm_in = cd;
        }
        if (config.variant != Variant::C) {
            lstm.in_dim = lstm_in;
            lstm.hidden = config.lstm_hidden;
            lstm.init(rng);
        }
        const int emit_in = emit_input_width();
        emit_w.init_shape({static_cast<std::size_t>(kLabelCount),
                           static_cast<std::size_t>(emit_in)});
        emit_b.init_shape({static_cast<std::size_t>(kLabelCount)});
        const double lim = std::sqrt(6.0 / (emit_in + kLabelCount));
        for (double& x : emit_w.value.data()) x = rng.uniform(-lim, lim);
        trans.init_shape({static_cast<std::size_t>(kLabelCount + 2),
                          static_cast<std::size_t>(kLabelCount + 2)});
        for (double& x : trans.value.data()) x = 0.01 * rng.normal();
    }

    int effective_combine() const { return config.effective_combine_dim(); }

    // Fixed visitation order; checkpoints, the optimizer and gradient
    // flattening all key off these names.
    void visit(const std::function<void(const std::string&, Param&)>& fn) {
        fn("encoder.embed", encoder.embed);
        if (config.encoder.kind == EncoderKind::Transformer) {
            fn("encoder.pos", encoder.pos);
            for (std::size_t l = 0; l < encoder.layers.size(); ++l) {
                auto& tl = encoder.layers[l];
                const std::string p = "encoder.layer" + std::to_string(l) + ".";
                fn(p + "wq", tl.wq); fn(p + "bq", tl.bq);
                fn(p + "wk", tl.wk); fn(p + "bk", tl.bk);
                fn(p + "wv", tl.wv); fn(p + "bv", tl.bv);
                fn(p + "wo", tl.wo); fn(p + "bo", tl.bo);
                fn(p + "w1", tl.w1); fn(p + "b1", tl.b1);
                fn(p + "w2", tl.w2); fn(p + "b2", tl.b2);
                fn(p + "ln1_gamma", tl.ln1_gamma); fn(p + "ln1_beta", tl.ln1_beta);
                fn(p + "ln2_gamma", tl.ln2_gamma); fn(p + "ln2_beta", tl.ln2_beta);
            }
        }
        if (config.variant == Variant::A || config.variant == Variant::C) {
            for (std::size_t l = 0; l < gat.layers.size(); ++l) {
                for (int m = 0; m < gat.layers[l].heads; ++m) {
                    const std::string p =
                        "gat.layer" + std::to_string(l) + ".head" + std::to_string(m) + ".";
                    fn(p + "w", gat.layers[l].w[m]);
                    fn(p + "a", gat.layers[l].a[m]);
                }
            }
        }
        if (config.variant == Variant::B) {
            fn("combine.w", combine_w);
            fn("combine.b", combine_b);
        }
        if (config.variant != Variant::C) {
            fn("lstm.fwd.wx", lstm.fwd.wx); fn("lstm.fwd.wh", lstm.fwd.wh);
            fn("lstm.fwd.b", lstm.fwd.b);
            fn("lstm.bwd.wx", lstm.bwd.wx); fn("lstm.bwd.wh", lstm.bwd.wh);
            fn("lstm.bwd.b", lstm.bwd.b);
        }
        fn("emit.w", emit_w);
        fn("emit.b", emit_b);
        fn("crf.trans", trans);
    }

    std::vector<std::pair<std::string, Param*>> named_params() {
        std::vector<std::pair<std::string, Param*>> out;
        visit([&](const std::string& n, Param& p) { out.emplace_back(n, &p); });
        return out;
    }

    void zero_grad() {
        visit([](const std::string&, Param& p) { p.zero_grad(); });
    }
};

// ---------------------------------------------------------------------------
// Per-sentence model input: character indices plus the variant's side input.

struct TaggerInput {
    std::string sid;
    std::size_t n = 0;
    std::vector<int> chars;              // vocabulary indices
    std::optional<CharGraph> graph;      // A: dependency graph, C: lexicon graph
    std::optional<Tensor> frozen;        // B: N x frozen_width
    std::vector<int> labels;             // training only, label indices
};

inline TaggerInput make_tagger_input(const Sentence& s, const ModelParams& params,
                                     const DependencyParse* parse,
                                     const Lexicon* lexicon,
                                     const FrozenEmbeddingTable* frozen,
                                     bool with_labels) {
    const ModelConfig& cfg = params.config;
    if (s.length() > static_cast<std::size_t>(cfg.encoder.max_len))
        throw ParseError("sentence '" + s.id + "' exceeds the stream length " +
                         std::to_string(cfg.encoder.max_len));
    TaggerInput in;
    in.sid = s.id;
    in.n = s.length();
    in.chars.reserve(s.length());
    for (char32_t c : s.chars) in.chars.push_back(params.vocab.lookup(c));
    switch (cfg.variant) {
        case Variant::A: {
            if (!parse)
                throw UsageError("variant a requires a dependency parse for sentence '" +
                                 s.id + "'");
            check_parse_covers(*parse, s);
            in.graph = dep_to_char_adjacency(*parse);
            break;
        }
        case Variant::B: {
            if (!frozen)
                throw UsageError("variant b requires frozen embeddings");
            const Tensor& row = frozen->lookup(s.id);
            if (row.rows() != s.length() ||
                row.cols() != static_cast<std::size_t>(cfg.frozen_width))
                throw ParseError("frozen embedding for sentence '" + s.id +
                                 "' has wrong shape");
            in.frozen = row;
            break;
        }
        case Variant::C: {
            if (!lexicon) throw UsageError("variant c requires a lexicon");
            in.graph = build_lexicon_graph(s.chars, *lexicon);
            break;
        }
    }
    if (with_labels) {
        const TagSequence tags =
            spans_to_bio(non_overlapping_subset(s.gold), s.length());
        in.labels.reserve(tags.size());
        for (Label l : tags) in.labels.push_back(label_index(l));
    }
    return in;
}

// ---------------------------------------------------------------------------
// Forward pass with trace for backward.

struct PipelineTrace {
    EncoderTrace encoder;
    Tensor enc_out;
    Tensor enc_mask;        // inverted-dropout multipliers (empty in eval mode)
    GatStackTrace gat;
    Tensor gat_out;
    Tensor gat_mask;
    Tensor combined;        // BiLSTM / projection input
    BiLstmTrace lstm;
    Tensor lstm_out;
    Tensor lstm_mask;
    Tensor emit_in;
    Tensor emissions;       // N x K
};

namespace detail {

inline Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    Tensor mask({rows, cols});
    const double keep = 1.0 - rate;
    for (double& m : mask.data()) m = rng.uniform() < rate ? 0.0 : 1.0 / keep;
    return mask;
}

inline Tensor apply_mask(const Tensor& x, const Tensor& mask) {
    if (mask.size() == 0) return x;
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return out;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    Tensor out({a.rows(), a.cols() + b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
    }
    return out;
}

}  // namespace detail

// Dropout is active only when `dropout_rng` is non-null (training mode);
// evaluation is the identity.
inline Tensor model_forward(const TaggerInput& input, ModelParams& params,
                            PipelineTrace& tr, double dropout_rate = 0.0,
                            Rng* dropout_rng = nullptr) {
    const ModelConfig& cfg = params.config;
    const bool dropping = dropout_rng != nullptr && dropout_rate > 0.0;

    tr.enc_out = encoder_forward(input.chars, params.encoder, &tr.encoder);
    if (dropping)
        tr.enc_mask = detail::dropout_mask(tr.enc_out.rows(), tr.enc_out.cols(),
                                           dropout_rate, *dropout_rng);
    else
        tr.enc_mask = Tensor();
    const Tensor enc = detail::apply_mask(tr.enc_out, tr.enc_mask);

    switch (cfg.variant) {
        case Variant::A: {
            if (!input.graph) throw UsageError("variant a input is missing its graph");
            tr.gat_out = gat_stack_forward(enc, *input.graph, params.gat, &tr.gat);
            if (dropping)
                tr.gat_mask = detail::dropout_mask(tr.gat_out.rows(), tr.gat_out.cols(),
                                                   dropout_rate, *dropout_rng);
            else
                tr.gat_mask = Tensor();
            const Tensor gat = detail::apply_mask(tr.gat_out, tr.gat_mask);
            tr.combined = detail::concat_cols(enc, gat);
            tr.lstm_out = bilstm_forward(tr.combined, params.lstm, &tr.lstm);
            break;
        }
        case Variant::B: {
            if (!input.frozen) throw UsageError("variant b input is missing frozen features");
            tr.combined = detail::concat_cols(enc, *input.frozen);
            const Tensor projected =
                detail::affine_forward(tr.combined, params.combine_w, params.combine_b);
            tr.gat_out = projected;   // reused slot: projection output
            tr.lstm_out = bilstm_forward(projected, params.lstm, &tr.lstm);
            break;
        }
        case Variant::C: {
            if (!input.graph) throw UsageError("variant c input is missing its graph");
            tr.gat_out = gat_stack_forward(enc, *input.graph, params.gat, &tr.gat);
            if (dropping)
                tr.gat_mask = detail::dropout_mask(tr.gat_out.rows(), tr.gat_out.cols(),
                                                   dropout_rate, *dropout_rng);
            else
                tr.gat_mask = Tensor();
            tr.emit_in = detail::apply_mask(tr.gat_out, tr.gat_mask);
            tr.emissions = detail::affine_forward(tr.emit_in, params.emit_w, params.emit_b);
            return tr.emissions;
        }
    }

    if (dropping)
        tr.lstm_mask = detail::dropout_mask(tr.lstm_out.rows(), tr.lstm_out.cols(),
                                            dropout_rate, *dropout_rng);
    else
        tr.lstm_mask = Tensor();
    tr.emit_in = detail::apply_mask(tr.lstm_out, tr.lstm_mask);
    tr.emissions = detail::affine_forward(tr.emit_in, params.emit_w, params.emit_b);
    return tr.emissions;
}

// Accumulates all parameter gradients for one sentence given d(emissions).
inline void model_backward(ModelParams& params, PipelineTrace& tr,
                           const Tensor& d_emissions) {
    const ModelConfig& cfg = params.config;
    Tensor d_emit_in =
        detail::affine_backward(tr.emit_in, params.emit_w, params.emit_b, d_emissions);

    if (cfg.variant == Variant::C) {
        const Tensor d_gat_out = detail::apply_mask(d_emit_in, tr.gat_mask);
        const Tensor d_enc_raw = gat_stack_backward(tr.gat, params.gat, d_gat_out);
        const Tensor d_enc = detail::apply_mask(d_enc_raw, tr.enc_mask);
        encoder_backward(tr.encoder, params.encoder, d_enc);
        return;
    }

    const Tensor d_lstm_out = detail::apply_mask(d_emit_in, tr.lstm_mask);
    const Tensor d_lstm_in = bilstm_backward(tr.lstm, params.lstm, d_lstm_out);

    if (cfg.variant == Variant::A) {
        const std::size_t enc_w = tr.enc_out.cols();
        const std::size_t gat_w = tr.gat_out.cols();
        Tensor d_enc_acc({d_lstm_in.rows(), enc_w});
        Tensor d_gat_dropped({d_lstm_in.rows(), gat_w});
        for (std::size_t i = 0; i < d_lstm_in.rows(); ++i) {
            for (std::size_t j = 0; j < enc_w; ++j) d_enc_acc(i, j) = d_lstm_in(i, j);
            for (std::size_t j = 0; j < gat_w; ++j)
                d_gat_dropped(i, j) = d_lstm_in(i, enc_w + j);
        }
        const Tensor d_gat_out = detail::apply_mask(d_gat_dropped, tr.gat_mask);
        d_enc_acc.add_scaled(gat_stack_backward(tr.gat, params.gat, d_gat_out), 1.0);
        const Tensor d_enc = detail::apply_mask(d_enc_acc, tr.enc_mask);
        encoder_backward(tr.encoder, params.encoder, d_enc);
        return;
    }

    // Variant B: LSTM input was the projection of [enc | frozen].
    const Tensor d_combined =
        detail::affine_backward(tr.combined, params.combine_w, params.combine_b, d_lstm_in);
    const std::size_t enc_w = tr.enc_out.cols();
    Tensor d_enc_dropped({d_combined.rows(), enc_w});
    for (std::size_t i = 0; i < d_combined.rows(); ++i)
        for (std::size_t j = 0; j < enc_w; ++j) d_enc_dropped(i, j) = d_combined(i, j);
    const Tensor d_enc = detail::apply_mask(d_enc_dropped, tr.enc_mask);
    encoder_backward(tr.encoder, params.encoder, d_enc);
}

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
    int batch_size = 32;
    double lr = 2e-5;
    int epochs = 120;
    double dropout = 0.1;
    std::uint64_t seed = 1;
};

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    bool has_validation = false;
    double val_detection_f1 = 0.0;
    double val_identification_f1 = 0.0;
    double val_position_f1 = 0.0;
};

// Loss and gradient accumulation for one sentence; gradient contributions are
// scaled by `weight` (1/batch size).
inline double tagger_loss_and_grads(const TaggerInput& input, ModelParams& params,
                                    double weight, double dropout_rate, Rng* rng) {
    PipelineTrace tr;
    const Tensor emissions = model_forward(input, params, tr, dropout_rate, rng);
    CrfGradients cg;
    const double loss = crf_nll(emissions, input.labels, params.trans.value, &cg);
    params.trans.grad.add_scaled(cg.d_transitions, weight);
    Tensor d_emissions = cg.d_emissions;
    for (double& d : d_emissions.data()) d *= weight;
    model_backward(params, tr, d_emissions);
    return loss;
}

inline PredictionSet predict(ModelParams& params, const std::vector<TaggerInput>& inputs,
                             const std::string& model_id) {
    PredictionSet out;
    out.model_id = model_id;
    for (const TaggerInput& in : inputs) {
        PipelineTrace tr;
        const Tensor emissions = model_forward(in, params, tr);
        const std::vector<int> path = viterbi_decode(emissions, params.trans.value);
        TagSequence tags;
        tags.reserve(path.size());
        for (int y : path) tags.push_back(label_from_index(y));
        out.by_sentence[in.sid] = bio_to_spans(tags);
    }
    out.canonicalize();
    return out;
}

// Metric callback lets the trainer report validation scores without owning
// the evaluation logic (supplied by the caller, see eval.hpp).
using ValMetricsFn = std::function<void(const PredictionSet&, EpochLog&)>;

inline std::vector<EpochLog> train(ModelParams& params,
                                   std::vector<TaggerInput>& train_inputs,
                                   const TrainConfig& cfg,
                                   const std::vector<TaggerInput>* val_inputs = nullptr,
                                   const ValMetricsFn& val_metrics = {},
                                   const std::function<void(const EpochLog&)>& on_epoch = {}) {
    if (train_inputs.empty()) throw UsageError("training corpus is empty");
    Rng rng = Rng(cfg.seed).split(0xF17);
    AdamHyper hp;
    hp.lr = cfg.lr;
    AdamOptimizer opt(hp);
    auto named = params.named_params();

    std::vector<std::size_t> order(train_inputs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<EpochLog> logs;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batch_id = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size, ++batch_id) {
            const std::size_t hi = std::min(order.size(), pos + cfg.batch_size);
            const double weight = 1.0 / static_cast<double>(hi - pos);
            params.zero_grad();
            double batch_loss = 0.0;
            for (std::size_t t = pos; t < hi; ++t) {
                batch_loss += weight * tagger_loss_and_grads(train_inputs[order[t]], params,
                                                             weight, cfg.dropout, &rng);
            }
            if (!std::isfinite(batch_loss))
                throw NumericError("non-finite loss in epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_id));
            opt.step(named);
            loss_sum += batch_loss * (hi - pos);
        }
        EpochLog log;
        log.epoch = epoch;
        log.mean_loss = loss_sum / static_cast<double>(train_inputs.size());
        if (val_inputs && val_metrics) {
            const PredictionSet preds = predict(params, *val_inputs, "val");
            log.has_validation = true;
            val_metrics(preds, log);
        }
        if (on_epoch) on_epoch(log);
        logs.push_back(log);
    }
    return logs;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_TAGGER_HPP
