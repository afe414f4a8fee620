#ifndef GRAMINSPECT_CHECKPOINT_HPP
#define GRAMINSPECT_CHECKPOINT_HPP

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "graminspect/common.hpp"
#include "graminspect/tagger.hpp"

namespace graminspect {

inline constexpr const char* kCheckpointMagic = "GRAMINSPECT-CKPT-1";
inline constexpr const char* kFrozenMagic = "GRAMINSPECT-EMB-1";

namespace detail {

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

inline std::uint64_t parse_hex64(const std::string& s) {
    if (s.size() != 16) throw IntegrityError("bad hex field '" + s + "'");
    std::uint64_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= c - '0';
        else if (c >= 'a' && c <= 'f') v |= c - 'a' + 10;
        else throw IntegrityError("bad hex field '" + s + "'");
    }
    return v;
}

inline std::string tensor_payload(const Tensor& t) {
    std::ostringstream os(std::ios::binary);
    for (double d : t.data()) write_le_f64(os, d);
    return os.str();
}

}  // namespace detail

// Canonical architecture text: the fingerprint input. Training hyper
// parameters are deliberately absent; two checkpoints are interchangeable for
// prediction exactly when this text matches.
inline std::string canonical_config_text(const ModelConfig& cfg, const Vocabulary& vocab) {
    std::ostringstream os;
    os << "config variant " << variant_name(cfg.variant) << "\n";
    os << "config encoder "
       << (cfg.encoder.kind == EncoderKind::Transformer ? "transformer" : "embedding")
       << "\n";
    os << "config embed_dim " << cfg.encoder.embed_dim << "\n";
    os << "config max_len " << cfg.encoder.max_len << "\n";
    os << "config tf_layers " << cfg.encoder.tf_layers << "\n";
    os << "config tf_heads " << cfg.encoder.tf_heads << "\n";
    os << "config tf_ff " << cfg.encoder.tf_ff << "\n";
    os << "config gat_hidden " << cfg.gat_hidden << "\n";
    os << "config gat_hidden_heads " << cfg.gat_hidden_heads << "\n";
    os << "config gat_out " << cfg.gat_out << "\n";
    os << "config gat_out_heads " << cfg.gat_out_heads << "\n";
    os << "config lstm_hidden " << cfg.lstm_hidden << "\n";
    os << "config combine_dim " << cfg.combine_dim << "\n";
    os << "config frozen_width " << cfg.frozen_width << "\n";
    for (const auto& [cp, idx] : vocab.index)
        os << "vocab " << static_cast<std::uint32_t>(cp) << " " << idx << "\n";
    return os.str();
}

inline std::uint64_t config_fingerprint(const ModelConfig& cfg, const Vocabulary& vocab) {
    return fnv1a64(canonical_config_text(cfg, vocab));
}

inline void save_checkpoint(ModelParams& params, const std::string& path,
                            std::uint64_t seed, int epoch) {
    std::string payload;
    struct Entry {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset;
        std::uint64_t checksum;
    };
    std::vector<Entry> entries;
    params.visit([&](const std::string& name, Param& p) {
        const std::string bytes = detail::tensor_payload(p.value);
        entries.push_back({name, p.value.shape(), payload.size(), fnv1a64(bytes)});
        payload += bytes;
    });

    std::ostringstream manifest;
    manifest << kCheckpointMagic << "\n";
    manifest << canonical_config_text(params.config, params.vocab);
    manifest << "fingerprint "
             << detail::hex64(config_fingerprint(params.config, params.vocab)) << "\n";
    manifest << "seed " << seed << "\n";
    manifest << "epoch " << epoch << "\n";
    for (const Entry& e : entries) {
        manifest << "tensor " << e.name << " f64 " << e.shape.size();
        for (std::size_t d : e.shape) manifest << " " << d;
        manifest << " " << e.offset << " " << detail::hex64(e.checksum) << "\n";
    }
    manifest << "end\n";

    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot write checkpoint: " + path);
    os << manifest.str();
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!os) throw ParseError("short write on checkpoint: " + path);
}

struct LoadedCheckpoint {
    ModelParams params;
    std::uint64_t seed = 0;
    int epoch = 0;
    std::uint64_t fingerprint = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(is, line) || line != kCheckpointMagic)
        throw IntegrityError("not a " + std::string(kCheckpointMagic) + " file: " + path);

    LoadedCheckpoint out;
    ModelConfig cfg;
    Vocabulary vocab;
    struct Entry {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset = 0;
        std::uint64_t checksum = 0;
    };
    std::vector<Entry> entries;
    bool saw_end = false;
    std::uint64_t stated_fingerprint = 0;

    const auto cfg_int = [&](const std::string& key, const std::string& value) -> bool {
        int* slot = nullptr;
        if (key == "embed_dim") slot = &cfg.encoder.embed_dim;
        else if (key == "max_len") slot = &cfg.encoder.max_len;
        else if (key == "tf_layers") slot = &cfg.encoder.tf_layers;
        else if (key == "tf_heads") slot = &cfg.encoder.tf_heads;
        else if (key == "tf_ff") slot = &cfg.encoder.tf_ff;
        else if (key == "gat_hidden") slot = &cfg.gat_hidden;
        else if (key == "gat_hidden_heads") slot = &cfg.gat_hidden_heads;
        else if (key == "gat_out") slot = &cfg.gat_out;
        else if (key == "gat_out_heads") slot = &cfg.gat_out_heads;
        else if (key == "lstm_hidden") slot = &cfg.lstm_hidden;
        else if (key == "combine_dim") slot = &cfg.combine_dim;
        else if (key == "frozen_width") slot = &cfg.frozen_width;
        if (slot) *slot = std::stoi(value);
        return slot != nullptr;
    };

    while (std::getline(is, line)) {
        if (line == "end") {
            saw_end = true;
            break;
        }
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "config") {
            std::string key, value;
            ls >> key >> value;
            if (key == "variant") cfg.variant = parse_variant(value);
            else if (key == "encoder")
                cfg.encoder.kind = value == "transformer" ? EncoderKind::Transformer
                                                          : EncoderKind::Embedding;
            else if (!cfg_int(key, value))
                throw IntegrityError("unknown checkpoint config key '" + key + "'");
        } else if (kind == "vocab") {
            std::uint32_t cp = 0;
            int idx = 0;
            ls >> cp >> idx;
            vocab.index[static_cast<char32_t>(cp)] = idx;
        } else if (kind == "fingerprint") {
            std::string hexv;
            ls >> hexv;
            stated_fingerprint = detail::parse_hex64(hexv);
        } else if (kind == "seed") {
            ls >> out.seed;
        } else if (kind == "epoch") {
            ls >> out.epoch;
        } else if (kind == "tensor") {
            Entry e;
            std::string dtype;
            std::size_t rank = 0;
            ls >> e.name >> dtype >> rank;
            if (dtype != "f64")
                throw IntegrityError("unsupported tensor dtype '" + dtype + "'");
            e.shape.resize(rank);
            for (std::size_t i = 0; i < rank; ++i) ls >> e.shape[i];
            std::string hexv;
            ls >> e.offset >> hexv;
            e.checksum = detail::parse_hex64(hexv);
            if (!ls) throw IntegrityError("malformed tensor manifest line: " + line);
            entries.push_back(std::move(e));
        } else {
            throw IntegrityError("unexpected manifest line: " + line);
        }
    }
    if (!saw_end) throw IntegrityError("truncated checkpoint manifest: " + path);

    const std::uint64_t actual = config_fingerprint(cfg, vocab);
    if (actual != stated_fingerprint)
        throw IntegrityError("checkpoint fingerprint mismatch in " + path);
    out.fingerprint = actual;

    out.params.config = cfg;
    out.params.vocab = vocab;
    Rng shape_rng(0);
    out.params.init(shape_rng);   // allocates the right shapes; values overwritten below

    auto named = out.params.named_params();
    if (named.size() != entries.size())
        throw IntegrityError("checkpoint tensor count mismatch: manifest has " +
                             std::to_string(entries.size()) + ", model needs " +
                             std::to_string(named.size()));
    std::string body((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    for (std::size_t i = 0; i < named.size(); ++i) {
        const Entry& e = entries[i];
        if (named[i].first != e.name)
            throw IntegrityError("checkpoint tensor order mismatch at '" + e.name + "'");
        Param& p = *named[i].second;
        if (p.value.shape() != e.shape)
            throw IntegrityError("checkpoint tensor '" + e.name + "' has wrong shape");
        const std::size_t nbytes = p.value.size() * 8;
        if (e.offset + nbytes > body.size())
            throw IntegrityError("truncated checkpoint payload at '" + e.name + "'");
        const std::uint64_t sum = fnv1a64(body.data() + e.offset, nbytes);
        if (sum != e.checksum)
            throw IntegrityError("checksum mismatch on tensor '" + e.name + "'");
        std::istringstream bs(body.substr(e.offset, nbytes), std::ios::binary);
        for (std::size_t j = 0; j < p.value.size(); ++j) p.value[j] = read_le_f64(bs);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Frozen contextual-embedding files: a text manifest of
// (sentence id, N, width) entries followed by row-major little-endian rows.

inline void write_frozen_table(const FrozenEmbeddingTable& table, const std::string& path) {
    std::string payload;
    std::ostringstream manifest;
    manifest << kFrozenMagic << "\n";
    for (const auto& [sid, rows] : table.rows) {
        if (sid.find_first_of(" \t\n") != std::string::npos)
            throw ParseError("frozen table sentence id contains whitespace: '" + sid + "'");
        const std::string bytes = detail::tensor_payload(rows);
        manifest << "entry " << sid << " " << rows.rows() << " " << rows.cols() << " "
                 << payload.size() << " " << detail::hex64(fnv1a64(bytes)) << "\n";
        payload += bytes;
    }
    manifest << "end\n";
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot write frozen embedding file: " + path);
    os << manifest.str();
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

inline FrozenEmbeddingTable read_frozen_table(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open frozen embedding file: " + path);
    std::string line;
    if (!std::getline(is, line) || line != kFrozenMagic)
        throw IntegrityError("not a " + std::string(kFrozenMagic) + " file: " + path);
    struct Entry {
        std::string sid;
        std::size_t n = 0, width = 0, offset = 0;
        std::uint64_t checksum = 0;
    };
    std::vector<Entry> entries;
    bool saw_end = false;
    while (std::getline(is, line)) {
        if (line == "end") {
            saw_end = true;
            break;
        }
        std::istringstream ls(line);
        std::string kind, hexv;
        Entry e;
        ls >> kind >> e.sid >> e.n >> e.width >> e.offset >> hexv;
        if (kind != "entry" || !ls)
            throw IntegrityError("malformed frozen manifest line: " + line);
        e.checksum = detail::parse_hex64(hexv);
        entries.push_back(std::move(e));
    }
    if (!saw_end) throw IntegrityError("truncated frozen embedding manifest: " + path);

    std::string body((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    FrozenEmbeddingTable table;
    for (const Entry& e : entries) {
        if (table.width == 0) table.width = static_cast<int>(e.width);
        if (static_cast<std::size_t>(table.width) != e.width)
            throw IntegrityError("frozen table width is not uniform at '" + e.sid + "'");
        const std::size_t nbytes = e.n * e.width * 8;
        if (e.offset + nbytes > body.size())
            throw IntegrityError("truncated frozen payload at '" + e.sid + "'");
        if (fnv1a64(body.data() + e.offset, nbytes) != e.checksum)
            throw IntegrityError("checksum mismatch on frozen entry '" + e.sid + "'");
        Tensor t({e.n, e.width});
        std::istringstream bs(body.substr(e.offset, nbytes), std::ios::binary);
        for (std::size_t j = 0; j < t.size(); ++j) t[j] = read_le_f64(bs);
        table.rows.emplace(e.sid, std::move(t));
    }
    return table;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_CHECKPOINT_HPP
