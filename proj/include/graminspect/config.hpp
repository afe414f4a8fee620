#ifndef GRAMINSPECT_CONFIG_HPP
#define GRAMINSPECT_CONFIG_HPP

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "graminspect/common.hpp"
#include "graminspect/ensemble.hpp"
#include "graminspect/tagger.hpp"

namespace graminspect {

// Fully resolved command parameters. Precedence: built-in defaults, then the
// config file, then flag overrides, each later layer winning.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    EnsembleConfig ensemble;
    int farm_models = 5;
    double grid_start = 0.05;
    double grid_stop = 0.95;
    double grid_step = 0.05;
    // Synthetic-corpus knobs.
    int synth_train = 500;
    int synth_test = 100;
    double synth_error_rate = 0.65;
    std::map<std::string, std::string> paths;
    std::set<std::string> explicit_keys;   // keys set by file or flag

    std::string path(const std::string& key) const {
        auto it = paths.find(key);
        return it == paths.end() ? std::string() : it->second;
    }
    std::string require_path(const std::string& key) const {
        const std::string p = path(key);
        if (p.empty()) throw UsageError("missing required path '" + key + "'");
        return p;
    }

    std::vector<double> threshold_grid() const {
        if (grid_step <= 0.0 || grid_stop < grid_start)
            throw UsageError("invalid threshold grid");
        std::vector<double> g;
        for (int i = 0;; ++i) {
            const double v = grid_start + i * grid_step;
            if (v > grid_stop + 1e-9) break;
            g.push_back(v);
        }
        return g;
    }
};

namespace detail {

inline const std::set<std::string>& known_path_keys() {
    static const std::set<std::string> keys = {
        "train", "val", "input", "gold", "pred", "models", "dep", "val_dep",
        "input_dep", "lexicon", "frozen", "val_frozen", "input_frozen", "model",
        "out", "out_dir", "metrics",
    };
    return keys;
}

inline int config_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "' expects an integer, got '" + value + "'");
    }
}

inline double config_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "' expects a number, got '" + value + "'");
    }
}

inline std::uint64_t config_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "' expects an unsigned integer, got '" +
                         value + "'");
    }
}

}  // namespace detail

inline void apply_config_key(RunConfig& cfg, const std::string& key,
                             const std::string& value) {
    using detail::config_double;
    using detail::config_int;
    using detail::config_u64;
    if (key == "variant") cfg.model.variant = parse_variant(value);
    else if (key == "encoder") {
        if (value == "embedding") cfg.model.encoder.kind = EncoderKind::Embedding;
        else if (value == "transformer") cfg.model.encoder.kind = EncoderKind::Transformer;
        else throw UsageError("config key 'encoder' expects embedding|transformer");
    }
    else if (key == "embed_dim") cfg.model.encoder.embed_dim = config_int(key, value);
    else if (key == "max_len") cfg.model.encoder.max_len = config_int(key, value);
    else if (key == "tf_layers") cfg.model.encoder.tf_layers = config_int(key, value);
    else if (key == "tf_heads") cfg.model.encoder.tf_heads = config_int(key, value);
    else if (key == "tf_ff") cfg.model.encoder.tf_ff = config_int(key, value);
    else if (key == "gat_hidden") cfg.model.gat_hidden = config_int(key, value);
    else if (key == "gat_hidden_heads") cfg.model.gat_hidden_heads = config_int(key, value);
    else if (key == "gat_out") cfg.model.gat_out = config_int(key, value);
    else if (key == "gat_out_heads") cfg.model.gat_out_heads = config_int(key, value);
    else if (key == "lstm_hidden") cfg.model.lstm_hidden = config_int(key, value);
    else if (key == "combine_dim") cfg.model.combine_dim = config_int(key, value);
    else if (key == "frozen_width") cfg.model.frozen_width = config_int(key, value);
    else if (key == "batch_size") cfg.train.batch_size = config_int(key, value);
    else if (key == "lr") cfg.train.lr = config_double(key, value);
    else if (key == "epochs") cfg.train.epochs = config_int(key, value);
    else if (key == "dropout") cfg.train.dropout = config_double(key, value);
    else if (key == "seed") cfg.train.seed = config_u64(key, value);
    else if (key == "theta1") cfg.ensemble.theta1 = config_double(key, value);
    else if (key == "theta2") cfg.ensemble.theta2 = config_double(key, value);
    else if (key == "theta3") cfg.ensemble.theta3 = config_double(key, value);
    else if (key == "largest") {
        if (value == "widest") cfg.ensemble.largest = LargestRule::Widest;
        else if (value == "votes") cfg.ensemble.largest = LargestRule::MostVoted;
        else throw UsageError("config key 'largest' expects widest|votes");
    }
    else if (key == "objective") cfg.ensemble.objective = parse_objective(value);
    else if (key == "farm_models") cfg.farm_models = config_int(key, value);
    else if (key == "grid_start") cfg.grid_start = config_double(key, value);
    else if (key == "grid_stop") cfg.grid_stop = config_double(key, value);
    else if (key == "grid_step") cfg.grid_step = config_double(key, value);
    else if (key == "synth_train") cfg.synth_train = config_int(key, value);
    else if (key == "synth_test") cfg.synth_test = config_int(key, value);
    else if (key == "synth_error_rate") cfg.synth_error_rate = config_double(key, value);
    else if (detail::known_path_keys().count(key)) cfg.paths[key] = value;
    else throw UsageError("unknown config key '" + key + "'");
    cfg.explicit_keys.insert(key);
}

// Flat `key = value` text, UTF-8, '#' starts a comment.
inline void apply_config_file(RunConfig& cfg, std::istream& is, const std::string& origin) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto trim = [](std::string s) {
            const std::size_t a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const std::size_t b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        const std::string body = trim(line);
        if (body.empty()) continue;
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw UsageError(origin + ":" + std::to_string(lineno) +
                             ": expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty() || value.empty())
            throw UsageError(origin + ":" + std::to_string(lineno) +
                             ": expected 'key = value'");
        apply_config_key(cfg, key, value);
    }
}

inline RunConfig load_config(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw UsageError("cannot open config file: " + path);
        apply_config_file(cfg, is, path);
    }
    for (const auto& [key, value] : overrides) apply_config_key(cfg, key, value);
    return cfg;
}

// Canonical echo of the resolved configuration for run logs.
inline std::string dump_config(const RunConfig& cfg) {
    std::ostringstream os;
    char buf[64];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    };
    os << "variant = " << variant_name(cfg.model.variant) << "\n";
    os << "encoder = "
       << (cfg.model.encoder.kind == EncoderKind::Transformer ? "transformer" : "embedding")
       << "\n";
    os << "embed_dim = " << cfg.model.encoder.embed_dim << "\n";
    os << "max_len = " << cfg.model.encoder.max_len << "\n";
    os << "tf_layers = " << cfg.model.encoder.tf_layers << "\n";
    os << "tf_heads = " << cfg.model.encoder.tf_heads << "\n";
    os << "tf_ff = " << cfg.model.encoder.tf_ff << "\n";
    os << "gat_hidden = " << cfg.model.gat_hidden << "\n";
    os << "gat_hidden_heads = " << cfg.model.gat_hidden_heads << "\n";
    os << "gat_out = " << cfg.model.gat_out << "\n";
    os << "gat_out_heads = " << cfg.model.gat_out_heads << "\n";
    os << "lstm_hidden = " << cfg.model.lstm_hidden << "\n";
    os << "combine_dim = " << cfg.model.combine_dim << "\n";
    os << "frozen_width = " << cfg.model.frozen_width << "\n";
    os << "batch_size = " << cfg.train.batch_size << "\n";
    os << "lr = " << num(cfg.train.lr) << "\n";
    os << "epochs = " << cfg.train.epochs << "\n";
    os << "dropout = " << num(cfg.train.dropout) << "\n";
    os << "seed = " << cfg.train.seed << "\n";
    os << "theta1 = " << num(cfg.ensemble.theta1) << "\n";
    os << "theta2 = " << num(cfg.ensemble.theta2) << "\n";
    os << "theta3 = " << num(cfg.ensemble.theta3) << "\n";
    os << "largest = "
       << (cfg.ensemble.largest == LargestRule::Widest ? "widest" : "votes") << "\n";
    os << "objective = "
       << (cfg.ensemble.objective == Objective::Detection        ? "detection"
           : cfg.ensemble.objective == Objective::Identification ? "identification"
                                                                 : "position")
       << "\n";
    os << "farm_models = " << cfg.farm_models << "\n";
    os << "grid_start = " << num(cfg.grid_start) << "\n";
    os << "grid_stop = " << num(cfg.grid_stop) << "\n";
    os << "grid_step = " << num(cfg.grid_step) << "\n";
    os << "synth_train = " << cfg.synth_train << "\n";
    os << "synth_test = " << cfg.synth_test << "\n";
    os << "synth_error_rate = " << num(cfg.synth_error_rate) << "\n";
    for (const auto& [k, v] : cfg.paths) os << k << " = " << v << "\n";
    return os.str();
}

}  // namespace graminspect

#endif  // GRAMINSPECT_CONFIG_HPP
