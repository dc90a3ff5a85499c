#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pointcaps/dataset.hpp"
#include "pointcaps/errors.hpp"
#include "pointcaps/features.hpp"
#include "pointcaps/serialize.hpp"

// Declarative run configuration. Plain text, diff-friendly:
//
//   [model]
//   extractor = pointnet        # pointnet | edgeconv
//   aggregator = maxpool        # maxpool | netvlad
//   classifier = capsule        # capsule | fc
//   ...
//
// parse -> serialize -> parse is the identity; the canonical serialization
// also feeds the config hash stored in checkpoints.

namespace pointcaps {

enum class ClassifierKind { fc, capsule };
enum class ReconPairing { index, chamfer };
enum class TimingMode { wall, none };

struct ModelConfig {
    // [model]
    ExtractorKind extractor = ExtractorKind::pointnet;
    AggregatorKind aggregator = AggregatorKind::maxpool;
    ClassifierKind classifier = ClassifierKind::capsule;
    bool compose_caps = true;
    bool reconstruction_loss = true;
    SquashVariant squash_variant = SquashVariant::canonical;
    ReconPairing recon_pairing = ReconPairing::index;
    std::size_t q = 500;
    std::size_t t = 8;
    std::size_t z = 4;
    std::size_t r = 3;
    std::size_t vlad_clusters = 128;   // K
    std::size_t knn_k = 20;
    std::size_t final_width = 0;       // 0 = by aggregator: maxpool 1024, netvlad 128
    bool use_stn = true;
    std::vector<std::size_t> pn_mlp1{64, 64};
    std::vector<std::size_t> pn_mlp2{64, 128};
    std::vector<std::size_t> ec_mlp1{64, 64, 64};
    std::vector<std::size_t> ec_mlp2{128};
    std::vector<std::size_t> stn_mlp{64, 128};
    std::size_t stn_fc = 128;
    std::vector<std::size_t> decoder_widths{512, 1024};
    std::size_t fc_hidden1 = 512;
    std::size_t fc_hidden2 = 256;
    std::size_t vlad_init_batches = 2;

    // [data]
    std::size_t n_points = 256;
    std::string data_root;             // empty = synthetic primitives
    std::string data_format = "blob";  // blob | off | xyz
    std::vector<std::string> shapes{"sphere", "cube", "cylinder", "cone"};
    std::size_t samples_per_class = 100;

    // [train]
    std::size_t batch_size = 16;
    std::size_t epochs = 60;
    double lr = 0.001;
    std::uint64_t seed = 1;
    double early_stop_acc = 0.0;  // 0 = disabled; stop once test accuracy reaches this
    TimingMode timing = TimingMode::wall;

    std::size_t effective_final_width() const {
        if (final_width != 0) return final_width;
        return aggregator == AggregatorKind::netvlad ? 128 : 1024;
    }

    // Aggregated feature length m seen by the classifier.
    std::size_t feature_len() const {
        const std::size_t fw = effective_final_width();
        return aggregator == AggregatorKind::netvlad ? vlad_clusters * fw : fw;
    }

    ExtractorSpec extractor_spec() const {
        ExtractorSpec s;
        s.kind = extractor;
        s.final_width = effective_final_width();
        s.use_stn = use_stn;
        s.pn_mlp1 = pn_mlp1;
        s.pn_mlp2 = pn_mlp2;
        s.ec_block1 = ec_mlp1;
        s.ec_block2 = ec_mlp2;
        s.knn_k = knn_k;
        s.stn_mlp = stn_mlp;
        s.stn_fc = stn_fc;
        return s;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const auto& tok : split_csv(v)) {
        try {
            out.push_back(std::stoull(tok));
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': bad integer '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

inline std::string join_size_list(const std::vector<std::size_t>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

inline std::string join_str_list(const std::vector<std::string>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        return std::stod(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad number '" + v + "'");
    }
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

inline ModelConfig parse_config_text(const std::string& text) {
    ModelConfig cfg;
    std::map<std::string, bool> seen;
    std::istringstream is(text);
    std::string line, section;
    std::size_t lineno = 0;
    bool has_classifier = false, has_extractor = false, has_aggregator = false;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
            section = line.substr(1, line.size() - 2);
            if (section != "model" && section != "data" && section != "train")
                throw ConfigError("config: unknown section '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const std::string qual = section.empty() ? key : section + "." + key;
        if (seen.count(qual)) throw ConfigError("config key '" + qual + "': duplicate");
        seen[qual] = true;

        if (qual == "model.extractor") {
            if (value == "pointnet") cfg.extractor = ExtractorKind::pointnet;
            else if (value == "edgeconv") cfg.extractor = ExtractorKind::edgeconv;
            else throw ConfigError("config key 'extractor': unknown value '" + value + "'");
            has_extractor = true;
        } else if (qual == "model.aggregator") {
            if (value == "maxpool") cfg.aggregator = AggregatorKind::maxpool;
            else if (value == "netvlad") cfg.aggregator = AggregatorKind::netvlad;
            else throw ConfigError("config key 'aggregator': unknown value '" + value + "'");
            has_aggregator = true;
        } else if (qual == "model.classifier") {
            if (value == "fc") cfg.classifier = ClassifierKind::fc;
            else if (value == "capsule") cfg.classifier = ClassifierKind::capsule;
            else throw ConfigError("config key 'classifier': unknown value '" + value + "'");
            has_classifier = true;
        } else if (qual == "model.compose_caps") {
            cfg.compose_caps = detail::parse_bool(key, value);
        } else if (qual == "model.reconstruction_loss") {
            cfg.reconstruction_loss = detail::parse_bool(key, value);
        } else if (qual == "model.squash_variant") {
            if (value == "canonical") cfg.squash_variant = SquashVariant::canonical;
            else if (value == "paper_literal") cfg.squash_variant = SquashVariant::paper_literal;
            else throw ConfigError("config key 'squash_variant': unknown value '" + value + "'");
        } else if (qual == "model.recon_pairing") {
            if (value == "index") cfg.recon_pairing = ReconPairing::index;
            else if (value == "chamfer") cfg.recon_pairing = ReconPairing::chamfer;
            else throw ConfigError("config key 'recon_pairing': unknown value '" + value + "'");
        } else if (qual == "model.q") {
            cfg.q = detail::parse_size(key, value);
        } else if (qual == "model.t") {
            cfg.t = detail::parse_size(key, value);
        } else if (qual == "model.z") {
            cfg.z = detail::parse_size(key, value);
        } else if (qual == "model.r") {
            cfg.r = detail::parse_size(key, value);
        } else if (qual == "model.vlad_clusters") {
            cfg.vlad_clusters = detail::parse_size(key, value);
        } else if (qual == "model.knn_k") {
            cfg.knn_k = detail::parse_size(key, value);
        } else if (qual == "model.final_width") {
            cfg.final_width = detail::parse_size(key, value);
        } else if (qual == "model.use_stn") {
            cfg.use_stn = detail::parse_bool(key, value);
        } else if (qual == "model.pn_mlp1") {
            cfg.pn_mlp1 = detail::parse_size_list(key, value);
        } else if (qual == "model.pn_mlp2") {
            cfg.pn_mlp2 = detail::parse_size_list(key, value);
        } else if (qual == "model.ec_mlp1") {
            cfg.ec_mlp1 = detail::parse_size_list(key, value);
        } else if (qual == "model.ec_mlp2") {
            cfg.ec_mlp2 = detail::parse_size_list(key, value);
        } else if (qual == "model.stn_mlp") {
            cfg.stn_mlp = detail::parse_size_list(key, value);
        } else if (qual == "model.stn_fc") {
            cfg.stn_fc = detail::parse_size(key, value);
        } else if (qual == "model.decoder_widths") {
            cfg.decoder_widths = detail::parse_size_list(key, value);
        } else if (qual == "model.fc_hidden1") {
            cfg.fc_hidden1 = detail::parse_size(key, value);
        } else if (qual == "model.fc_hidden2") {
            cfg.fc_hidden2 = detail::parse_size(key, value);
        } else if (qual == "model.vlad_init_batches") {
            cfg.vlad_init_batches = detail::parse_size(key, value);
        } else if (qual == "data.n_points") {
            cfg.n_points = detail::parse_size(key, value);
        } else if (qual == "data.data_root") {
            cfg.data_root = value;
        } else if (qual == "data.data_format") {
            if (value != "blob" && value != "off" && value != "xyz")
                throw ConfigError("config key 'data_format': unknown value '" + value + "'");
            cfg.data_format = value;
        } else if (qual == "data.shapes") {
            cfg.shapes = detail::split_csv(value);
            if (cfg.shapes.empty()) throw ConfigError("config key 'shapes': empty list");
        } else if (qual == "data.samples_per_class") {
            cfg.samples_per_class = detail::parse_size(key, value);
        } else if (qual == "train.batch_size") {
            cfg.batch_size = detail::parse_size(key, value);
        } else if (qual == "train.epochs") {
            cfg.epochs = detail::parse_size(key, value);
        } else if (qual == "train.lr") {
            cfg.lr = detail::parse_double(key, value);
        } else if (qual == "train.seed") {
            cfg.seed = detail::parse_size(key, value);
        } else if (qual == "train.early_stop_acc") {
            cfg.early_stop_acc = detail::parse_double(key, value);
        } else if (qual == "train.timing") {
            if (value == "wall") cfg.timing = TimingMode::wall;
            else if (value == "none") cfg.timing = TimingMode::none;
            else throw ConfigError("config key 'timing': unknown value '" + value + "'");
        } else {
            throw ConfigError("config: unknown key '" + qual + "'");
        }
    }
    if (!has_classifier) throw ConfigError("config: missing required key 'classifier'");
    if (!has_extractor) throw ConfigError("config: missing required key 'extractor'");
    if (!has_aggregator) throw ConfigError("config: missing required key 'aggregator'");
    return cfg;
}

inline ModelConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

inline void validate_config(const ModelConfig& c) {
    auto positive = [](const char* key, std::size_t v) {
        if (v == 0) throw ConfigError(std::string("config key '") + key + "': must be >= 1");
    };
    positive("q", c.q);
    positive("t", c.t);
    positive("z", c.z);
    positive("r", c.r);
    positive("vlad_clusters", c.vlad_clusters);
    positive("knn_k", c.knn_k);
    positive("n_points", c.n_points);
    positive("batch_size", c.batch_size);
    positive("epochs", c.epochs);
    positive("samples_per_class", c.samples_per_class);
    if (c.knn_k >= c.n_points)
        throw ConfigError("config key 'knn_k': must be < n_points (" + std::to_string(c.knn_k) +
                          " vs " + std::to_string(c.n_points) + ")");
    if (!(c.lr > 0)) throw ConfigError("config key 'lr': must be positive");
    if (c.early_stop_acc < 0 || c.early_stop_acc > 1)
        throw ConfigError("config key 'early_stop_acc': must be in [0,1]");
    if (!c.compose_caps && c.feature_len() % c.t != 0)
        throw ConfigError("config key 'compose_caps': feature length " +
                          std::to_string(c.feature_len()) + " not divisible by t=" +
                          std::to_string(c.t) + " for the reshape ablation");
    if (c.data_root.empty())
        for (const auto& s : c.shapes) primitive_from_name(s);  // throws on unknown
}

// Canonical serialization: every key, fixed order, normalized values.
inline std::string serialize_config(const ModelConfig& c) {
    std::ostringstream os;
    os << "[model]\n";
    os << "extractor = " << (c.extractor == ExtractorKind::pointnet ? "pointnet" : "edgeconv")
       << "\n";
    os << "aggregator = " << (c.aggregator == AggregatorKind::maxpool ? "maxpool" : "netvlad")
       << "\n";
    os << "classifier = " << (c.classifier == ClassifierKind::fc ? "fc" : "capsule") << "\n";
    os << "compose_caps = " << (c.compose_caps ? "true" : "false") << "\n";
    os << "reconstruction_loss = " << (c.reconstruction_loss ? "true" : "false") << "\n";
    os << "squash_variant = "
       << (c.squash_variant == SquashVariant::canonical ? "canonical" : "paper_literal") << "\n";
    os << "recon_pairing = " << (c.recon_pairing == ReconPairing::index ? "index" : "chamfer")
       << "\n";
    os << "q = " << c.q << "\n";
    os << "t = " << c.t << "\n";
    os << "z = " << c.z << "\n";
    os << "r = " << c.r << "\n";
    os << "vlad_clusters = " << c.vlad_clusters << "\n";
    os << "knn_k = " << c.knn_k << "\n";
    os << "final_width = " << c.final_width << "\n";
    os << "use_stn = " << (c.use_stn ? "true" : "false") << "\n";
    os << "pn_mlp1 = " << detail::join_size_list(c.pn_mlp1) << "\n";
    os << "pn_mlp2 = " << detail::join_size_list(c.pn_mlp2) << "\n";
    os << "ec_mlp1 = " << detail::join_size_list(c.ec_mlp1) << "\n";
    os << "ec_mlp2 = " << detail::join_size_list(c.ec_mlp2) << "\n";
    os << "stn_mlp = " << detail::join_size_list(c.stn_mlp) << "\n";
    os << "stn_fc = " << c.stn_fc << "\n";
    os << "decoder_widths = " << detail::join_size_list(c.decoder_widths) << "\n";
    os << "fc_hidden1 = " << c.fc_hidden1 << "\n";
    os << "fc_hidden2 = " << c.fc_hidden2 << "\n";
    os << "vlad_init_batches = " << c.vlad_init_batches << "\n";
    os << "\n[data]\n";
    os << "n_points = " << c.n_points << "\n";
    os << "data_root = " << c.data_root << "\n";
    os << "data_format = " << c.data_format << "\n";
    os << "shapes = " << detail::join_str_list(c.shapes) << "\n";
    os << "samples_per_class = " << c.samples_per_class << "\n";
    os << "\n[train]\n";
    os << "batch_size = " << c.batch_size << "\n";
    os << "epochs = " << c.epochs << "\n";
    os << "lr = " << detail::format_double(c.lr) << "\n";
    os << "seed = " << c.seed << "\n";
    os << "early_stop_acc = " << detail::format_double(c.early_stop_acc) << "\n";
    os << "timing = " << (c.timing == TimingMode::wall ? "wall" : "none") << "\n";
    return os.str();
}

inline std::uint64_t config_hash(const ModelConfig& c) { return fnv1a64(serialize_config(c)); }

}  // namespace pointcaps
