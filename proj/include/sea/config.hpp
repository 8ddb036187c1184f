#pragma once

// Key-value run configuration: config file plus flag overrides, merged with
// precedence flags > file > defaults.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sea/alignment.hpp"
#include "sea/data.hpp"
#include "sea/encoder.hpp"
#include "sea/training.hpp"

namespace sea {

using KvMap = std::map<std::string, std::string>;

// Lines of `key = value`; '#' starts a comment; blank lines ignored.
inline KvMap parse_config_text(std::istream& in) {
    KvMap out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const char* ws = " \t\r";
            auto b = s.find_first_not_of(ws);
            if (b == std::string::npos) return std::string();
            auto e = s.find_last_not_of(ws);
            return s.substr(b, e - b + 1);
        };
        std::string t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

inline KvMap load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    return parse_config_text(in);
}

enum class Method { SourceOnly, SEA, SEAPP };

inline Method parse_method(const std::string& s) {
    if (s == "source-only") return Method::SourceOnly;
    if (s == "sea") return Method::SEA;
    if (s == "seapp" || s == "sea++") return Method::SEAPP;
    throw std::runtime_error("unknown method '" + s + "' (expected sea|seapp|source-only)");
}

enum class DataSource { Csv, Synthetic };

struct RunConfig {
    Method method = Method::SEAPP;
    DataSource data_source = DataSource::Synthetic;
    std::string out_dir = ".";
    std::string source_csv, target_csv;

    CorpusSpec corpus;           // csv mode
    SyntheticShiftSpec synth;    // synthetic mode
    EncoderConfig encoder;
    AlignmentConfig align;
    TrainConfig train;
};

namespace detail {

inline double to_double(const KvMap& kv, const std::string& key, double def) {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': not a number: " + it->second);
    }
}

inline std::size_t to_size(const KvMap& kv, const std::string& key, std::size_t def) {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    try {
        long long v = std::stoll(it->second);
        if (v < 0) throw std::invalid_argument(it->second);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': not a nonnegative integer: " +
                                 it->second);
    }
}

inline std::string to_str(const KvMap& kv, const std::string& key, const std::string& def) {
    auto it = kv.find(key);
    return it == kv.end() ? def : it->second;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        auto b = item.find_first_not_of(" \t");
        auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

inline std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(std::stod(item));
    return out;
}

inline std::vector<std::size_t> split_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(s)) out.push_back(std::stoull(item));
    return out;
}

}  // namespace detail

inline RunConfig build_run_config(const KvMap& kv) {
    RunConfig rc;
    rc.method = parse_method(detail::to_str(kv, "method", "seapp"));
    const std::string ds = detail::to_str(kv, "data", "synthetic");
    if (ds == "csv")
        rc.data_source = DataSource::Csv;
    else if (ds == "synthetic")
        rc.data_source = DataSource::Synthetic;
    else
        throw std::runtime_error("config key 'data': expected csv|synthetic, got " + ds);
    rc.out_dir = detail::to_str(kv, "out", ".");
    rc.source_csv = detail::to_str(kv, "source_csv", "");
    rc.target_csv = detail::to_str(kv, "target_csv", "");
    if (rc.data_source == DataSource::Csv && (rc.source_csv.empty() || rc.target_csv.empty()))
        throw std::runtime_error("csv data source requires source_csv and target_csv");

    // corpus
    rc.corpus.window_len = detail::to_size(kv, "window_len", 32);
    rc.corpus.overlap = detail::to_double(kv, "overlap", 0.0);
    rc.corpus.sensor_columns = detail::split_list(detail::to_str(kv, "sensors", ""));
    rc.corpus.label_column = detail::to_str(kv, "label", "");
    rc.corpus.unit_column = detail::to_str(kv, "unit", "");
    rc.corpus.rul_cap = detail::to_double(kv, "cap", 125.0);
    const std::string schema = detail::to_str(kv, "schema", "synthetic");
    if (schema == "rul_regression")
        rc.corpus.schema = Schema::RulRegression;
    else if (schema == "activity_classification")
        rc.corpus.schema = Schema::ActivityClassification;
    else if (schema == "synthetic")
        rc.corpus.schema = Schema::Synthetic;
    else
        throw std::runtime_error("config key 'schema': unknown value " + schema);

    // synthetic generator
    rc.synth.sensors = detail::to_size(kv, "synth_sensors", 6);
    rc.synth.window_len = detail::to_size(kv, "synth_window_len", rc.corpus.window_len);
    rc.synth.latent_dim = detail::to_size(kv, "synth_latent_dim", 3);
    rc.synth.classes = detail::to_size(kv, "synth_classes", 4);
    rc.synth.rul_horizon = detail::to_double(kv, "synth_rul_horizon", 125.0);
    rc.synth.windows = detail::to_size(kv, "synth_windows", 2000);
    rc.synth.noise_std = detail::to_double(kv, "synth_noise_std", 0.1);
    if (kv.count("synth_scale")) rc.synth.target_scale = detail::split_doubles(kv.at("synth_scale"));
    if (kv.count("synth_offset"))
        rc.synth.target_offset = detail::split_doubles(kv.at("synth_offset"));
    if (kv.count("synth_permutation"))
        rc.synth.sensor_permutation = detail::split_sizes(kv.at("synth_permutation"));

    // encoder
    rc.encoder.patch_size = detail::to_size(kv, "patch", 8);
    rc.encoder.branches = detail::to_size(kv, "heads", 3);
    rc.encoder.global_dim = detail::to_size(kv, "global_dim", 32);

    // alignment
    rc.align.lambda_sca = detail::to_double(kv, "lambda_sca", rc.align.lambda_sca);
    rc.align.lambda_sfa = detail::to_double(kv, "lambda_sfa", rc.align.lambda_sfa);
    rc.align.exo_weight = detail::to_double(kv, "exo_weight", rc.align.exo_weight);
    rc.align.mga_normalized = detail::to_str(kv, "mga_weight_mode", "raw") == "normalized";
    switch (rc.method) {
        case Method::SEA: rc.align.variant = Variant::SEA; break;
        case Method::SEAPP: rc.align.variant = Variant::SEAPP; break;
        case Method::SourceOnly:
            rc.align.lambda_sca = 0.0;
            rc.align.lambda_sfa = 0.0;
            rc.align.exo_weight = 0.0;
            break;
    }

    // training
    rc.train.batch_size = detail::to_size(kv, "batch_size", 50);
    rc.train.epochs = detail::to_size(kv, "epochs", 20);
    rc.train.learning_rate = detail::to_double(kv, "lr", 0.001);
    rc.train.seed = detail::to_size(kv, "seed", 1);
    rc.synth.seed = detail::to_size(kv, "synth_seed", rc.train.seed);

    if (rc.align.lambda_sca < 0 || rc.align.lambda_sfa < 0)
        throw std::runtime_error("lambdas must be nonnegative");
    if (rc.train.learning_rate <= 0) throw std::runtime_error("lr must be positive");
    return rc;
}

}  // namespace sea
