#pragma once

// CSV ingestion, preprocessing (interpolation, z-score, RUL capping),
// sliding-window extraction, and a seeded synthetic domain-shift generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sea/encoder.hpp"

namespace sea {

enum class Schema { RulRegression, ActivityClassification, Synthetic };

struct CorpusSpec {
    std::string path;
    Schema schema = Schema::Synthetic;
    std::size_t window_len = 32;
    double overlap = 0.0;
    std::vector<std::string> sensor_columns;
    std::string label_column;  // empty: derive RUL from position in unit
    std::string unit_column;   // empty: single stream
    double rul_cap = 125.0;
};

struct NormStats {
    std::vector<double> mean, stddev;
};

inline std::size_t window_stride(std::size_t window_len, double overlap) {
    if (overlap < 0.0 || overlap >= 1.0)
        throw std::invalid_argument("overlap must be in [0,1)");
    auto stride = static_cast<std::size_t>(std::llround(window_len * (1.0 - overlap)));
    return std::max<std::size_t>(stride, 1);
}

// Fill gaps (NaN) by linear interpolation between observed neighbors;
// leading/trailing gaps copy the nearest observed value.
inline void interpolate_missing(std::vector<double>& series) {
    const std::size_t n = series.size();
    std::size_t first = n;
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isnan(series[i])) {
            first = i;
            break;
        }
    if (first == n) throw std::invalid_argument("fully-missing sensor column");
    for (std::size_t i = 0; i < first; ++i) series[i] = series[first];

    std::size_t prev = first;
    for (std::size_t i = first + 1; i < n; ++i) {
        if (std::isnan(series[i])) continue;
        if (i > prev + 1) {
            const double lo = series[prev], hi = series[i];
            for (std::size_t k = prev + 1; k < i; ++k)
                series[k] = lo + (hi - lo) * static_cast<double>(k - prev) /
                                     static_cast<double>(i - prev);
        }
        prev = i;
    }
    for (std::size_t i = prev + 1; i < n; ++i) series[i] = series[prev];
}

inline double cap_rul(double label, double cap) {
    if (label < 0.0) throw std::invalid_argument("negative RUL label");
    return std::min(label, cap);
}

namespace detail {

struct Stream {
    // sensor-major: series[sensor][t]
    std::vector<std::vector<double>> series;
    std::vector<double> labels;  // per timestamp; NaN if absent
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_cell(const std::string& raw, std::size_t row) {
    std::string s = raw;
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
            s.end());
    if (s.empty() || s == "NaN" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("non-numeric cell '" + raw + "' at data row " +
                                    std::to_string(row));
    }
}

}  // namespace detail

// Windows of one stream; labels per spec schema.
inline std::vector<MtsSample> window_stream(const detail::Stream& stream, const CorpusSpec& spec) {
    const std::size_t N = stream.series.size();
    const std::size_t M = stream.series.empty() ? 0 : stream.series[0].size();
    const std::size_t L = spec.window_len;
    std::vector<MtsSample> out;
    if (M < L) return out;
    const std::size_t stride = window_stride(L, spec.overlap);
    const std::size_t count = 1 + (M - L) / stride;
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = w * stride;
        MtsSample s;
        s.sensors = N;
        s.length = L;
        s.values.resize(N * L);
        for (std::size_t m = 0; m < N; ++m)
            for (std::size_t t = 0; t < L; ++t) s.values[m * L + t] = stream.series[m][start + t];
        const std::size_t last = start + L - 1;
        if (!stream.labels.empty() && !std::isnan(stream.labels[last])) {
            double lab = stream.labels[last];
            if (spec.schema == Schema::RulRegression) lab = cap_rul(lab, spec.rul_cap);
            s.label = lab;
        } else if (spec.schema == Schema::RulRegression) {
            // cycles remaining until the end of this unit
            s.label = cap_rul(static_cast<double>(M - 1 - last), spec.rul_cap);
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<MtsSample> load_csv_corpus(const CorpusSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw std::runtime_error("cannot open " + spec.path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file " + spec.path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_csv_line(line);

    auto col_index = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw std::runtime_error("missing column '" + name + "' in " + spec.path);
        return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> sensor_idx;
    for (const auto& c : spec.sensor_columns) sensor_idx.push_back(col_index(c));
    std::optional<std::size_t> label_idx, unit_idx;
    if (!spec.label_column.empty()) label_idx = col_index(spec.label_column);
    if (!spec.unit_column.empty()) unit_idx = col_index(spec.unit_column);

    const std::size_t N = sensor_idx.size();
    std::map<std::string, detail::Stream> streams;
    std::vector<std::string> stream_order;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        auto cells = detail::split_csv_line(line);
        if (cells.size() < header.size())
            throw std::runtime_error("short row " + std::to_string(row) + " in " + spec.path);
        std::string key = unit_idx ? cells[*unit_idx] : std::string("_all");
        auto [it, fresh] = streams.try_emplace(key);
        if (fresh) {
            it->second.series.resize(N);
            stream_order.push_back(key);
        }
        for (std::size_t m = 0; m < N; ++m)
            it->second.series[m].push_back(detail::parse_cell(cells[sensor_idx[m]], row));
        it->second.labels.push_back(
            label_idx ? detail::parse_cell(cells[*label_idx], row)
                      : std::numeric_limits<double>::quiet_NaN());
    }
    if (row == 0) throw std::runtime_error("no data rows in " + spec.path);

    std::vector<MtsSample> out;
    for (const auto& key : stream_order) {
        auto& st = streams[key];
        for (auto& s : st.series) interpolate_missing(s);
        auto windows = window_stream(st, spec);
        out.insert(out.end(), std::make_move_iterator(windows.begin()),
                   std::make_move_iterator(windows.end()));
    }
    return out;
}

// Per-sensor mean/std across all timestamps of all samples. A constant
// sensor gets stddev 1 so its z-scores become 0.
inline NormStats compute_norm_stats(const std::vector<MtsSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("compute_norm_stats: empty corpus");
    const std::size_t N = samples[0].sensors;
    NormStats st;
    st.mean.assign(N, 0.0);
    st.stddev.assign(N, 0.0);
    std::size_t count = 0;
    for (const auto& s : samples) {
        for (std::size_t m = 0; m < N; ++m)
            for (std::size_t t = 0; t < s.length; ++t) st.mean[m] += s.values[m * s.length + t];
        count += s.length;
    }
    for (auto& v : st.mean) v /= static_cast<double>(count);
    for (const auto& s : samples)
        for (std::size_t m = 0; m < N; ++m)
            for (std::size_t t = 0; t < s.length; ++t) {
                const double d = s.values[m * s.length + t] - st.mean[m];
                st.stddev[m] += d * d;
            }
    for (auto& v : st.stddev) {
        v = std::sqrt(v / static_cast<double>(count));
        if (v < 1e-12) v = 1.0;
    }
    return st;
}

inline void apply_norm_stats(std::vector<MtsSample>& samples, const NormStats& st) {
    for (auto& s : samples)
        for (std::size_t m = 0; m < s.sensors; ++m)
            for (std::size_t t = 0; t < s.length; ++t)
                s.values[m * s.length + t] =
                    (s.values[m * s.length + t] - st.mean[m]) / st.stddev[m];
}

// Synthetic domain-shift specification. A shared latent process drives all
// sensors; the target domain applies per-sensor affine shifts and rewires
// sensor correlations by permuting which latent mix each sensor observes.
struct SyntheticShiftSpec {
    std::size_t sensors = 6;
    std::size_t window_len = 32;
    std::size_t latent_dim = 3;
    std::size_t classes = 4;        // 0: regression on a latent amplitude
    double rul_horizon = 125.0;
    std::size_t windows = 2000;
    std::vector<double> target_scale;   // per sensor; empty = all 1
    std::vector<double> target_offset;  // per sensor; empty = all 0
    std::vector<std::size_t> sensor_permutation;  // empty = identity
    double noise_std = 0.1;
    std::uint64_t seed = 1;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string spec_string(const SyntheticShiftSpec& sp) {
    std::ostringstream os;
    os << sp.sensors << '|' << sp.window_len << '|' << sp.latent_dim << '|' << sp.classes << '|'
       << sp.rul_horizon << '|' << sp.windows << '|' << sp.noise_std << '|' << sp.seed << '|';
    for (auto v : sp.target_scale) os << v << ',';
    os << '|';
    for (auto v : sp.target_offset) os << v << ',';
    os << '|';
    for (auto v : sp.sensor_permutation) os << v << ',';
    return os.str();
}

}  // namespace detail

inline std::uint64_t spec_hash(const SyntheticShiftSpec& sp) {
    return detail::fnv1a(detail::spec_string(sp));
}

struct SyntheticCorpora {
    std::vector<MtsSample> source, target;
};

inline SyntheticCorpora generate_synthetic(const SyntheticShiftSpec& sp) {
    const std::size_t N = sp.sensors, L = sp.window_len, K = sp.latent_dim;
    std::vector<double> scale = sp.target_scale, offset = sp.target_offset;
    if (scale.empty()) scale.assign(N, 1.0);
    if (offset.empty()) offset.assign(N, 0.0);
    std::vector<std::size_t> perm = sp.sensor_permutation;
    if (perm.empty()) {
        perm.resize(N);
        for (std::size_t i = 0; i < N; ++i) perm[i] = i;
    }
    if (scale.size() != N || offset.size() != N || perm.size() != N)
        throw std::invalid_argument("synthetic spec: per-sensor fields must have N entries");
    {
        std::vector<bool> seen(N, false);
        for (auto p : perm) {
            if (p >= N || seen[p])
                throw std::invalid_argument("sensor_permutation is not a bijection");
            seen[p] = true;
        }
        for (auto s : scale)
            if (s <= 0.0) throw std::invalid_argument("target scale must be positive");
    }

    std::mt19937_64 mix_rng(sp.seed ^ 0x5ea0000000000001ull);
    // fixed sensor-to-latent mixing, shared by both domains
    std::vector<double> mix(N * K);
    for (auto& v : mix) v = 2.0 * sea::detail::unit_uniform(mix_rng) - 1.0;
    // class signatures: per-class frequency and per-latent amplitude
    const std::size_t C = std::max<std::size_t>(sp.classes, 1);
    std::vector<double> cls_freq(C * K), cls_amp(C * K);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t k = 0; k < K; ++k) {
            cls_freq[c * K + k] = 1.0 + static_cast<double>(c) + 0.5 * static_cast<double>(k);
            cls_amp[c * K + k] = 0.6 + sea::detail::unit_uniform(mix_rng);
        }

    auto make_domain = [&](std::uint64_t seed, bool shifted) {
        std::mt19937_64 rng(seed);
        std::vector<MtsSample> out;
        out.reserve(sp.windows);
        for (std::size_t w = 0; w < sp.windows; ++w) {
            std::size_t cls = 0;
            double amp_label = 0.0;
            if (sp.classes > 0) {
                cls = rng() % sp.classes;
            } else {
                amp_label = sea::detail::unit_uniform(rng) * sp.rul_horizon;
            }
            const double phase = 2.0 * M_PI * sea::detail::unit_uniform(rng);
            std::vector<double> latent(K * L);
            for (std::size_t k = 0; k < K; ++k) {
                const double f = cls_freq[cls * K + k];
                const double a =
                    sp.classes > 0 ? cls_amp[cls * K + k] : 0.5 + amp_label / sp.rul_horizon;
                for (std::size_t t = 0; t < L; ++t)
                    latent[k * L + t] =
                        a * std::sin(2.0 * M_PI * f * static_cast<double>(t) /
                                         static_cast<double>(L) +
                                     phase + 0.7 * static_cast<double>(k));
            }
            MtsSample s;
            s.sensors = N;
            s.length = L;
            s.values.resize(N * L);
            std::normal_distribution<double> noise(0.0, sp.noise_std);
            for (std::size_t m = 0; m < N; ++m) {
                const std::size_t src = shifted ? perm[m] : m;
                for (std::size_t t = 0; t < L; ++t) {
                    double v = 0.0;
                    for (std::size_t k = 0; k < K; ++k) v += mix[src * K + k] * latent[k * L + t];
                    v += noise(rng);
                    if (shifted) v = scale[m] * v + offset[m];
                    s.values[m * L + t] = v;
                }
            }
            s.label = sp.classes > 0 ? static_cast<double>(cls) : amp_label;
            out.push_back(std::move(s));
        }
        return out;
    };

    SyntheticCorpora corpora;
    corpora.source = make_domain(sp.seed * 2654435761ull + 1, false);
    corpora.target = make_domain(sp.seed * 2654435761ull + 2, true);
    return corpora;
}

// One window per "unit" block so a loader round trip reproduces the windows
// exactly.
inline void write_corpus_csv(const std::vector<MtsSample>& samples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    if (samples.empty()) throw std::invalid_argument("write_corpus_csv: empty corpus");
    const std::size_t N = samples[0].sensors;
    out << "window";
    for (std::size_t m = 0; m < N; ++m) out << ",s" << m;
    out << ",label\n";
    out.precision(17);
    for (std::size_t w = 0; w < samples.size(); ++w) {
        const auto& s = samples[w];
        for (std::size_t t = 0; t < s.length; ++t) {
            out << w;
            for (std::size_t m = 0; m < N; ++m) out << ',' << s.values[m * s.length + t];
            out << ',';
            if (s.label) out << *s.label;
            out << '\n';
        }
    }
}

inline CorpusSpec synthetic_corpus_spec(const std::string& path, std::size_t sensors,
                                        std::size_t window_len, bool classification) {
    CorpusSpec spec;
    spec.path = path;
    spec.schema = classification ? Schema::ActivityClassification : Schema::RulRegression;
    spec.window_len = window_len;
    spec.overlap = 0.0;
    for (std::size_t m = 0; m < sensors; ++m) spec.sensor_columns.push_back("s" + std::to_string(m));
    spec.label_column = "label";
    spec.unit_column = "window";
    return spec;
}

}  // namespace sea
