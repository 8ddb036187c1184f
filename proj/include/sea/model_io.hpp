#pragma once

// Versioned binary model format: magic, schema version, encoder dimensions,
// then named parameter tensors with shapes.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "sea/encoder.hpp"

namespace sea {

inline constexpr char kModelMagic[8] = {'S', 'E', 'A', 'M', 'D', 'L', '0', '\n'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated model file");
    return v;
}

}  // namespace detail

inline void save_model(const EncoderParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    detail::write_pod(out, kModelVersion);
    detail::write_pod<std::uint64_t>(out, params.cfg.patch_size);
    detail::write_pod<std::uint64_t>(out, params.cfg.branches);
    detail::write_pod<std::uint64_t>(out, params.cfg.global_dim);
    detail::write_pod<std::uint64_t>(out, params.cfg.output_dim);
    detail::write_pod<std::uint64_t>(out, params.sensors);
    detail::write_pod<std::uint64_t>(out, params.seq_len);
    auto named = params.named();
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, t] : named) {
        detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
        for (auto e : t.shape()) detail::write_pod<std::uint64_t>(out, e);
        out.write(reinterpret_cast<const char*>(t.values().data()),
                  static_cast<std::streamsize>(t.values().size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline EncoderParams load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw std::runtime_error(path + " is not a model file");
    const auto version = detail::read_pod<std::uint32_t>(in);
    if (version != kModelVersion)
        throw std::runtime_error("unsupported model version " + std::to_string(version));
    EncoderConfig cfg;
    cfg.patch_size = detail::read_pod<std::uint64_t>(in);
    cfg.branches = detail::read_pod<std::uint64_t>(in);
    cfg.global_dim = detail::read_pod<std::uint64_t>(in);
    cfg.output_dim = detail::read_pod<std::uint64_t>(in);
    const auto sensors = detail::read_pod<std::uint64_t>(in);
    const auto seq_len = detail::read_pod<std::uint64_t>(in);

    EncoderParams params = EncoderParams::init(cfg, sensors, seq_len, 0);
    auto named = params.named();
    const auto count = detail::read_pod<std::uint32_t>(in);
    if (count != named.size())
        throw std::runtime_error("model parameter count mismatch in " + path);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = detail::read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto ndim = detail::read_pod<std::uint32_t>(in);
        Shape shape(ndim);
        for (auto& e : shape) e = detail::read_pod<std::uint64_t>(in);
        auto it = std::find_if(named.begin(), named.end(),
                               [&](const auto& kv) { return kv.first == name; });
        if (it == named.end())
            throw std::runtime_error("unknown parameter '" + name + "' in " + path);
        Tensor t = it->second;
        if (t.shape() != shape)
            throw std::runtime_error("shape mismatch for parameter '" + name + "' in " + path);
        in.read(reinterpret_cast<char*>(t.mutable_values().data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated model file " + path);
    }
    return params;
}

}  // namespace sea
