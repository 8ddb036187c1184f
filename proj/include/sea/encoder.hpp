#pragma once

// Graph-based spatial-temporal encoder: patch segmentation, multi-branch
// self-attention graph construction, message passing, per-sensor gated
// recurrence, and the global feature head.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sea/tensor.hpp"

namespace sea {

// One N-sensor, L-timestamp window. values is row-major sensor-major:
// values[m * length + t].
struct MtsSample {
    std::size_t sensors = 0;
    std::size_t length = 0;
    std::vector<double> values;
    std::optional<double> label;  // RUL value or class index
};

struct SeqGraphBatch {
    Tensor Z;  // B x Lhat x N x d
    Tensor E;  // B x Lhat x N x N
};

struct EncoderConfig {
    std::size_t patch_size = 8;    // d
    std::size_t branches = 3;      // n_b
    std::size_t global_dim = 32;   // F
    std::size_t output_dim = 1;    // 1 for regression, classes otherwise
};

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Tensor init_param(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = (2.0 * unit_uniform(rng) - 1.0) * bound;
    return Tensor::param(std::move(shape), std::move(v));
}

}  // namespace detail

struct AttentionBranch {
    Tensor W_Q;  // d x d
    Tensor W_K;  // d x d
};

struct LstmParams {
    Tensor W_xi, W_hi, b_i;
    Tensor W_xf, W_hf, b_f;
    Tensor W_xo, W_ho, b_o;
    Tensor W_xc, W_hc, b_c;
};

// All trainable parameters. Built for fixed (N, Lhat) since the global head
// consumes the flattened sensor features.
struct EncoderParams {
    EncoderConfig cfg;
    std::size_t sensors = 0;
    std::size_t seq_len = 0;  // Lhat

    Tensor W_L, b_L;                       // patch projection f_L
    std::vector<AttentionBranch> branches;
    Tensor W_G;                            // MPNN update
    LstmParams lstm;
    Tensor W_g1, b_g1, W_g2, b_g2;         // global MLP -> P
    Tensor W_head, b_head;                 // task head

    static EncoderParams init(const EncoderConfig& cfg, std::size_t sensors,
                              std::size_t seq_len, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const std::size_t d = cfg.patch_size;
        EncoderParams p;
        p.cfg = cfg;
        p.sensors = sensors;
        p.seq_len = seq_len;

        p.W_L = detail::init_param({d, d}, d, rng);
        p.b_L = detail::init_param({d}, d, rng);
        for (std::size_t i = 0; i < cfg.branches; ++i)
            p.branches.push_back({detail::init_param({d, d}, d, rng),
                                  detail::init_param({d, d}, d, rng)});
        p.W_G = detail::init_param({d, d}, d, rng);

        auto gate = [&](Tensor& wx, Tensor& wh, Tensor& b) {
            wx = detail::init_param({d, d}, d, rng);
            wh = detail::init_param({d, d}, d, rng);
            b = detail::init_param({d}, d, rng);
        };
        gate(p.lstm.W_xi, p.lstm.W_hi, p.lstm.b_i);
        gate(p.lstm.W_xf, p.lstm.W_hf, p.lstm.b_f);
        gate(p.lstm.W_xo, p.lstm.W_ho, p.lstm.b_o);
        gate(p.lstm.W_xc, p.lstm.W_hc, p.lstm.b_c);

        const std::size_t flat = seq_len * sensors * d;
        const std::size_t F = cfg.global_dim;
        p.W_g1 = detail::init_param({flat, F}, flat, rng);
        p.b_g1 = detail::init_param({F}, flat, rng);
        p.W_g2 = detail::init_param({F, F}, F, rng);
        p.b_g2 = detail::init_param({F}, F, rng);
        p.W_head = detail::init_param({F, cfg.output_dim}, F, rng);
        p.b_head = detail::init_param({cfg.output_dim}, F, rng);
        return p;
    }

    std::vector<std::pair<std::string, Tensor>> named() const {
        std::vector<std::pair<std::string, Tensor>> out = {
            {"W_L", W_L}, {"b_L", b_L}, {"W_G", W_G},
            {"lstm.W_xi", lstm.W_xi}, {"lstm.W_hi", lstm.W_hi}, {"lstm.b_i", lstm.b_i},
            {"lstm.W_xf", lstm.W_xf}, {"lstm.W_hf", lstm.W_hf}, {"lstm.b_f", lstm.b_f},
            {"lstm.W_xo", lstm.W_xo}, {"lstm.W_ho", lstm.W_ho}, {"lstm.b_o", lstm.b_o},
            {"lstm.W_xc", lstm.W_xc}, {"lstm.W_hc", lstm.W_hc}, {"lstm.b_c", lstm.b_c},
            {"W_g1", W_g1}, {"b_g1", b_g1}, {"W_g2", W_g2}, {"b_g2", b_g2},
            {"W_head", W_head}, {"b_head", b_head}};
        for (std::size_t i = 0; i < branches.size(); ++i) {
            out.push_back({"branch" + std::to_string(i) + ".W_Q", branches[i].W_Q});
            out.push_back({"branch" + std::to_string(i) + ".W_K", branches[i].W_K});
        }
        return out;
    }

    std::vector<Tensor> all() const {
        std::vector<Tensor> out;
        for (auto& [name, t] : named()) out.push_back(t);
        return out;
    }

    void zero_grads() {
        for (auto t : all()) t.zero_grad();
    }
};

// Pack a batch of samples into a constant B x N x L tensor.
inline Tensor pack_batch(const std::vector<MtsSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const std::size_t N = batch[0].sensors, L = batch[0].length;
    std::vector<double> v;
    v.reserve(batch.size() * N * L);
    for (const auto& s : batch) {
        if (s.sensors != N || s.length != L)
            throw std::invalid_argument("inconsistent sample dimensions in batch");
        v.insert(v.end(), s.values.begin(), s.values.end());
    }
    return Tensor::constant({batch.size(), N, L}, std::move(v));
}

// Split each sensor series into Lhat = floor(L/d) patches of d timestamps
// (trailing remainder dropped) and apply f_L = ReLU(z W_L + b_L).
// x: B x N x L -> B x Lhat x N x d
inline Tensor segment(const Tensor& x, const Tensor& W_L, const Tensor& b_L) {
    const Shape& s = x.shape();
    const std::size_t B = s[0], N = s[1], L = s[2];
    const std::size_t d = W_L.shape()[0];
    if (d < 1 || d > L)
        throw std::invalid_argument("patch size " + std::to_string(d) +
                                    " exceeds window length " + std::to_string(L));
    const std::size_t Lhat = L / d;
    std::vector<double> raw(B * Lhat * N * d);
    const auto& xv = x.values();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t T = 0; T < Lhat; ++T)
            for (std::size_t m = 0; m < N; ++m)
                for (std::size_t t = 0; t < d; ++t)
                    raw[((b * Lhat + T) * N + m) * d + t] =
                        xv[(b * N + m) * L + T * d + t];
    Tensor patches = Tensor::constant({B, Lhat, N, d}, std::move(raw));
    return relu(add(matmul(patches, W_L), b_L));
}

// Multi-branch self-attention edges for one graph.
// Z_T: B x N x d -> E_T: B x N x N with rows on the simplex.
inline Tensor msgc_edges(const Tensor& Z_T, const std::vector<AttentionBranch>& branches) {
    if (branches.empty()) throw std::invalid_argument("msgc_edges: need at least one branch");
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(Z_T.shape().back()));
    Tensor acc;
    for (const auto& br : branches) {
        Tensor q = matmul(Z_T, br.W_Q);
        Tensor k = matmul(Z_T, br.W_K);
        Tensor logits = scale(matmul(q, transpose_last2(k)), inv_sqrt_d);
        Tensor e = softmax_lastdim(logits);
        acc = acc.defined() ? add(acc, e) : e;
    }
    return scale(acc, 1.0 / static_cast<double>(branches.size()));
}

// One message-passing step: h_m = sum_j e_mj z_j, z'_m = ReLU(h_m W_G).
inline Tensor mpnn_update(const Tensor& Z_T, const Tensor& E_T, const Tensor& W_G) {
    return relu(matmul(matmul(E_T, Z_T), W_G));
}

// Gated recurrence over the graph sequence, shared across sensors; returns
// the hidden state at every T. Z: B x Lhat x N x d -> same shape.
inline Tensor temporal_update(const Tensor& Z, const LstmParams& p) {
    const Shape& s = Z.shape();
    const std::size_t B = s[0], Lhat = s[1], N = s[2], d = s[3];
    Tensor h = Tensor::zeros({B, N, d});
    Tensor c = Tensor::zeros({B, N, d});
    std::vector<Tensor> outputs;
    outputs.reserve(Lhat);
    for (std::size_t T = 0; T < Lhat; ++T) {
        Tensor x = select(Z, 1, T);
        Tensor i = sigmoid(add(add(matmul(x, p.W_xi), matmul(h, p.W_hi)), p.b_i));
        Tensor f = sigmoid(add(add(matmul(x, p.W_xf), matmul(h, p.W_hf)), p.b_f));
        Tensor o = sigmoid(add(add(matmul(x, p.W_xo), matmul(h, p.W_ho)), p.b_o));
        Tensor g = tanh(add(add(matmul(x, p.W_xc), matmul(h, p.W_hc)), p.b_c));
        c = add(mul(f, c), mul(i, g));
        h = mul(o, tanh(c));
        outputs.push_back(h);
    }
    return stack(outputs, 1);
}

// Full encoder: segmentation -> MSGC -> MPNN -> recurrence. E is the edge
// tensor MSGC emitted (the object the correlation losses align).
inline SeqGraphBatch encode(const std::vector<MtsSample>& batch, const EncoderParams& params) {
    Tensor x = pack_batch(batch);
    Tensor Zf = segment(x, params.W_L, params.b_L);  // B x Lhat x N x d
    const std::size_t Lhat = Zf.shape()[1];

    std::vector<Tensor> Es, Zs;
    Es.reserve(Lhat);
    Zs.reserve(Lhat);
    for (std::size_t T = 0; T < Lhat; ++T) {
        Tensor Z_T = select(Zf, 1, T);
        Tensor E_T = msgc_edges(Z_T, params.branches);
        Es.push_back(E_T);
        Zs.push_back(mpnn_update(Z_T, E_T, params.W_G));
    }
    Tensor Z = temporal_update(stack(Zs, 1), params.lstm);
    return {Z, stack(Es, 1)};
}

struct GlobalFeatures {
    Tensor P;            // B x F
    Tensor predictions;  // B x output_dim
};

// Flatten sensor features per sample and map through the global MLP and
// task head.
inline GlobalFeatures global_features(const Tensor& Z, const EncoderParams& params) {
    const Shape& s = Z.shape();
    const std::size_t B = s[0];
    Tensor flat = reshape(Z, {B, s[1] * s[2] * s[3]});
    Tensor h = relu(add(matmul(flat, params.W_g1), params.b_g1));
    Tensor P = add(matmul(h, params.W_g2), params.b_g2);
    Tensor preds = add(matmul(P, params.W_head), params.b_head);
    return {P, preds};
}

}  // namespace sea
