#pragma once

// Domain-discrepancy losses: correlation alignment (Coral), sensor
// correlation/feature alignment (SCA/SFA), their second-order variants
// (iSCA/iSFA), multi-graph weighting, and the composite objectives.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sea/tensor.hpp"

namespace sea {

enum class Variant { SEA, SEAPP };

struct AlignmentConfig {
    Variant variant = Variant::SEAPP;
    double lambda_sca = 0.1;
    double lambda_sfa = 0.1;
    double exo_weight = 10.0;
    bool mga_normalized = false;
    bool coral_allow_degenerate = false;  // batch of 1: treat covariance as zero
};

// Batch features and edges from both domains.
// Zs: ns x Lhat x N x d, Es: ns x Lhat x N x N (target likewise).
struct EndoInputs {
    Tensor Zs, Zt, Es, Et;
};

namespace detail {

// Unbiased covariance of an n x f batch, f x f.
inline Tensor covariance(const Tensor& H, bool allow_degenerate) {
    const std::size_t n = H.shape()[0], f = H.shape()[1];
    if (n < 2) {
        if (!allow_degenerate)
            throw std::invalid_argument("coral: covariance undefined for batch size " +
                                        std::to_string(n));
        return Tensor::zeros({f, f});
    }
    Tensor colsum = reshape(sum(H, {0}), {1, f});
    Tensor outer = matmul(transpose_last2(colsum), colsum);
    Tensor HtH = matmul(transpose_last2(H), H);
    return scale(sub(HtH, scale(outer, 1.0 / static_cast<double>(n))),
                 1.0 / static_cast<double>(n - 1));
}

}  // namespace detail

// Deep Coral discrepancy between two feature batches, ||Cs - Ct||_F^2 / 4f^2.
inline Tensor coral(const Tensor& Hs, const Tensor& Ht, bool allow_degenerate = false) {
    if (Hs.shape().size() != 2 || Ht.shape().size() != 2 ||
        Hs.shape()[1] != Ht.shape()[1])
        throw std::invalid_argument("coral: expected n x f batches with matching f, got " +
                                    shape_str(Hs.shape()) + " and " + shape_str(Ht.shape()));
    const double f = static_cast<double>(Hs.shape()[1]);
    Tensor Cs = detail::covariance(Hs, allow_degenerate);
    Tensor Ct = detail::covariance(Ht, allow_degenerate);
    return scale(frobenius_sq(sub(Cs, Ct)), 1.0 / (4.0 * f * f));
}

// Mean absolute difference of batch- and graph-averaged edge weights.
inline Tensor sca_loss(const Tensor& Es, const Tensor& Et) {
    Tensor ebar_s = mean(Es, {0, 1});  // N x N
    Tensor ebar_t = mean(Et, {0, 1});
    return mean(abs(sub(ebar_s, ebar_t)));
}

// Contrast batch- and graph-averaged sensor prototypes across domains.
inline Tensor sfa_loss(const Tensor& Zs, const Tensor& Zt) {
    Tensor ps = mean(Zs, {0, 1});  // N x d
    Tensor pt = mean(Zt, {0, 1});
    Tensor phi = matmul(ps, transpose_last2(pt));  // N x N
    const std::size_t N = phi.shape()[0];
    std::vector<double> eye(N * N, 0.0);
    for (std::size_t i = 0; i < N; ++i) eye[i * N + i] = 1.0;
    Tensor diag = sum(mul(phi, Tensor::constant({N, N}, std::move(eye))), {1});
    return mean(sub(logsumexp_lastdim(phi), diag));
}

// Per-graph Coral over each edge's batch vector (f = 1 reduces Coral to a
// squared variance difference over 4).
inline Tensor isca_loss_per_graph(const Tensor& Es_T, const Tensor& Et_T,
                                  bool allow_degenerate = false) {
    auto edge_var = [&](const Tensor& E) {
        const std::size_t n = E.shape()[0];
        if (n < 2) {
            if (!allow_degenerate)
                throw std::invalid_argument("isca: batch size must be >= 2, got " +
                                            std::to_string(n));
            return Tensor::zeros({E.shape()[1], E.shape()[2]});
        }
        Tensor s2 = sum(mul(E, E), {0});
        Tensor m = mean(E, {0});
        return scale(sub(s2, scale(mul(m, m), static_cast<double>(n))),
                     1.0 / static_cast<double>(n - 1));
    };
    Tensor diff = sub(edge_var(Es_T), edge_var(Et_T));
    return mean(scale(mul(diff, diff), 0.25));
}

// Per-graph contrast of per-sensor Coral discrepancies. Uses exp(-M_c) so
// that minimizing the loss shrinks corresponding-sensor discrepancy.
inline Tensor isfa_loss_per_graph(const Tensor& Zs_T, const Tensor& Zt_T,
                                  bool allow_degenerate = false) {
    const std::size_t N = Zs_T.shape()[1];
    const double d = static_cast<double>(Zs_T.shape()[2]);
    std::vector<Tensor> Cs(N), Ct(N);
    for (std::size_t n = 0; n < N; ++n) {
        Cs[n] = detail::covariance(select(Zs_T, 1, n), allow_degenerate);
        Ct[n] = detail::covariance(select(Zt_T, 1, n), allow_degenerate);
    }
    std::vector<Tensor> rows;
    rows.reserve(N);
    for (std::size_t m = 0; m < N; ++m) {
        std::vector<Tensor> entries;
        entries.reserve(N);
        for (std::size_t j = 0; j < N; ++j)
            entries.push_back(neg(scale(frobenius_sq(sub(Cs[m], Ct[j])), 1.0 / (4.0 * d * d))));
        rows.push_back(reshape(stack(entries, 0), {N}));
    }
    Tensor logits = stack(rows, 0);  // N x N of -M_c
    std::vector<double> eye(N * N, 0.0);
    for (std::size_t i = 0; i < N; ++i) eye[i * N + i] = 1.0;
    Tensor diag = sum(mul(logits, Tensor::constant({N, N}, std::move(eye))), {1});
    return mean(sub(logsumexp_lastdim(logits), diag));
}

// Per-graph discrepancy weights, measured on detached features so no
// gradient flows through the weighting.
inline std::vector<double> mga_weights(const Tensor& Zs, const Tensor& Zt,
                                       bool normalized = false,
                                       bool allow_degenerate = false) {
    Tensor zs = detach(Zs), zt = detach(Zt);
    const std::size_t Lhat = zs.shape()[1];
    const std::size_t ns = zs.shape()[0], nt = zt.shape()[0];
    const std::size_t flat = zs.shape()[2] * zs.shape()[3];
    std::vector<double> w(Lhat);
    for (std::size_t T = 0; T < Lhat; ++T) {
        Tensor Hs = reshape(select(zs, 1, T), {ns, flat});
        Tensor Ht = reshape(select(zt, 1, T), {nt, flat});
        w[T] = coral(Hs, Ht, allow_degenerate).item();
    }
    if (normalized) {
        double total = 0.0;
        for (double x : w) total += x;
        if (total > 0.0)
            for (double& x : w) x *= static_cast<double>(Lhat) / total;
    }
    return w;
}

// Composite sensor-level alignment loss for the configured variant.
// frozen_weights, when given, bypasses the per-graph weight measurement
// (used by finite-difference checks, where the weights must stay constant).
inline Tensor endo_loss(const EndoInputs& in, const AlignmentConfig& cfg,
                        const std::vector<double>* frozen_weights = nullptr) {
    if (cfg.lambda_sca == 0.0 && cfg.lambda_sfa == 0.0) return Tensor::zeros({1});
    if (cfg.variant == Variant::SEA) {
        Tensor out = Tensor::zeros({1});
        if (cfg.lambda_sca != 0.0)
            out = add(out, scale(sca_loss(in.Es, in.Et), cfg.lambda_sca));
        if (cfg.lambda_sfa != 0.0)
            out = add(out, scale(sfa_loss(in.Zs, in.Zt), cfg.lambda_sfa));
        return out;
    }
    auto w = frozen_weights
                 ? *frozen_weights
                 : mga_weights(in.Zs, in.Zt, cfg.mga_normalized, cfg.coral_allow_degenerate);
    Tensor out = Tensor::zeros({1});
    for (std::size_t T = 0; T < w.size(); ++T) {
        if (w[T] == 0.0) continue;
        Tensor per_graph = Tensor::zeros({1});
        if (cfg.lambda_sca != 0.0)
            per_graph = add(per_graph,
                            scale(isca_loss_per_graph(select(in.Es, 1, T), select(in.Et, 1, T),
                                                      cfg.coral_allow_degenerate),
                                  cfg.lambda_sca));
        if (cfg.lambda_sfa != 0.0)
            per_graph = add(per_graph,
                            scale(isfa_loss_per_graph(select(in.Zs, 1, T), select(in.Zt, 1, T),
                                                      cfg.coral_allow_degenerate),
                                  cfg.lambda_sfa));
        out = add(out, scale(per_graph, w[T]));
    }
    return out;
}

// Global feature alignment, Coral on the pooled features.
inline Tensor exo_loss(const Tensor& Ps, const Tensor& Pt, bool allow_degenerate = false) {
    return coral(Ps, Pt, allow_degenerate);
}

// L = L_task + w_exo * L_exo + L_endo.
inline Tensor total_loss(const Tensor& task_loss, const EndoInputs& in, const Tensor& Ps,
                         const Tensor& Pt, const AlignmentConfig& cfg) {
    Tensor out = task_loss;
    if (cfg.exo_weight != 0.0)
        out = add(out, scale(exo_loss(Ps, Pt, cfg.coral_allow_degenerate), cfg.exo_weight));
    return add(out, endo_loss(in, cfg));
}

}  // namespace sea
