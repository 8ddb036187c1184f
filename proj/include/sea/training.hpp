#pragma once

// Optimization loop joining the supervised source loss with the alignment
// losses, plus Adam and the evaluation metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sea/alignment.hpp"
#include "sea/encoder.hpp"

namespace sea {

struct TrainConfig {
    std::size_t batch_size = 50;
    std::size_t epochs = 20;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
    bool classification = false;
};

struct AdamState {
    std::vector<std::vector<double>> m, v;
    std::size_t t = 0;
};

inline AdamState make_adam_state(const std::vector<Tensor>& params) {
    AdamState st;
    for (const auto& p : params) {
        st.m.emplace_back(p.size(), 0.0);
        st.v.emplace_back(p.size(), 0.0);
    }
    return st;
}

inline void adam_step(std::vector<Tensor>& params, AdamState& st, const TrainConfig& cfg) {
    if (st.m.size() != params.size())
        throw std::invalid_argument("adam state does not match parameter list");
    ++st.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].mutable_values();
        const auto& g = params[pi].grad();
        if (g.size() != vals.size())
            throw std::invalid_argument("gradient/parameter shape mismatch");
        for (std::size_t i = 0; i < vals.size(); ++i) {
            st.m[pi][i] = cfg.beta1 * st.m[pi][i] + (1.0 - cfg.beta1) * g[i];
            st.v[pi][i] = cfg.beta2 * st.v[pi][i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = st.m[pi][i] / bc1;
            const double vhat = st.v[pi][i] / bc2;
            vals[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

// Supervised source loss: MSE for regression, cross-entropy for
// classification (labels are class indices).
inline Tensor task_loss(const Tensor& preds, const std::vector<MtsSample>& batch,
                        bool classification) {
    const std::size_t B = preds.shape()[0];
    if (classification) {
        const std::size_t C = preds.shape()[1];
        std::vector<double> onehot(B * C, 0.0);
        for (std::size_t b = 0; b < B; ++b) {
            if (!batch[b].label) throw std::invalid_argument("unlabeled sample in source batch");
            auto cls = static_cast<std::size_t>(*batch[b].label);
            if (cls >= C) throw std::invalid_argument("class index out of range");
            onehot[b * C + cls] = 1.0;
        }
        Tensor mask = Tensor::constant({B, C}, std::move(onehot));
        Tensor true_logit = sum(mul(preds, mask), {1});
        return mean(sub(logsumexp_lastdim(preds), true_logit));
    }
    std::vector<double> y(B);
    for (std::size_t b = 0; b < B; ++b) {
        if (!batch[b].label) throw std::invalid_argument("unlabeled sample in source batch");
        y[b] = *batch[b].label;
    }
    Tensor diff = sub(reshape(preds, {B}), Tensor::constant({B}, std::move(y)));
    return mean(mul(diff, diff));
}

struct StepRecord {
    std::size_t step = 0, epoch = 0;
    double task = 0.0, exo = 0.0, endo = 0.0, total = 0.0;
};

struct MetricsReport {
    double rmse = 0.0;
    double score = 0.0;
    double accuracy = 0.0;
    std::size_t samples = 0;
};

inline MetricsReport evaluate(const EncoderParams& params, const std::vector<MtsSample>& corpus,
                              bool classification, std::size_t eval_batch = 256) {
    if (corpus.empty()) throw std::invalid_argument("evaluate: empty corpus");
    MetricsReport rep;
    double se = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < corpus.size(); start += eval_batch) {
        const std::size_t end = std::min(corpus.size(), start + eval_batch);
        std::vector<MtsSample> batch(corpus.begin() + start, corpus.begin() + end);
        auto graphs = encode(batch, params);
        auto gf = global_features(graphs.Z, params);
        const auto& pv = gf.predictions.values();
        const std::size_t C = gf.predictions.shape()[1];
        for (std::size_t b = 0; b < batch.size(); ++b) {
            if (!batch[b].label) throw std::invalid_argument("evaluate: unlabeled sample");
            const double truth = *batch[b].label;
            if (classification) {
                std::size_t best = 0;
                for (std::size_t c = 1; c < C; ++c)
                    if (pv[b * C + c] > pv[b * C + best]) best = c;
                if (best == static_cast<std::size_t>(truth)) ++correct;
            } else {
                const double d = pv[b * C] - truth;
                se += d * d;
                rep.score += d < 0 ? std::exp(-d / 13.0) - 1.0 : std::exp(d / 10.0) - 1.0;
            }
        }
        rep.samples += batch.size();
    }
    if (classification)
        rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.samples);
    else
        rep.rmse = std::sqrt(se / static_cast<double>(rep.samples));
    return rep;
}

struct TrainResult {
    EncoderParams params;
    std::vector<StepRecord> trace;
};

// One epoch's batch order: shuffled sample indices chopped into full
// batches; the trailing partial batch is dropped.
namespace detail {

inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count,
                                                           std::size_t batch_size,
                                                           std::mt19937_64& rng) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::size_t i = count; i-- > 1;) {
        std::size_t j = rng() % (i + 1);
        std::swap(idx[i], idx[j]);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start + batch_size <= count; start += batch_size)
        batches.emplace_back(idx.begin() + start, idx.begin() + start + batch_size);
    return batches;
}

inline std::vector<MtsSample> gather(const std::vector<MtsSample>& corpus,
                                     const std::vector<std::size_t>& idx, bool strip_labels) {
    std::vector<MtsSample> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        out.push_back(corpus[i]);
        if (strip_labels) out.back().label.reset();
    }
    return out;
}

}  // namespace detail

inline TrainResult train(const std::vector<MtsSample>& source,
                         const std::vector<MtsSample>& target, const EncoderConfig& enc_cfg,
                         const AlignmentConfig& align_cfg, const TrainConfig& cfg) {
    if (source.empty()) throw std::invalid_argument("train: empty source corpus");
    const bool aligned =
        align_cfg.lambda_sca != 0.0 || align_cfg.lambda_sfa != 0.0 || align_cfg.exo_weight != 0.0;
    if (aligned && target.empty()) throw std::invalid_argument("train: empty target corpus");
    if (cfg.batch_size < 2) throw std::invalid_argument("train: batch_size must be >= 2");

    const std::size_t N = source[0].sensors;
    const std::size_t Lhat = source[0].length / enc_cfg.patch_size;
    EncoderParams params = EncoderParams::init(enc_cfg, N, Lhat, cfg.seed);
    auto plist = params.all();
    AdamState adam = make_adam_state(plist);

    std::mt19937_64 rng_s(cfg.seed * 0x9e3779b97f4a7c15ull + 1);
    std::mt19937_64 rng_t(cfg.seed * 0x9e3779b97f4a7c15ull + 2);

    TrainResult result;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto sb = detail::epoch_batches(source.size(), cfg.batch_size, rng_s);
        std::vector<std::vector<std::size_t>> tb;
        if (aligned) tb = detail::epoch_batches(target.size(), cfg.batch_size, rng_t);
        const std::size_t steps = aligned ? std::max(sb.size(), tb.size()) : sb.size();
        if (steps == 0)
            throw std::invalid_argument("train: corpus smaller than one batch");

        for (std::size_t k = 0; k < steps; ++k) {
            params.zero_grads();
            auto src_batch = detail::gather(source, sb[k % sb.size()], false);
            auto src_graphs = encode(src_batch, params);
            auto src_gf = global_features(src_graphs.Z, params);
            Tensor t_loss = task_loss(src_gf.predictions, src_batch, cfg.classification);

            StepRecord rec;
            rec.step = step;
            rec.epoch = epoch;
            rec.task = t_loss.item();
            Tensor loss = t_loss;
            if (aligned) {
                auto tgt_batch = detail::gather(target, tb[k % tb.size()], true);
                auto tgt_graphs = encode(tgt_batch, params);
                auto tgt_gf = global_features(tgt_graphs.Z, params);
                if (align_cfg.exo_weight != 0.0) {
                    Tensor exo = scale(
                        exo_loss(src_gf.P, tgt_gf.P, align_cfg.coral_allow_degenerate),
                        align_cfg.exo_weight);
                    rec.exo = exo.item();
                    loss = add(loss, exo);
                }
                EndoInputs in{src_graphs.Z, tgt_graphs.Z, src_graphs.E, tgt_graphs.E};
                Tensor endo = endo_loss(in, align_cfg);
                rec.endo = endo.item();
                loss = add(loss, endo);
            }
            rec.total = rec.task + rec.exo + rec.endo;
            if (std::isnan(loss.item()))
                throw std::runtime_error("NaN loss at step " + std::to_string(step));
            backward(loss);
            adam_step(plist, adam, cfg);
            result.trace.push_back(rec);
            ++step;
        }
    }
    result.params = std::move(params);
    return result;
}

}  // namespace sea
