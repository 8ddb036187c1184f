#pragma once

// Finite-difference verification of every loss component on a small
// randomized instance. Alignment losses are checked against their direct
// feature and edge inputs (created as leaf parameters); the task loss and
// the composite objective are checked through the full encoder against the
// model parameters.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sea/alignment.hpp"
#include "sea/encoder.hpp"
#include "sea/gradcheck.hpp"
#include "sea/training.hpp"

namespace sea {

struct GradCheckRow {
    std::string component;
    std::string variant;
    double max_rel_err = 0.0;
};

struct GradCheckSetup {
    std::size_t sensors = 3;
    std::size_t window_len = 8;
    std::size_t patch_size = 2;
    std::size_t batch = 4;
    std::size_t branches = 2;
    std::size_t global_dim = 3;
    std::size_t classes = 2;
    std::uint64_t seed = 8;
};

// One row per (component, variant) pair; variant-independent components
// appear once.
inline std::vector<GradCheckRow> gradcheck_report(const GradCheckSetup& setup,
                                                  const std::string& only_component = "") {
    std::mt19937_64 rng(setup.seed);
    const std::size_t N = setup.sensors, d = setup.patch_size, B = setup.batch;
    const std::size_t Lhat = setup.window_len / setup.patch_size;

    auto rand_param = [&](Shape shape) {
        std::vector<double> v(numel(shape));
        for (auto& x : v) x = 2.0 * detail::unit_uniform(rng) - 1.0;
        return Tensor::param(std::move(shape), std::move(v));
    };
    Tensor Zs = rand_param({B, Lhat, N, d}), Zt = rand_param({B, Lhat, N, d});
    Tensor Es = rand_param({B, Lhat, N, N}), Et = rand_param({B, Lhat, N, N});
    Tensor Hs = rand_param({B, setup.global_dim}), Ht = rand_param({B, setup.global_dim});

    auto make_batch = [&] {
        std::vector<MtsSample> out;
        for (std::size_t b = 0; b < B; ++b) {
            MtsSample s;
            s.sensors = N;
            s.length = setup.window_len;
            s.values.resize(N * setup.window_len);
            for (auto& v : s.values) v = 2.0 * detail::unit_uniform(rng) - 1.0;
            s.label = static_cast<double>(rng() % setup.classes);
            out.push_back(std::move(s));
        }
        return out;
    };
    auto source = make_batch();
    auto target = make_batch();

    EncoderConfig ec;
    ec.patch_size = setup.patch_size;
    ec.branches = setup.branches;
    ec.global_dim = setup.global_dim;
    ec.output_dim = setup.classes;
    EncoderParams params = EncoderParams::init(ec, N, Lhat, setup.seed);
    auto model_params = params.all();

    AlignmentConfig sea_cfg;
    sea_cfg.variant = Variant::SEA;
    AlignmentConfig pp_cfg;
    pp_cfg.variant = Variant::SEAPP;
    // SEA++ endo uses frozen per-graph weights so the measured weights do
    // not enter the finite differences.
    const auto frozen_w = mga_weights(Zs, Zt);

    struct Component {
        std::string name;
        std::string variant;
        std::function<Tensor()> loss;
        std::vector<Tensor>* wrt;
    };
    std::vector<Tensor> feat{Zs, Zt}, edge{Es, Et}, pooled{Hs, Ht},
        endo_in{Zs, Zt, Es, Et};
    std::vector<Component> components{
        {"coral", "-", [&] { return coral(Hs, Ht); }, &pooled},
        {"sca", "SEA", [&] { return sca_loss(Es, Et); }, &edge},
        {"sfa", "SEA", [&] { return sfa_loss(Zs, Zt); }, &feat},
        {"isca", "SEA++",
         [&] { return isca_loss_per_graph(select(Es, 1, 0), select(Et, 1, 0)); }, &edge},
        {"isfa", "SEA++",
         [&] { return isfa_loss_per_graph(select(Zs, 1, 0), select(Zt, 1, 0)); }, &feat},
        {"endo", "SEA", [&] { return endo_loss({Zs, Zt, Es, Et}, sea_cfg); }, &endo_in},
        {"endo", "SEA++", [&] { return endo_loss({Zs, Zt, Es, Et}, pp_cfg, &frozen_w); },
         &endo_in},
        {"task", "-",
         [&] {
             auto gs = encode(source, params);
             return task_loss(global_features(gs.Z, params).predictions, source, true);
         },
         &model_params},
    };
    const auto frozen_w_model = [&] {
        auto gs = encode(source, params);
        auto gt = encode(target, params);
        return mga_weights(gs.Z, gt.Z);
    }();
    for (const auto* cfg : {&sea_cfg, &pp_cfg}) {
        components.push_back(
            {"total", cfg == &sea_cfg ? "SEA" : "SEA++",
             [&, cfg] {
                 auto gs = encode(source, params);
                 auto gt = encode(target, params);
                 auto gfs = global_features(gs.Z, params);
                 auto gft = global_features(gt.Z, params);
                 Tensor out = task_loss(gfs.predictions, source, true);
                 out = add(out, scale(exo_loss(gfs.P, gft.P), cfg->exo_weight));
                 const auto* w = cfg->variant == Variant::SEAPP ? &frozen_w_model : nullptr;
                 return add(out, endo_loss({gs.Z, gt.Z, gs.E, gt.E}, *cfg, w));
             },
             &model_params});
    }

    std::vector<GradCheckRow> rows;
    for (auto& c : components) {
        if (!only_component.empty() && c.name != only_component) continue;
        rows.push_back({c.name, c.variant, grad_check(c.loss, *c.wrt)});
    }
    return rows;
}

}  // namespace sea
