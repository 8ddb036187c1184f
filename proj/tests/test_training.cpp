#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sea/data.hpp"
#include "sea/training.hpp"

using namespace sea;

namespace {

std::vector<MtsSample> labeled_batch(std::size_t B, std::size_t N, std::size_t L,
                                     std::size_t classes, std::mt19937_64& rng) {
    std::vector<MtsSample> out;
    for (std::size_t b = 0; b < B; ++b) {
        MtsSample s;
        s.sensors = N;
        s.length = L;
        s.values = oracle::random_vec(N * L, rng);
        s.label = static_cast<double>(classes ? rng() % classes : oracle::unit_uniform(rng));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("adam zero gradient leaves params unchanged, moments decay") {
    Tensor p = Tensor::param({2}, {1.0, -2.0});
    std::vector<Tensor> params{p};
    auto st = make_adam_state(params);
    TrainConfig cfg;
    p.zero_grad();
    adam_step(params, st, cfg);
    CHECK(p.values()[0] == doctest::Approx(1.0));
    CHECK(p.values()[1] == doctest::Approx(-2.0));

    // moments decay toward zero once the gradient goes quiet
    backward(sum(p));
    adam_step(params, st, cfg);
    const double m_after = st.m[0][0], v_after = st.v[0][0];
    p.zero_grad();
    adam_step(params, st, cfg);
    CHECK(st.m[0][0] == doctest::Approx(m_after * cfg.beta1));
    CHECK(st.v[0][0] == doctest::Approx(v_after * cfg.beta2));
}

TEST_CASE("adam first step magnitude equals lr") {
    Tensor p = Tensor::param({1}, {0.0});
    std::vector<Tensor> params{p};
    auto st = make_adam_state(params);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.adam_eps = 0.0;  // exact closed form
    backward(p);  // grad = 1
    adam_step(params, st, cfg);
    CHECK(p.values()[0] == doctest::Approx(-0.01).epsilon(1e-12));
}

TEST_CASE("adam two constant-gradient steps match hand-unrolled oracle") {
    Tensor p = Tensor::param({1}, {1.0});
    std::vector<Tensor> params{p};
    auto st = make_adam_state(params);
    TrainConfig cfg;
    const double g = 0.7, lr = cfg.learning_rate, b1 = cfg.beta1, b2 = cfg.beta2,
                 eps = cfg.adam_eps;
    double m = 0, v = 0, x = 1.0;
    for (int t = 1; t <= 2; ++t) {
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        x -= lr * mhat / (std::sqrt(vhat) + eps);

        p.zero_grad();
        backward(scale(p, g));
        adam_step(params, st, cfg);
        CHECK(p.values()[0] == doctest::Approx(x).epsilon(1e-12));
    }
}

TEST_CASE("evaluate closed forms") {
    EncoderConfig cfg;
    cfg.patch_size = 2;
    cfg.branches = 1;
    cfg.global_dim = 2;
    cfg.output_dim = 1;
    // fabricate perfect predictions by zeroing the model and labels
    EncoderParams params = EncoderParams::init(cfg, 1, 2, 1);
    for (auto t : params.all())
        std::fill(t.mutable_values().begin(), t.mutable_values().end(), 0.0);
    MtsSample s;
    s.sensors = 1;
    s.length = 4;
    s.values = {0, 0, 0, 0};
    s.label = 0.0;
    auto rep = evaluate(params, {s}, /*classification=*/false);
    CHECK(rep.rmse == doctest::Approx(0.0));
    CHECK(rep.score == doctest::Approx(0.0));

    // pred - true = -13 -> e - 1 ; pred - true = +10 -> e - 1
    std::fill(params.b_head.mutable_values().begin(), params.b_head.mutable_values().end(), 0.0);
    s.label = 13.0;  // prediction is 0
    rep = evaluate(params, {s}, false);
    CHECK(rep.score == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-9));
    CHECK(rep.rmse == doctest::Approx(13.0));
    s.label = -10.0;
    rep = evaluate(params, {s}, false);
    CHECK(rep.score == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-9));
}

TEST_CASE("evaluate accuracy") {
    EncoderConfig cfg;
    cfg.patch_size = 2;
    cfg.branches = 1;
    cfg.global_dim = 2;
    cfg.output_dim = 3;
    EncoderParams params = EncoderParams::init(cfg, 1, 2, 1);
    for (auto t : params.all())
        std::fill(t.mutable_values().begin(), t.mutable_values().end(), 0.0);
    params.b_head.mutable_values() = {0.0, 1.0, 0.0};  // always predicts class 1
    MtsSample s;
    s.sensors = 1;
    s.length = 4;
    s.values = {0, 0, 0, 0};
    s.label = 1.0;
    MtsSample w = s;
    w.label = 2.0;
    auto rep = evaluate(params, {s, w, s, s}, /*classification=*/true);
    CHECK(rep.accuracy == doctest::Approx(0.75));
    CHECK_THROWS_AS(evaluate(params, {}, true), std::invalid_argument);
}

TEST_CASE("task loss errors") {
    Tensor preds = Tensor::constant({2, 3}, {0, 0, 0, 0, 0, 0});
    std::mt19937_64 rng(1);
    auto batch = labeled_batch(2, 1, 4, 3, rng);
    batch[0].label.reset();
    CHECK_THROWS_AS(task_loss(preds, batch, true), std::invalid_argument);
    batch[0].label = 7.0;
    CHECK_THROWS_AS(task_loss(preds, batch, true), std::invalid_argument);
}

TEST_CASE("fixed seed gives bit-identical traces") {
    std::mt19937_64 rng(2);
    auto source = labeled_batch(12, 2, 8, 2, rng);
    auto target = labeled_batch(12, 2, 8, 2, rng);
    EncoderConfig ec;
    ec.patch_size = 4;
    ec.branches = 2;
    ec.global_dim = 4;
    ec.output_dim = 2;
    AlignmentConfig ac;
    ac.variant = Variant::SEAPP;
    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 2;
    tc.seed = 5;
    tc.classification = true;
    auto r1 = train(source, target, ec, ac, tc);
    auto r2 = train(source, target, ec, ac, tc);
    REQUIRE(r1.trace.size() == r2.trace.size());
    for (std::size_t i = 0; i < r1.trace.size(); ++i) {
        CHECK(r1.trace[i].total == r2.trace[i].total);
        CHECK(r1.trace[i].task == r2.trace[i].task);
    }
    const auto p1 = r1.params.all();
    const auto p2 = r2.params.all();
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].values() == p2[i].values());
}

TEST_CASE("all alignment weights zero reduces to source-only training") {
    std::mt19937_64 rng(3);
    auto source = labeled_batch(12, 2, 8, 2, rng);
    auto target = labeled_batch(12, 2, 8, 2, rng);
    EncoderConfig ec;
    ec.patch_size = 4;
    ec.branches = 1;
    ec.global_dim = 4;
    ec.output_dim = 2;
    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 2;
    tc.seed = 9;
    tc.classification = true;

    AlignmentConfig off;
    off.lambda_sca = off.lambda_sfa = 0.0;
    off.exo_weight = 0.0;
    auto with_target = train(source, target, ec, off, tc);
    auto source_only = train(source, {}, ec, off, tc);
    REQUIRE(with_target.trace.size() == source_only.trace.size());
    for (std::size_t i = 0; i < with_target.trace.size(); ++i) {
        CHECK(with_target.trace[i].total == source_only.trace[i].total);
        CHECK(with_target.trace[i].endo == 0.0);
        CHECK(with_target.trace[i].exo == 0.0);
    }
}

TEST_CASE("target labels never affect training") {
    std::mt19937_64 rng(4);
    auto source = labeled_batch(10, 2, 8, 2, rng);
    auto target = labeled_batch(10, 2, 8, 2, rng);
    auto target_unlabeled = target;
    for (auto& s : target_unlabeled) s.label.reset();
    EncoderConfig ec;
    ec.patch_size = 4;
    ec.branches = 1;
    ec.global_dim = 4;
    ec.output_dim = 2;
    AlignmentConfig ac;
    ac.variant = Variant::SEA;
    TrainConfig tc;
    tc.batch_size = 5;
    tc.epochs = 2;
    tc.seed = 11;
    tc.classification = true;
    auto a = train(source, target, ec, ac, tc);
    auto b = train(source, target_unlabeled, ec, ac, tc);
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].total == b.trace[i].total);
}

TEST_CASE("loss decomposition holds at every step") {
    std::mt19937_64 rng(5);
    auto source = labeled_batch(8, 2, 8, 0, rng);
    auto target = labeled_batch(8, 2, 8, 0, rng);
    EncoderConfig ec;
    ec.patch_size = 4;
    ec.branches = 2;
    ec.global_dim = 4;
    ec.output_dim = 1;
    AlignmentConfig ac;
    ac.variant = Variant::SEAPP;
    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 2;
    tc.seed = 13;
    auto r = train(source, target, ec, ac, tc);
    for (const auto& rec : r.trace)
        CHECK(rec.total == doctest::Approx(rec.task + rec.exo + rec.endo).epsilon(1e-12));
}

TEST_CASE("train input validation") {
    EncoderConfig ec;
    AlignmentConfig ac;
    TrainConfig tc;
    CHECK_THROWS_AS(train({}, {}, ec, ac, tc), std::invalid_argument);
    std::mt19937_64 rng(6);
    auto source = labeled_batch(4, 2, 8, 2, rng);
    CHECK_THROWS_AS(train(source, {}, ec, ac, tc), std::invalid_argument);
    tc.batch_size = 1;
    CHECK_THROWS_AS(train(source, source, ec, ac, tc), std::invalid_argument);
}
