#include "fadelab/adamw.hpp"
#include "fadelab/tape.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

using namespace fadelab;
using fadelab::testing::finite_difference_grads;
using fadelab::testing::grad_relative_error;

TEST_CASE("matmul basics") {
    Tensor2 m(2, 2, {1, 2, 3, 4});

    SUBCASE("identity") {
        Tensor2 r = matmul(Tensor2::identity(2), m);
        CHECK(max_abs_diff(r, m) == 0.0);
    }
    SUBCASE("hand product") {
        Tensor2 v(2, 1, {0, 1});
        Tensor2 r = matmul(m, v);
        CHECK(r(0, 0) == 2.0);
        CHECK(r(1, 0) == 4.0);
    }
    SUBCASE("zero annihilates") {
        Tensor2 r = matmul(Tensor2(2, 2), m);
        CHECK(sumsq(r) == 0.0);
    }
    SUBCASE("dimension mismatch names both shapes") {
        try {
            matmul(m, Tensor2(3, 2));
            FAIL("expected shape error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::shape);
            CHECK(std::string(e.what()).find("2x2") != std::string::npos);
            CHECK(std::string(e.what()).find("3x2") != std::string::npos);
        }
    }
}

TEST_CASE("matmul is associative with identity on well-conditioned triples") {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        Tensor2 a = Tensor2::randn(4, 4, rng);
        Tensor2 b = Tensor2::randn(4, 4, rng);
        Tensor2 c = Tensor2::randn(4, 4, rng);
        CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-10);
        CHECK(max_abs_diff(matmul(a, Tensor2::identity(4)), a) == 0.0);
        CHECK(max_abs_diff(matmul(Tensor2::identity(4), a), a) == 0.0);
    }
}

TEST_CASE("backward on linear loss gives all-ones gradient") {
    ParamStore params;
    Rng rng(3);
    params.add("w", Tensor2::randn(2, 2, rng));
    GradTape tape;
    auto loss = tape.sum(tape.param(params.at("w")));
    GradMap grads = tape.backward(loss);
    const Tensor2& g = grads.at("w");
    for (double v : g.raw()) CHECK(v == 1.0);
}

TEST_CASE("backward matches central finite differences on ||Wx||^2") {
    ParamStore params;
    Rng rng(11);
    params.add("w", Tensor2::randn(3, 3, rng));
    Tensor2 x = Tensor2::randn(3, 1, rng);

    GradTape tape;
    auto loss = tape.sumsq(tape.matmul(tape.param(params.at("w")), tape.constant(x)));
    GradMap analytic = tape.backward(loss);

    GradMap fd = finite_difference_grads(params, [&] {
        GradTape t;
        return t.scalar(t.sumsq(t.matmul(t.param(params.at("w")), t.constant(x))));
    });
    CHECK(grad_relative_error(analytic, fd) < 1e-4);
}

TEST_CASE("parameter not reachable from the loss gets a zero gradient") {
    ParamStore params;
    Rng rng(5);
    params.add("used", Tensor2::randn(2, 2, rng));
    params.add("unused", Tensor2::randn(2, 2, rng));
    GradTape tape;
    auto loss = tape.sumsq(tape.param(params.at("used")));
    tape.param(params.at("unused"));
    GradMap grads = tape.backward(loss);
    CHECK(sumsq(grads.at("unused")) == 0.0);
    CHECK(sumsq(grads.at("used")) > 0.0);
}

TEST_CASE("backward contract errors") {
    GradTape empty;
    CHECK_THROWS_AS(empty.backward(GradTape::Value{0}), Error);

    GradTape tape;
    auto non_scalar = tape.constant(Tensor2(2, 2, {1, 2, 3, 4}));
    CHECK_THROWS_AS(tape.backward(non_scalar), Error);
}

TEST_CASE("gradient accumulation is additive across terms") {
    ParamStore params;
    Rng rng(17);
    params.add("w", Tensor2::randn(3, 2, rng));
    Tensor2 x = Tensor2::randn(2, 2, rng);

    GradTape joint;
    auto w = joint.param(params.at("w"));
    auto f = joint.sumsq(joint.matmul(w, joint.constant(x)));
    auto g = joint.sum(joint.tanh(w));
    GradMap sum_grads = joint.backward(joint.add(f, g));

    GradTape tf;
    GradMap gf = tf.backward(tf.sumsq(tf.matmul(tf.param(params.at("w")), tf.constant(x))));
    GradTape tg;
    GradMap gg = tg.backward(tg.sum(tg.tanh(tg.param(params.at("w")))));

    for (std::size_t i = 0; i < sum_grads.at("w").size(); ++i) {
        CHECK(sum_grads.at("w").raw()[i] == gf.at("w").raw()[i] + gg.at("w").raw()[i]);
    }
}

TEST_CASE("every differentiable tape op matches finite differences") {
    Rng rng(23);
    // One composite graph per op, reduced to a scalar.
    ParamStore params;
    params.add("a", Tensor2::randn(3, 4, rng, 0.5));
    params.add("b", Tensor2::randn(3, 4, rng, 0.5));
    params.add("m", Tensor2::randn(4, 3, rng, 0.5));
    params.add("bias", Tensor2::randn(1, 4, rng, 0.5));
    params.add("table", Tensor2::randn(5, 4, rng, 0.5));

    const std::vector<std::size_t> labels{1, 0, 2};

    auto build = [&](GradTape& t) {
        auto a = t.param(params.at("a"));
        auto b = t.param(params.at("b"));
        auto m = t.param(params.at("m"));
        auto bias = t.param(params.at("bias"));
        auto table = t.param(params.at("table"));

        auto h = t.tanh(t.add_bias_rows(t.hadamard(t.add(a, b), t.sub(a, b)), bias));
        auto prod = t.matmul(h, m); // 3x3
        auto cat = t.concat_cols(h, t.scale(t.embed_rows(table, {0, 4, 2}), 0.7));
        auto relu_part = t.sum(t.relu(t.add_scalar(cat, -0.2)));
        auto xent = t.softmax_cross_entropy(prod, labels);
        return t.add(t.add(t.scale(t.sumsq(prod), 0.1), relu_part), xent);
    };

    GradTape tape;
    GradMap analytic = tape.backward(build(tape));
    GradMap fd = finite_difference_grads(params, [&] {
        GradTape t;
        return t.scalar(build(t));
    });
    CHECK(grad_relative_error(analytic, fd) < 1e-4);
}

TEST_CASE("randomized gradient property over composite graphs") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        Rng rng(seed);
        ParamStore params;
        params.add("w1", Tensor2::randn(4, 6, rng, 0.6));
        params.add("w2", Tensor2::randn(6, 2, rng, 0.6));
        params.add("b", Tensor2::randn(1, 6, rng, 0.3));
        Tensor2 x = Tensor2::randn(5, 4, rng, 0.8);

        auto build = [&](GradTape& t) {
            auto h = t.tanh(t.add_bias_rows(t.matmul(t.constant(x), t.param(params.at("w1"))),
                                            t.param(params.at("b"))));
            return t.scale(t.sumsq(t.matmul(h, t.param(params.at("w2")))), 0.5);
        };
        GradTape tape;
        GradMap analytic = tape.backward(build(tape));
        GradMap fd = finite_difference_grads(params, [&] {
            GradTape t;
            return t.scalar(build(t));
        });
        CAPTURE(seed);
        CHECK(grad_relative_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("adamw single-step hand values") {
    SUBCASE("zero gradient and zero decay leave parameters unchanged") {
        ParamStore params;
        params.add("p", Tensor2(1, 1, {0.7}));
        AdamW opt(AdamW::Config{0.1, 0.9, 0.999, 1e-8, 0.0});
        GradMap grads;
        grads.emplace("p", Tensor2(1, 1, {0.0}));
        opt.step(params, grads);
        CHECK(params.at("p").value(0, 0) == 0.7);
    }
    SUBCASE("unit gradient moves the parameter by about lr at step 1") {
        ParamStore params;
        params.add("p", Tensor2(1, 1, {1.0}));
        AdamW opt(AdamW::Config{0.1, 0.9, 0.999, 1e-8, 0.0});
        GradMap grads;
        grads.emplace("p", Tensor2(1, 1, {1.0}));
        opt.step(params, grads);
        // bias-corrected mhat = vhat = 1, so the update is lr/(1 + eps)
        CHECK(params.at("p").value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
    }
    SUBCASE("decoupled decay shrinks multiplicatively under zero gradient") {
        ParamStore params;
        params.add("p", Tensor2(1, 1, {2.0}));
        AdamW opt(AdamW::Config{0.1, 0.9, 0.999, 1e-8, 0.1});
        GradMap grads;
        grads.emplace("p", Tensor2(1, 1, {0.0}));
        opt.step(params, grads);
        CHECK(params.at("p").value(0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.1)).epsilon(1e-12));
    }
    SUBCASE("key mismatch is a contract error") {
        ParamStore params;
        params.add("p", Tensor2(1, 1, {1.0}));
        AdamW opt;
        GradMap grads;
        grads.emplace("q", Tensor2(1, 1, {1.0}));
        CHECK_THROWS_AS(opt.step(params, grads), Error);
    }
}

TEST_CASE("adamw state counts steps") {
    ParamStore params;
    params.add("p", Tensor2(1, 1, {1.0}));
    AdamW opt(AdamW::Config{0.01, 0.9, 0.999, 1e-8, 0.0});
    GradMap grads;
    grads.emplace("p", Tensor2(1, 1, {0.5}));
    opt.step(params, grads);
    opt.step(params, grads);
    CHECK(opt.step_count() == 2);
}
