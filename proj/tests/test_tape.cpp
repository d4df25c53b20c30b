// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tridf/rng.hpp"
#include "tridf/tape.hpp"

using namespace tridf;

namespace {

TensorF random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo,
                      double hi) {
    TensorF t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("forward analytic values") {
    Tape tape;
    const Value sp = tape.softplus(tape.constant_scalar(0.0));
    CHECK(tape.value(sp).data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    TensorF eye({3, 3}, 0.0);
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    TensorF v({3, 1}, std::vector<double>{1.5, -2.0, 0.25});
    const Value mv = tape.matmul(tape.constant(eye), tape.constant(v));
    for (int i = 0; i < 3; ++i)
        CHECK(tape.value(mv).data[i] == v.data[i]);

    const Value es = tape.exp_(
        tape.sum(tape.constant(TensorF({2}, std::vector<double>{1.0, 1.0}))));
    CHECK(tape.value(es).data[0] ==
          doctest::Approx(std::exp(2.0)).epsilon(1e-12));
}

TEST_CASE("shape mismatch and non-finite errors") {
    Tape tape;
    const Value a = tape.constant(TensorF({2, 3}, 1.0));
    const Value b = tape.constant(TensorF({3, 2}, 1.0));
    CHECK_THROWS(tape.add(a, b));
    const Value big = tape.constant(TensorF({1}, 1e308));
    CHECK_THROWS(tape.mul(big, big));  // overflows to inf
    CHECK_THROWS(tape.log_(tape.constant_scalar(-1.0)));  // nan
}

TEST_CASE("backward analytic: x^2, saturated clamp") {
    Tape tape;
    const Value x = tape.param(TensorF({1}, 3.0));
    tape.backward(tape.square(x));
    CHECK(tape.grad(x).data[0] == doctest::Approx(6.0).epsilon(1e-12));

    Tape t2;
    const Value y = t2.param(TensorF({1}, 2.0));
    t2.backward(t2.sum(t2.clamp(y, 0.0, 1.0)));
    CHECK(t2.grad(y).data[0] == 0.0);
}

TEST_CASE("repeated backward without reset errors; non-scalar loss errors") {
    Tape tape;
    const Value x = tape.param(TensorF({1}, 2.0));
    const Value l = tape.square(x);
    tape.backward(l);
    CHECK_THROWS(tape.backward(l));
    Tape t2;
    const Value m = t2.param(TensorF({2}, 1.0));
    CHECK_THROWS(t2.backward(m));
}

TEST_CASE("unused parameter gradient is exactly zero") {
    Tape tape;
    const Value used = tape.param(TensorF({2}, 1.0));
    const Value unused = tape.param(TensorF({3}, 1.0));
    tape.backward(tape.sum(tape.square(used)));
    for (double g : tape.grad(unused).data) CHECK(g == 0.0);
}

TEST_CASE("mse linear-layer gradients match finite differences") {
    Rng rng(7);
    const TensorF w = random_tensor({3, 2}, rng, -0.5, 0.5);
    const TensorF x = random_tensor({4, 3}, rng, -1.0, 1.0);
    const TensorF y = random_tensor({4, 2}, rng, -1.0, 1.0);
    const double err = grad_check(
        [&](Tape& t, const std::vector<Value>& p) {
            const Value pred = t.matmul(t.constant(x), p[0]);
            return t.mean(t.square(t.sub(pred, t.constant(y))));
        },
        {w}, 1e-5);
    CHECK(err <= 1e-6);
}

TEST_CASE("grad_check basics") {
    Rng rng(11);
    const TensorF x = random_tensor({5}, rng, -2.0, 2.0);
    const double e1 = grad_check(
        [](Tape& t, const std::vector<Value>& p) {
            return t.affine(t.sum(t.square(p[0])), 0.5, 0.0);
        },
        {x}, 1e-5);
    CHECK(e1 <= 1e-7);

    const double e2 = grad_check(
        [](Tape& t, const std::vector<Value>& p) {
            (void)p;
            return t.constant_scalar(4.2);
        },
        {x}, 1e-5);
    CHECK(e2 == 0.0);
}

TEST_CASE("every primitive matches finite differences <= 1e-6") {
    Rng rng(23);
    // Points bounded away from kinks: relu/abs inputs away from 0, clamp
    // inputs away from the bounds.
    const TensorF a = random_tensor({3, 4}, rng, 0.2, 1.4);
    const TensorF b = random_tensor({3, 4}, rng, 0.2, 1.4);
    const TensorF m = random_tensor({4, 2}, rng, -0.9, 0.9);
    const TensorF bias = random_tensor({4}, rng, -0.5, 0.5);
    const TensorF col = random_tensor({3, 1}, rng, 0.3, 1.0);

    using Build = std::function<Value(Tape&, const std::vector<Value>&)>;
    const std::vector<std::pair<const char*, Build>> cases = {
        {"add", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.add(p[0], p[1]));
         }},
        {"add_bias_row", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.add(p[0], p[3]));
         }},
        {"sub", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.square(t.sub(p[0], p[1])));
         }},
        {"mul", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.mul(p[0], p[1]));
         }},
        {"mul_col", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.mul(p[4], p[0]));
         }},
        {"div", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.div(p[0], p[1]));
         }},
        {"matmul", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.matmul(p[0], p[2]));
         }},
        {"affine", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.affine(p[0], 1.7, -0.3));
         }},
        {"mean", [](Tape& t, const std::vector<Value>& p) {
             return t.mean(p[0]);
         }},
        {"exp", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.exp_(p[0]));
         }},
        {"log", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.log_(p[0]));
         }},
        {"sin", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.sin_(p[0]));
         }},
        {"cos", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.cos_(p[0]));
         }},
        {"relu", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.relu(p[0]));
         }},
        {"softplus", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.softplus(p[0]));
         }},
        {"sigmoid", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.sigmoid(p[0]));
         }},
        {"abs", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.abs_(p[0]));
         }},
        {"square", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.square(p[0]));
         }},
        {"clamp", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.clamp(p[0], 0.0, 1.0));
         }},
        {"concat_slice", [](Tape& t, const std::vector<Value>& p) {
             return t.sum(t.slice_cols(t.concat_cols(p[0], p[1]), 2, 6));
         }},
        {"gather_scatter", [](Tape& t, const std::vector<Value>& p) {
             const Value g = t.gather_rows(p[0], {2, 0, 0});
             return t.sum(t.square(t.scatter_rows(g, {0, 3, 4}, 5)));
         }},
    };
    for (const auto& [name, build] : cases) {
        CAPTURE(name);
        CHECK(grad_check(build, {a, b, m, bias, col}, 1e-6) <= 1e-6);
    }
}

TEST_CASE("composite gradients match finite differences") {
    Rng rng(31);
    const std::size_t n_rays = 3, n_samples = 5, total = n_rays * n_samples;
    const TensorF sigma = random_tensor({total, 1}, rng, 0.1, 2.0);
    const TensorF rgb = random_tensor({total, 3}, rng, 0.1, 0.9);
    TensorF deltas({total}), ts({total});
    for (std::size_t r = 0; r < n_rays; ++r) {
        double t = 0.1;
        for (std::size_t i = 0; i < n_samples; ++i) {
            ts.data[r * n_samples + i] = t;
            const double d = 0.05 + 0.1 * rng.uniform();
            deltas.data[r * n_samples + i] = d;
            t += d;
        }
    }
    const std::array<double, 3> bg{0.7, 0.6, 0.5};
    const TensorF probe = random_tensor({n_rays, 5}, rng, -1.0, 1.0);
    const double err = grad_check(
        [&](Tape& t, const std::vector<Value>& p) {
            const Value out = t.composite(p[0], p[1], deltas, ts, bg, n_rays,
                                          n_samples);
            return t.sum(t.mul(out, t.constant(probe)));
        },
        {sigma, rgb}, 1e-6);
    CHECK(err <= 1e-6);
}

TEST_CASE("backward linearity: grad of sum of losses = sum of grads") {
    Rng rng(41);
    const TensorF x = random_tensor({4}, rng, 0.2, 1.0);
    auto grads_of = [&](int which) {
        Tape t;
        const Value p = t.param(x);
        const Value l1 = t.sum(t.square(p));
        const Value l2 = t.mean(t.exp_(p));
        const Value loss =
            which == 0 ? l1 : (which == 1 ? l2 : t.add(l1, l2));
        t.backward(loss);
        return t.grad(p).data;
    };
    const auto g1 = grads_of(0), g2 = grads_of(1), gs = grads_of(2);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(gs[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-14));
}

TEST_CASE("identical replay is bit-identical") {
    Rng rng(55);
    const TensorF x = random_tensor({3, 3}, rng, -1.0, 1.0);
    auto run = [&]() {
        Tape t;
        const Value p = t.param(x);
        const Value loss =
            t.mean(t.square(t.sigmoid(t.matmul(p, p))));
        t.backward(loss);
        return std::make_pair(t.value(loss).data[0], t.grad(p).data);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}
