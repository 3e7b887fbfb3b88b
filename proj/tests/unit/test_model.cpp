#include <cmath>
#include <vector>

#include "doctest.h"
#include "fedfault/model.hpp"
#include "fedfault/rng.hpp"

using namespace fedfault;

namespace {

batch random_batch(const model_arch& arch, int n, rng_stream& rng) {
    batch b;
    b.features = matrix(static_cast<size_t>(n), static_cast<size_t>(arch.input_dim));
    for (double& v : b.features.data) v = rng.next_gaussian();
    for (int i = 0; i < n; ++i)
        b.labels.push_back(static_cast<int>(rng.next_index(static_cast<uint64_t>(arch.num_classes))));
    return b;
}

std::vector<double> random_params(const model_arch& arch, rng_stream& rng) {
    std::vector<double> v(param_count(arch));
    for (double& x : v) x = rng.next_gaussian() * 0.5;
    return v;
}

// Central finite differences on the batch loss; the independent check the
// analytic gradient has to match.
std::vector<double> fd_gradient(const param_vector& p, const batch& b,
                                const std::vector<double>& weights, double h) {
    std::vector<double> g(p.values.size());
    param_vector probe = p;
    for (size_t i = 0; i < p.values.size(); ++i) {
        probe.values[i] = p.values[i] + h;
        double up = loss_and_grad(probe, b, weights).loss;
        probe.values[i] = p.values[i] - h;
        double down = loss_and_grad(probe, b, weights).loss;
        probe.values[i] = p.values[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double max_rel_error(const std::vector<double>& got, const std::vector<double>& want) {
    double worst = 0.0;
    for (size_t i = 0; i < got.size(); ++i) {
        double scale = std::max({std::abs(got[i]), std::abs(want[i]), 1e-8});
        worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
    }
    return worst;
}

}  // namespace

TEST_CASE("param_count matches the layer arithmetic") {
    CHECK(param_count({2, 2, 0}) == 6);
    CHECK(param_count({4, 3, 5}) == 43);  // 4*5+5 + 5*3+3
    CHECK(param_count({2, 4, 0}) == 12);
    CHECK(param_count({1, 2, 0}) == 4);
}

TEST_CASE("validate_arch rejects degenerate shapes") {
    CHECK_THROWS(validate_arch({0, 2, 0}));
    CHECK_THROWS(validate_arch({2, 1, 0}));
    CHECK_THROWS(validate_arch({2, 2, -1}));
    CHECK_NOTHROW(validate_arch({1, 2, 0}));
}

TEST_CASE("init_params is deterministic with Xavier bounds and zero biases") {
    model_arch arch{3, 4, 5};
    param_vector a = init_params(arch, 42);
    param_vector b = init_params(arch, 42);
    CHECK(a.values == b.values);
    CHECK(a.values.size() == param_count(arch));

    param_vector c = init_params(arch, 43);
    CHECK(a.values != c.values);

    // layout [W1 | b1 | W2 | b2]: bias blocks zero, weight blocks inside the
    // Xavier bound for their layer
    double bound1 = std::sqrt(6.0 / (3 + 5));
    double bound2 = std::sqrt(6.0 / (5 + 4));
    size_t w1 = 15, b1 = 5, w2 = 20;
    bool any_nonzero = false;
    for (size_t i = 0; i < w1; ++i) {
        CHECK(std::abs(a.values[i]) <= bound1);
        any_nonzero = any_nonzero || a.values[i] != 0.0;
    }
    for (size_t i = w1; i < w1 + b1; ++i) CHECK(a.values[i] == 0.0);
    for (size_t i = w1 + b1; i < w1 + b1 + w2; ++i) CHECK(std::abs(a.values[i]) <= bound2);
    for (size_t i = w1 + b1 + w2; i < a.values.size(); ++i) CHECK(a.values[i] == 0.0);
    CHECK(any_nonzero);
}

TEST_CASE("forward of all-zero params is uniform") {
    param_vector p{{2, 4, 0}, std::vector<double>(12, 0.0)};
    matrix x(3, 2);
    x.at(0, 0) = 1.5;
    x.at(1, 1) = -2.0;
    x.at(2, 0) = 0.3;
    matrix probs = forward(p, x);
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 4; ++j) CHECK(probs.at(i, j) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("forward rows are probability vectors") {
    rng_stream rng(5);
    for (model_arch arch : {model_arch{2, 3, 0}, model_arch{4, 2, 6}}) {
        param_vector p{arch, random_params(arch, rng)};
        batch b = random_batch(arch, 17, rng);
        matrix probs = forward(p, b.features);
        REQUIRE(probs.rows == 17);
        REQUIRE(probs.cols == static_cast<size_t>(arch.num_classes));
        for (size_t i = 0; i < probs.rows; ++i) {
            double sum = 0.0;
            for (size_t j = 0; j < probs.cols; ++j) {
                CHECK(probs.at(i, j) >= 0.0);
                sum += probs.at(i, j);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("forward is stable under huge logits") {
    param_vector p{{1, 2, 0}, {500.0, -500.0, 0.0, 0.0}};
    matrix x(1, 1);
    x.at(0, 0) = 3.0;
    matrix probs = forward(p, x);
    CHECK(probs.at(0, 0) == doctest::Approx(1.0));
    CHECK(probs.at(0, 1) >= 0.0);
}

TEST_CASE("logistic symmetry: zero input gives an even split") {
    param_vector p{{2, 2, 0}, {1.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
    matrix x(1, 2);
    matrix probs = forward(p, x);
    CHECK(probs.at(0, 0) == doctest::Approx(0.5));
    CHECK(probs.at(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("all-zero params give ln C loss") {
    param_vector p{{2, 2, 0}, std::vector<double>(6, 0.0)};
    batch b;
    b.features = matrix(4, 2);
    b.labels = {0, 1, 0, 1};
    CHECK(loss_and_grad(p, b).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("confident correct predictions give vanishing loss and gradient") {
    // one feature, huge weights pointing the right way
    param_vector p{{1, 2, 0}, {40.0, -40.0, 0.0, 0.0}};
    batch b;
    b.features = matrix(2, 1);
    b.features.at(0, 0) = 1.0;
    b.features.at(1, 0) = -1.0;
    b.labels = {0, 1};
    loss_grad lg = loss_and_grad(p, b);
    CHECK(lg.loss < 1e-10);
    for (double g : lg.grad) CHECK(std::abs(g) < 1e-10);
}

TEST_CASE("label out of range is rejected") {
    param_vector p{{2, 2, 0}, std::vector<double>(6, 0.0)};
    batch b;
    b.features = matrix(1, 2);
    b.labels = {2};
    CHECK_THROWS(loss_and_grad(p, b));
}

TEST_CASE("analytic gradient matches finite differences on 100 random instances") {
    rng_stream rng(2718);
    model_arch archs[] = {{2, 2, 0}, {3, 4, 0}, {2, 3, 4}, {5, 2, 3}};
    for (int trial = 0; trial < 100; ++trial) {
        model_arch arch = archs[trial % 4];
        param_vector p{arch, random_params(arch, rng)};
        batch b = random_batch(arch, 1 + static_cast<int>(rng.next_index(12)), rng);

        std::vector<double> weights;
        if (trial % 3 == 0)
            for (int c = 0; c < arch.num_classes; ++c)
                weights.push_back(0.5 + rng.next_uniform() * 2.0);

        loss_grad lg = loss_and_grad(p, b, weights);
        std::vector<double> fd = fd_gradient(p, b, weights, 1e-6);
        CHECK(max_rel_error(lg.grad, fd) <= 1e-5);
    }
}

TEST_CASE("class weights scale single-example gradients linearly") {
    model_arch arch{2, 3, 0};
    rng_stream rng(9);
    param_vector p{arch, random_params(arch, rng)};
    batch b = random_batch(arch, 1, rng);
    b.labels[0] = 1;

    loss_grad base = loss_and_grad(p, b, {1.0, 1.0, 1.0});
    loss_grad doubled = loss_and_grad(p, b, {1.0, 2.0, 1.0});
    CHECK(doubled.loss == doctest::Approx(2.0 * base.loss).epsilon(1e-12));
    for (size_t i = 0; i < base.grad.size(); ++i)
        CHECK(doubled.grad[i] == doctest::Approx(2.0 * base.grad[i]).epsilon(1e-12));
}

TEST_CASE("sgd_step arithmetic and value semantics") {
    param_vector p{{1, 2, 0}, {1.0, 0.5, -0.25, 2.0}};
    std::vector<double> g{2.0, 0.0, 4.0, -10.0};
    param_vector next = sgd_step(p, g, 0.1);
    CHECK(next.values[0] == doctest::Approx(0.8));
    CHECK(next.values[1] == 0.5);
    CHECK(next.values[2] == doctest::Approx(-0.65));
    CHECK(next.values[3] == doctest::Approx(3.0));
    CHECK(p.values[0] == 1.0);  // input untouched

    param_vector twice = sgd_step(next, g, 0.1);
    for (size_t i = 0; i < 4; ++i)
        CHECK(twice.values[i] == doctest::Approx(p.values[i] - 0.2 * g[i]));
}

TEST_CASE("gradient descent strictly decreases loss on a convex instance") {
    model_arch arch{2, 3, 0};
    rng_stream rng(31);
    param_vector p{arch, random_params(arch, rng)};
    batch b = random_batch(arch, 30, rng);

    double prev = loss_and_grad(p, b).loss;
    for (int step = 0; step < 25; ++step) {
        loss_grad lg = loss_and_grad(p, b);
        p = sgd_step(p, lg.grad, 0.1);
        double now = loss_and_grad(p, b).loss;
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("mean_loss agrees with loss_and_grad on the same data") {
    model_arch arch{3, 3, 2};
    rng_stream rng(77);
    param_vector p{arch, random_params(arch, rng)};
    batch b = random_batch(arch, 25, rng);
    CHECK(mean_loss(p, b.features, b.labels) ==
          doctest::Approx(loss_and_grad(p, b).loss).epsilon(1e-12));
}
