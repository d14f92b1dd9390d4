#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lipcert/network.hpp"
#include "lipcert/sampler.hpp"

using lipcert::InputRegion;
using lipcert::LbsOptions;
using lipcert::LbsResult;
using lipcert::Network;

namespace {

LbsOptions opts(long samples, std::uint64_t seed, int threads) {
    LbsOptions o;
    o.samples = samples;
    o.seed = seed;
    o.threads = threads;
    return o;
}

}  // namespace

TEST_CASE("sampling is thread-invariant and deterministic") {
    const Network net = lipcert::random_network({4, 6}, 2, 31);
    const InputRegion region = InputRegion::global_ball(10.0);
    const LbsResult one = lipcert::lbs(net, region, 0, opts(5000, 9, 1));
    const LbsResult four = lipcert::lbs(net, region, 0, opts(5000, 9, 4));
    const LbsResult again = lipcert::lbs(net, region, 0, opts(5000, 9, 1));
    CHECK(one.value == four.value);
    CHECK(one.value == again.value);
    CHECK((one.best_point - four.best_point).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(one.samples == 5000);
}

TEST_CASE("growing the sample budget only appends draws") {
    const Network net = lipcert::random_network({4, 6}, 2, 31);
    const InputRegion region = InputRegion::global_ball(10.0);
    double prev = 0.0;
    for (long n : {512L, 1024L, 2048L, 4096L, 8192L}) {
        const double v = lipcert::lbs(net, region, 0, opts(n, 9, 2)).value;
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("the reported value is the gradient norm at the reported point") {
    const Network net = lipcert::random_network({3, 5}, 2, 12);
    const InputRegion region = InputRegion::global_ball(10.0);
    const LbsResult r = lipcert::lbs(net, region, 0, opts(3000, 4, 2));
    REQUIRE(r.best_point.size() == 3);
    for (int a = 0; a < 3; ++a) {
        CHECK(r.best_point[a] >= region.lower(a));
        CHECK(r.best_point[a] <= region.upper(a));
    }
    CHECK(r.value ==
          doctest::Approx(lipcert::gradient(net, r.best_point, 0).lpNorm<1>()));
}

TEST_CASE("different seeds explore different points") {
    const Network net = lipcert::random_network({3, 5}, 2, 12);
    const InputRegion region = InputRegion::global_ball(10.0);
    const LbsResult a = lipcert::lbs(net, region, 0, opts(100, 1, 1));
    const LbsResult b = lipcert::lbs(net, region, 0, opts(100, 2, 1));
    CHECK((a.best_point - b.best_point).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("local sampling stays in the local box") {
    const Network net = lipcert::random_network({2, 4}, 2, 8);
    Eigen::VectorXd c0(2);
    c0 << 1.0, -0.5;
    const InputRegion region = InputRegion::local_box(c0, 0.25);
    const LbsResult r = lipcert::lbs(net, region, 0, opts(500, 3, 1));
    CHECK(std::abs(r.best_point[0] - 1.0) <= 0.25);
    CHECK(std::abs(r.best_point[1] + 0.5) <= 0.25);
}

TEST_CASE("exact bound equals the closed form when all units stay active") {
    Network net = lipcert::random_network({3, 4}, 2, 44);
    // Shift biases so every preactivation is positive on the whole region.
    for (int j = 0; j < 4; ++j)
        net.biases[0][j] = 10.0 * net.weights[0].row(j).lpNorm<1>() + 1.0;
    const InputRegion region = InputRegion::global_ball(10.0);
    const Eigen::VectorXd w = net.output_weights.row(0).transpose();
    const double expect = (net.weights[0].transpose() * w).lpNorm<1>();
    CHECK(lipcert::exact_lipschitz_1hidden(net, region, 0) ==
          doctest::Approx(expect).epsilon(1e-9));

    // With every unit pinned off, the network is constant.
    for (int j = 0; j < 4; ++j)
        net.biases[0][j] = -10.0 * net.weights[0].row(j).lpNorm<1>() - 1.0;
    CHECK(lipcert::exact_lipschitz_1hidden(net, region, 0) == 0.0);
}

TEST_CASE("exact bound is sandwiched by grid and all-pattern envelopes") {
    const Network net = lipcert::random_network({2, 3}, 2, 77);
    const InputRegion region = InputRegion::global_ball(10.0);
    const Eigen::VectorXd w = net.output_weights.row(0).transpose();
    const double exact = lipcert::exact_lipschitz_1hidden(net, region, 0);

    // Grid scan: every observed activation pattern is realizable.
    double grid_best = 0.0;
    for (int i = 0; i <= 60; ++i)
        for (int j = 0; j <= 60; ++j) {
            Eigen::VectorXd x(2);
            x << -10.0 + i / 3.0, -10.0 + j / 3.0;
            grid_best = std::max(grid_best, lipcert::gradient(net, x, 0).lpNorm<1>());
        }
    CHECK(grid_best <= exact + 1e-9);

    // All-pattern envelope ignores realizability and can only be larger.
    double env = 0.0;
    for (int mask = 0; mask < 8; ++mask) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
        for (int j = 0; j < 3; ++j)
            if ((mask >> j) & 1) v += w[j] * net.weights[0].row(j).transpose();
        env = std::max(env, v.lpNorm<1>());
    }
    CHECK(exact <= env + 1e-9);
}

TEST_CASE("sampling respects the exact bound from below") {
    const Network net = lipcert::random_network({3, 6}, 2, 15);
    const InputRegion region = InputRegion::global_ball(10.0);
    const double exact = lipcert::exact_lipschitz_1hidden(net, region, 0);
    const double sampled = lipcert::lbs(net, region, 0, opts(20000, 5, 2)).value;
    CHECK(sampled <= exact + 1e-9);
    CHECK(sampled > 0.0);
}

TEST_CASE("label and direction overloads agree") {
    const Network net = lipcert::random_network({3, 4}, 2, 6);
    const InputRegion region = InputRegion::global_ball(10.0);
    Eigen::VectorXd e0(1);
    e0 << 1.0;
    CHECK(lipcert::lbs(net, region, 0, opts(200, 1, 1)).value ==
          lipcert::lbs(net, region, e0, opts(200, 1, 1)).value);
    CHECK(lipcert::exact_lipschitz_1hidden(net, region, 0) ==
          lipcert::exact_lipschitz_1hidden(net, region, e0));
}

TEST_CASE("invalid sampler inputs are rejected") {
    const Network net = lipcert::random_network({3, 4}, 2, 6);
    const InputRegion region = InputRegion::global_ball(10.0);
    CHECK_THROWS_AS(lipcert::lbs(net, region, 2, opts(10, 0, 1)), std::invalid_argument);
    CHECK_THROWS_AS(lipcert::lbs(net, region, 0, opts(0, 0, 1)), std::invalid_argument);
    Eigen::VectorXd wrong(3);
    wrong << 1, 2, 3;
    CHECK_THROWS_AS(lipcert::lbs(net, region, wrong, opts(10, 0, 1)),
                    std::invalid_argument);

    const Network deep = lipcert::random_network({3, 4, 4}, 2, 6);
    CHECK_THROWS_AS(lipcert::exact_lipschitz_1hidden(deep, region, 0),
                    std::invalid_argument);
    const Network wide = lipcert::random_network({2, 17}, 2, 6);
    CHECK_THROWS_AS(lipcert::exact_lipschitz_1hidden(wide, region, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(lipcert::exact_lipschitz_1hidden(net, region, 4),
                    std::invalid_argument);
}
