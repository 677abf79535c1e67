#include <catch2/catch_amalgamated.hpp>

#include "drcb/fixtures.hpp"
#include "drcb/metrics.hpp"
#include "drcb/rng.hpp"

using namespace drcb;
using Catch::Approx;

TEST_CASE("perfect predictions give a diagonal confusion matrix") {
    std::vector<int> y{0, 1, 2, 1, 0, 2, 2};
    auto cm = confusion(y, y, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            REQUIRE(cm.at(i, j) == (i == j ? cm.row_sum(i) : 0));
    REQUIRE(cm.accuracy() == 1.0);
}

TEST_CASE("confusion counts match a brute-force tally on random labels") {
    Rng r = Rng::stream(1, 0);
    const int n = 30, K = 3;
    std::vector<int> actual(n), pred(n);
    for (int i = 0; i < n; ++i) {
        actual[static_cast<std::size_t>(i)] = r.uniform_int(K);
        pred[static_cast<std::size_t>(i)] = r.uniform_int(K);
    }
    auto cm = confusion(actual, pred, K);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            std::int64_t count = 0;
            for (int k = 0; k < n; ++k)
                if (actual[static_cast<std::size_t>(k)] == i && pred[static_cast<std::size_t>(k)] == j) ++count;
            REQUIRE(cm.at(i, j) == count);
        }
    std::int64_t total = 0;
    for (int i = 0; i < K; ++i) total += cm.row_sum(i);
    REQUIRE(total == n);
}

TEST_CASE("confusion rejects mismatched lengths and out-of-range labels") {
    REQUIRE_THROWS_AS(confusion({0, 1}, {0}, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(confusion({0, 2}, {0, 1}, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(confusion({0, -1}, {0, 1}, 2), std::invalid_argument);
}

TEST_CASE("reference fixture: row 3 column 6 misclassification count is 13") {
    PaperFixtures fx = builtin_fixtures();
    REQUIRE(fx.confusion_real.at(3, 6) == 13);
}

TEST_CASE("reference fixture: class-0 precision and recall") {
    PaperFixtures fx = builtin_fixtures();
    const ConfusionMatrix& cm = fx.confusion_real;
    auto summary = prf1(cm);
    // 77 correct of a 105 column and a 100 row
    REQUIRE(cm.col_sum(0) == 105);
    REQUIRE(cm.row_sum(0) == 100);
    REQUIRE(summary.per_class[0].precision.value == Approx(77.0 / 105.0).epsilon(1e-12));
    REQUIRE(summary.per_class[0].recall.value == Approx(0.77).epsilon(1e-12));
    REQUIRE(summary.accuracy == Approx(753.0 / 980.0).epsilon(1e-12));
}

TEST_CASE("identity confusion matrix scores 1.0 everywhere") {
    ConfusionMatrix cm(4);
    for (int i = 0; i < 4; ++i) cm.at(i, i) = 25;
    auto s = prf1(cm);
    REQUIRE(s.accuracy == 1.0);
    for (const auto& c : s.per_class) {
        REQUIRE(c.precision.defined);
        REQUIRE(c.precision.value == 1.0);
        REQUIRE(c.recall.value == 1.0);
        REQUIRE(c.f1.value == 1.0);
    }
    REQUIRE(s.macro_f1.value == 1.0);
}

TEST_CASE("zero-denominator cells are flagged undefined and left out of macros") {
    // class 1 never occurs and is never predicted: all its metrics undefined
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 10;
    cm.at(2, 2) = 5;
    cm.at(2, 0) = 5;
    auto s = prf1(cm);
    REQUIRE_FALSE(s.per_class[1].precision.defined);
    REQUIRE_FALSE(s.per_class[1].recall.defined);
    REQUIRE_FALSE(s.per_class[1].f1.defined);
    // macro averages over the two defined classes only
    double p0 = 10.0 / 15.0, p2 = 1.0;
    REQUIRE(s.macro_precision.value == Approx((p0 + p2) / 2.0).epsilon(1e-12));
}

TEST_CASE("f1 is undefined when precision and recall are both zero") {
    ConfusionMatrix cm(2);
    cm.at(0, 1) = 10;  // class 0 always wrong
    cm.at(1, 0) = 10;  // class 1 always wrong
    auto s = prf1(cm);
    REQUIRE(s.per_class[0].precision.defined);
    REQUIRE(s.per_class[0].precision.value == 0.0);
    REQUIRE_FALSE(s.per_class[0].f1.defined);  // harmonic mean of 0,0
}

TEST_CASE("micro recall equals trace over total exactly") {
    Rng r = Rng::stream(2, 0);
    const int n = 200, K = 4;
    std::vector<int> actual(n), pred(n);
    for (int i = 0; i < n; ++i) {
        actual[static_cast<std::size_t>(i)] = r.uniform_int(K);
        pred[static_cast<std::size_t>(i)] = r.uniform_int(K);
    }
    auto cm = confusion(actual, pred, K);
    REQUIRE(cm.accuracy() == static_cast<double>(cm.trace()) / static_cast<double>(cm.total()));
    auto s = prf1(cm);
    REQUIRE(s.accuracy == cm.accuracy());
}

TEST_CASE("rca reproduces the published global ratio") {
    REQUIRE(rca(0.208, 0.770) == Approx(0.27).margin(0.005));
    REQUIRE(rca(0.5, 0.5) == 1.0);
    REQUIRE(rca(0.9, 0.45) == Approx(2.0));  // may exceed 1
}

TEST_CASE("rca guards its domain") {
    REQUIRE_THROWS_AS(rca(0.5, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(rca(-0.1, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(rca(0.5, 1.5), std::invalid_argument);
}

TEST_CASE("per-class relative recall divides or flags undefined") {
    MetricCell c = class_relative_recall(0.36, 0.68);
    REQUIRE(c.defined);
    REQUIRE(c.value == Approx(0.53).margin(0.005));

    MetricCell equal = class_relative_recall(0.4, 0.4);
    REQUIRE(equal.value == 1.0);

    MetricCell undef = class_relative_recall(0.2, 0.0);
    REQUIRE_FALSE(undef.defined);
}

TEST_CASE("full fixture per-class relative recalls land within 0.01 of the published column") {
    PaperFixtures fx = builtin_fixtures();
    for (std::size_t c = 0; c < 10; ++c) {
        MetricCell cell = class_relative_recall(fx.gen_recall[c], fx.real_recall[c]);
        REQUIRE(cell.defined);
        REQUIRE(cell.value == Approx(fx.class_rca[c]).margin(0.01));
    }
    REQUIRE(rca(fx.accuracy_generated, fx.accuracy_real) == Approx(fx.global_rca).margin(0.005));
}
