#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "codelnet/metrics.hpp"
#include "codelnet/errors.hpp"
#include "codelnet/rng.hpp"

using namespace codelnet;

TEST_CASE("confusion cross-tabulation") {
    ConfusionMatrix cm = confusion({1, 1, 0, 0}, {1, 0, 0, 1});
    CHECK(cm.tp == 1);
    CHECK(cm.fp == 1);
    CHECK(cm.tn == 1);
    CHECK(cm.fn == 1);

    ConfusionMatrix perfect = confusion({1, 0, 1}, {1, 0, 1});
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);

    ConfusionMatrix empty = confusion({}, {});
    CHECK(empty.total() == 0);
}

TEST_CASE("confusion input guards") {
    CHECK_THROWS_AS(confusion({1}, {1, 0}), Error);
    CHECK_THROWS_AS(confusion({2}, {1}), Error);
}

TEST_CASE("reported metrics match the 45/45 test-split arithmetic") {
    ConfusionMatrix cm;
    cm.tp = 42;
    cm.fn = 3;
    cm.tn = 37;
    cm.fp = 8;
    Metrics m = evaluate_metrics(cm);
    CHECK(m.sensitivity == doctest::Approx(0.9333).epsilon(1e-3));
    CHECK(m.specificity == doctest::Approx(0.8222).epsilon(1e-3));
    CHECK(m.accuracy == doctest::Approx(0.8778).epsilon(1e-3));
}

TEST_CASE("all-ones matrix scores 0.5 everywhere") {
    ConfusionMatrix cm{1, 1, 1, 1};
    Metrics m = evaluate_metrics(cm);
    CHECK(m.sensitivity == doctest::Approx(0.5));
    CHECK(m.specificity == doctest::Approx(0.5));
    CHECK(m.accuracy == doctest::Approx(0.5));
}

TEST_CASE("undefined metrics raise instead of returning sentinels") {
    ConfusionMatrix no_positives;
    no_positives.tn = 5;
    no_positives.fp = 1;
    CHECK_THROWS_WITH_AS(sensitivity(no_positives), doctest::Contains("undefined"), Error);
    CHECK(specificity(no_positives) == doctest::Approx(5.0 / 6.0));

    ConfusionMatrix empty;
    CHECK_THROWS_AS(accuracy(empty), Error);
}

TEST_CASE("metric identities and ranges over random matrices") {
    Rng rng(2718);
    for (int c = 0; c < 200; ++c) {
        ConfusionMatrix cm;
        cm.tp = static_cast<std::int64_t>(rng.range_int(1, 50));
        cm.fp = static_cast<std::int64_t>(rng.range_int(1, 50));
        cm.tn = static_cast<std::int64_t>(rng.range_int(1, 50));
        cm.fn = static_cast<std::int64_t>(rng.range_int(1, 50));
        Metrics m = evaluate_metrics(cm);

        CHECK(m.accuracy ==
              doctest::Approx(static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total())));
        CHECK(m.sensitivity >= 0.0);
        CHECK(m.sensitivity <= 1.0);
        CHECK(m.specificity >= 0.0);
        CHECK(m.specificity <= 1.0);
        CHECK(m.accuracy >= 0.0);
        CHECK(m.accuracy <= 1.0);

        // swapping the positive class swaps sensitivity and specificity
        ConfusionMatrix swapped;
        swapped.tp = cm.tn;
        swapped.tn = cm.tp;
        swapped.fp = cm.fn;
        swapped.fn = cm.fp;
        Metrics ms = evaluate_metrics(swapped);
        CHECK(ms.sensitivity == doctest::Approx(m.specificity));
        CHECK(ms.specificity == doctest::Approx(m.sensitivity));
        CHECK(ms.accuracy == doctest::Approx(m.accuracy));
    }
}
