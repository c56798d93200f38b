#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "ccv/bands.hpp"
#include "ccv/core/order_stats.hpp"
#include "ccv/core/special.hpp"
#include "gen.hpp"

namespace ad = ccv::adjust;
namespace bd = ccv::bands;
using ccv::conformal::CalibrationSet;
using ccv::stats::RandomStream;

namespace {

CalibrationSet uniform_cal(std::size_t n, RandomStream rng) {
    return CalibrationSet(ccv::stats::uniform_order_stats(n, rng));
}

ad::AdjustmentSequence pick_sequence(gen::Source& g, std::size_t n) {
    const double delta = g.real(0.02, 0.4);
    switch (g.size(0, 2)) {
    case 0: return ad::simes_sequence(n, delta, g.size(1, n));
    case 1: return ad::dkwm_sequence(n, delta);
    default: return ad::asymptotic_sequence(n, delta);
    }
}

} // namespace

TEST_CASE("fpr_pointwise_law examples") {
    auto law = bd::fpr_pointwise_law(99, 0.1);
    CHECK(law.ell == 10);
    CHECK(law.a == 10.0);
    CHECK(law.b == 90.0);
    CHECK(law.mean() == doctest::Approx(0.1).epsilon(1e-15));

    law = bd::fpr_pointwise_law(9, 0.1);
    CHECK(law.ell == 1);
    CHECK(law.b == 9.0);

    law = bd::fpr_pointwise_law(100, 0.1);
    CHECK(law.ell == 10);
    CHECK(law.b == 91.0);

    CHECK_THROWS_AS(bd::fpr_pointwise_law(5, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(bd::fpr_pointwise_law(100, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(bd::fpr_pointwise_law(100, 1.0), std::invalid_argument);
}

TEST_CASE("band steps follow the order statistics") {
    const CalibrationSet cal({0.3, 0.1, 0.7, 0.5});
    const auto seq = ad::simes_sequence(4, 0.1, 2);
    const auto band = bd::fpr_band(cal, seq);
    REQUIRE(band.steps().size() == 5);
    CHECK(band.value_at(-1e300) == seq.at(1));
    CHECK(band.value_at(0.0999) == seq.at(1));
    CHECK(band.value_at(0.1) == seq.at(2));
    CHECK(band.value_at(0.2) == seq.at(2));
    CHECK(band.value_at(0.5) == seq.at(4));
    CHECK(band.value_at(0.7) == 1.0);
    CHECK(band.value_at(1e300) == 1.0);
    CHECK(band.empirical_at(0.05) == 0.0);
    CHECK(band.empirical_at(0.3) == 0.5);
    CHECK(band.empirical_at(0.9) == 1.0);
    CHECK(band.delta() == 0.1);
    CHECK(band.method() == "simes");
}

TEST_CASE("single calibration score gives a two-step band") {
    const CalibrationSet cal({2.0});
    const auto band = bd::fpr_band(cal, ad::dkwm_sequence(1, 0.1));
    REQUIRE(band.steps().size() == 2);
    CHECK(std::isinf(band.steps()[0].threshold));
    CHECK(band.steps()[1].bound == 1.0);
}

TEST_CASE("tied calibration scores collapse into one step") {
    const CalibrationSet cal({1.0, 2.0, 2.0, 3.0});
    const auto seq = ad::dkwm_sequence(4, 0.2);
    const auto band = bd::fpr_band(cal, seq);
    REQUIRE(band.steps().size() == 4);
    CHECK(band.value_at(2.0) == seq.at(4));
    CHECK(band.empirical_at(2.0) == 0.75);
}

TEST_CASE("fpr_band rejects a size mismatch") {
    const CalibrationSet cal({0.1, 0.2, 0.3});
    CHECK_THROWS_AS(bd::fpr_band(cal, ad::simes_sequence(4, 0.1, 2)), std::invalid_argument);
    CHECK_THROWS_AS(bd::prediction_set(cal, ad::simes_sequence(4, 0.1, 2), 0.1), std::invalid_argument);
}

TEST_CASE("n=1000 simes band starts at b1") {
    const auto cal = uniform_cal(1000, RandomStream(4));
    const auto seq = ad::simes_sequence(1000, 0.1, ad::default_simes_k(1000));
    const auto band = bd::fpr_band(cal, seq);
    CHECK(band.value_at(cal.order_stat(1) / 2.0) == doctest::Approx(0.0045945826484730373).epsilon(1e-12));
}

TEST_CASE("property: band nondecreasing, in [0,1], dominates F_n for dkwm and asymptotic") {
    gen::for_all(200, 71, [](gen::Source& g, std::size_t) {
        const std::size_t n = g.size(1, 300);
        const auto scores = g.coin(0.3) ? g.tied_reals(n, static_cast<int>(g.size(1, 6))) : g.reals(n, -5.0, 5.0);
        const CalibrationSet cal(scores);
        const auto seq = n >= 3 ? pick_sequence(g, n) : ad::dkwm_sequence(n, 0.1);
        const auto band = bd::fpr_band(cal, seq);
        double prev = -1.0;
        for (const auto& s : band.steps()) {
            REQUIRE(s.bound >= prev);
            REQUIRE(s.bound >= 0.0);
            REQUIRE(s.bound <= 1.0);
            prev = s.bound;
            if (seq.method != ad::Method::simes) REQUIRE(s.bound >= s.empirical_fpr);
        }
        REQUIRE(band.steps().back().bound == 1.0);
        // Queries agree with the count-based definition.
        for (int q = 0; q < 10; ++q) {
            const double t = g.real(-6.0, 6.0);
            REQUIRE(band.value_at(t) == seq.at(cal.count_le(t) + 1));
        }
    });
}

TEST_CASE("band covers the true FPR curve with probability 1 - delta") {
    const std::size_t n = 200;
    const std::size_t draws = 500;
    const auto seq = ad::simes_sequence(n, 0.1, ad::default_simes_k(n));
    const RandomStream root(2024);
    std::size_t covered = 0;
    for (std::size_t r = 0; r < draws; ++r) {
        // Uniform scores, so F(t) = t; the supremum over a step is the next order statistic.
        const auto cal = uniform_cal(n, root.split(r));
        const auto band = bd::fpr_band(cal, seq);
        bool ok = true;
        for (std::size_t i = 1; i <= n && ok; ++i) {
            const double t = std::nextafter(cal.order_stat(i), -1.0);
            ok = t <= band.value_at(t);
        }
        covered += ok ? 1 : 0;
    }
    const double freq = static_cast<double>(covered) / draws;
    const double se = std::sqrt(0.9 * 0.1 / draws);
    CHECK(freq >= 0.9 - 3.0 * se);
}

TEST_CASE("prediction set threshold examples") {
    const CalibrationSet cal({0.3, 0.1, 0.7, 0.5, 0.9});
    const auto seq = ad::dkwm_sequence(5, 0.1);
    // alpha below b1: nothing is ever excluded
    const auto all = bd::prediction_set(cal, seq, seq.at(1) / 2.0);
    CHECK(all.everything());
    CHECK(std::isinf(all.threshold));
    CHECK(all.threshold < 0.0);
    CHECK(all.contains(-1e300));

    // alpha at b_i exactly includes index i
    for (std::size_t i = 1; i <= 5; ++i) {
        if (seq.at(i) >= 1.0) break;
        const auto set = bd::prediction_set(cal, seq, seq.at(i));
        CHECK(set.istar >= i);
        CHECK(bd::prediction_set_threshold(cal, seq, seq.at(i)) == cal.order_stat(set.istar));
    }
}

TEST_CASE("property: prediction set matches the conditional p-value rule and nests in alpha") {
    gen::for_all(200, 72, [](gen::Source& g, std::size_t) {
        const std::size_t n = g.size(3, 200);
        const CalibrationSet cal(g.reals(n, 0.0, 1.0));
        const auto seq = pick_sequence(g, n);
        const double a1 = g.real(0.001, 0.6);
        const double a2 = g.real(a1, 0.9);
        const auto c1 = bd::prediction_set(cal, seq, a1);
        const auto c2 = bd::prediction_set(cal, seq, a2);
        REQUIRE(c2.threshold >= c1.threshold);
        for (int q = 0; q < 20; ++q) {
            const double s = g.coin(0.3) ? cal.order_stat(g.size(1, n)) : g.real(-0.1, 1.1);
            const double u = ad::apply(seq, ccv::conformal::marginal_pvalue(cal, s));
            REQUIRE(c1.contains(s) == (u > a1));
            if (c2.contains(s)) REQUIRE(c1.contains(s));
        }
    });
}

TEST_CASE("prediction sets cover inliers jointly over alpha with probability 1 - delta") {
    const std::size_t n = 500;
    const std::size_t draws = 500;
    const auto seq = ad::simes_sequence(n, 0.1, ad::default_simes_k(n));
    const RandomStream root(77);
    std::size_t good = 0;
    for (std::size_t r = 0; r < draws; ++r) {
        const auto cal = uniform_cal(n, root.split(r));
        bool ok = true;
        for (double alpha : {0.05, 0.1, 0.2}) {
            // Inlier coverage given the calibration set is 1 - threshold for uniform scores.
            const double thr = bd::prediction_set_threshold(cal, seq, alpha);
            const double coverage = std::isinf(thr) ? 1.0 : 1.0 - thr;
            ok = ok && coverage >= 1.0 - alpha;
        }
        good += ok ? 1 : 0;
    }
    const double freq = static_cast<double>(good) / draws;
    CHECK(freq >= 0.9 - 3.0 * std::sqrt(0.09 / draws));
}
