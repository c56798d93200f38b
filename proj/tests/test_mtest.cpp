#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ccv/core/random.hpp"
#include "ccv/core/special.hpp"
#include "ccv/mtest.hpp"
#include "gen.hpp"

namespace mt = ccv::mtest;
using V = std::vector<double>;
using I = std::vector<std::size_t>;

TEST_CASE("bh examples") {
    const V p{0.01, 0.04, 0.03, 0.9};
    const auto r = mt::bh(p, 0.1);
    CHECK(r.rejected == I{0, 1, 2});
    CHECK(r.critical_value == 0.04);
    CHECK(mt::bh(V{1, 1, 1}, 0.1).rejected.empty());
    CHECK(mt::bh(V{0.1}, 0.1).rejected == I{0});
    CHECK(mt::bh(V{0.1000001}, 0.1).rejected.empty());
    CHECK_THROWS_AS(mt::bh(V{}, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(mt::bh(V{0.5}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(mt::bh(V{1.5}, 0.1), std::invalid_argument);
}

TEST_CASE("bh ties at the boundary reject all tied values") {
    const auto r = mt::bh(V{0.05, 0.05, 0.05, 0.9}, 0.1);
    CHECK(r.rejected == I{0, 1, 2});
}

TEST_CASE("property: bh rejects a lower set and is monotone in alpha") {
    gen::for_all(300, 51, [](gen::Source& g, std::size_t) {
        const auto p = g.pvalues(g.size(1, 60));
        const double a1 = g.real(0.001, 0.5), a2 = std::min(0.99, a1 + g.real(0, 0.3));
        const auto r1 = mt::bh(p, a1), r2 = mt::bh(p, a2);
        CHECK(std::includes(r2.rejected.begin(), r2.rejected.end(), r1.rejected.begin(), r1.rejected.end()));
        double max_rej = 0;
        for (auto i : r1.rejected) max_rej = std::max(max_rej, p[i]);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const bool rej = std::binary_search(r1.rejected.begin(), r1.rejected.end(), i);
            if (!r1.rejected.empty()) CHECK(rej == (p[i] <= max_rej));
        }
        // Storey with pi0 >= 1 rejects a subset of plain BH.
        const double lam = g.real(0.2, 0.8);
        const auto s = mt::storey_bh(p, a1, lam);
        if (*s.pi0 >= 1.0) {
            CHECK(std::includes(r1.rejected.begin(), r1.rejected.end(), s.rejected.begin(), s.rejected.end()));
        }
        for (auto i : s.rejected) CHECK(p[i] < lam);
    });
}

TEST_CASE("storey examples") {
    CHECK(mt::storey_pi0(V{0.1, 0.6, 0.7, 0.9}, 0.5) == doctest::Approx(2.0));
    CHECK(mt::storey_pi0(V{0.1, 0.2}, 0.5) == doctest::Approx(1.0));
    const V p{0.001, 0.002, 0.9, 0.9, 0.9};
    const auto r = mt::storey_bh(p, 0.1, 0.5);
    CHECK(*r.pi0 == doctest::Approx(1.6));
    CHECK(r.rejected == I{0, 1});
    CHECK(mt::storey_bh(V{0.6, 0.7, 0.8}, 0.1, 0.5).rejected.empty());
    CHECK_THROWS_AS(mt::storey_pi0(p, 1.0), std::invalid_argument);
}

TEST_CASE("storey lambda grid") {
    CHECK(mt::storey_default_lambda(999) == 0.5);
    CHECK(mt::storey_default_lambda(100) == doctest::Approx(51.0 / 101));
    CHECK(mt::lambda_on_grid(mt::storey_default_lambda(100), 100));
    CHECK_FALSE(mt::lambda_on_grid(0.5, 100));
    const V p{0.01, 0.5, 0.9};
    CHECK(mt::storey_bh(p, 0.1, 0.5, 100).warning);
    CHECK_FALSE(mt::storey_bh(p, 0.1, 0.5, 99).warning);
    CHECK_FALSE(mt::storey_bh(p, 0.1, 0.5).warning);
}

TEST_CASE("storey pi0 is near 1 for uniform p-values") {
    ccv::stats::RandomStream rng(1);
    const std::size_t m = 20000;
    V p(m);
    for (auto& v : p) v = rng.uniform();
    const double pi0 = mt::storey_pi0(p, 0.5);
    // Var of the count of p > 1/2 is m/4; scaled by 1/(m/2).
    CHECK(std::abs(pi0 - 1.0) < 4.0 * std::sqrt(m / 4.0) / (m / 2.0));
}

TEST_CASE("fisher examples") {
    for (double p : {0.01, 0.049, 0.05, 0.051, 0.3}) {
        CHECK(mt::fisher_test(V{p}, 0.05).reject == (p <= 0.05 + 1e-12));
        CHECK(*mt::fisher_test(V{p}, 0.05).combined_p == doctest::Approx(p).epsilon(1e-12));
    }
    const auto ones = mt::fisher_test(V{1, 1, 1}, 0.05);
    CHECK(ones.statistic == 0.0);
    CHECK_FALSE(ones.reject);
    CHECK_THROWS_AS(mt::fisher_test(V{0.0, 0.5}, 0.05), std::invalid_argument);
}

TEST_CASE("fisher corrected reduces to fisher at gamma = 0") {
    gen::for_all(100, 52, [](gen::Source& g, std::size_t) {
        const auto p = g.pvalues(g.size(1, 30));
        const auto a = mt::fisher_test(p, 0.05), b = mt::fisher_corrected_test(p, 0.05, 0.0);
        CHECK(a.reject == b.reject);
        CHECK(a.statistic == doctest::Approx(b.statistic));
        // The correction shrinks the excess over 2m by sqrt(1 + gamma).
        const double gamma = g.real(0.1, 5);
        const auto c = mt::fisher_corrected_test(p, 0.05, gamma);
        const double m = static_cast<double>(p.size());
        CHECK(c.statistic - 2 * m == doctest::Approx((a.statistic - 2 * m) / std::sqrt(1 + gamma)));
    });
}

TEST_CASE("fisher rejection rate under uniform nulls") {
    ccv::stats::RandomStream rng(2);
    const int reps = 10000;
    int rej = 0;
    V p(10);
    for (int r = 0; r < reps; ++r) {
        for (auto& v : p) v = rng.uniform();
        rej += mt::fisher_test(p, 0.05).reject;
    }
    CHECK(std::abs(rej / double(reps) - 0.05) < 3 * std::sqrt(0.05 * 0.95 / reps));
}

TEST_CASE("stouffer, simes, harmonic examples") {
    CHECK(mt::stouffer_pvalue(V{0.3}) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(mt::stouffer_pvalue(V{0.5, 0.5, 0.5}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mt::stouffer_pvalue(V{0.05, 0.05}) == doctest::Approx(ccv::stats::normal_sf(2 * 1.6448536269514722 / std::sqrt(2.0))).epsilon(1e-10));
    CHECK(mt::stouffer_pvalue(V{0.05, 0.05}) == doctest::Approx(0.0100).epsilon(0.01));
    CHECK_THROWS_AS(mt::stouffer_pvalue(V{0.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(mt::stouffer_pvalue(V{1.0, 0.5}), std::invalid_argument);

    CHECK(mt::simes_global_pvalue(V{0.3}) == 0.3);
    CHECK(mt::simes_global_pvalue(V{0.01, 0.5}) == doctest::Approx(0.02));
    CHECK(mt::simes_global_pvalue(V{0.2, 0.2, 0.2}) == doctest::Approx(0.2));

    CHECK(mt::harmonic_mean_pvalue(V{0.3}) == doctest::Approx(0.3));
    CHECK(mt::harmonic_mean_pvalue(V{0.01, 1}) == doctest::Approx(2.0 / 101));
    CHECK(mt::harmonic_mean_pvalue(V{0.07, 0.07}) == doctest::Approx(0.07));
    CHECK_THROWS_AS(mt::harmonic_mean_pvalue(V{0.0}), std::invalid_argument);

    const auto h = mt::global_test(mt::GlobalMethod::harmonic, V{0.01, 1}, 0.05);
    CHECK(h.reject);
    CHECK(h.approximate);
}

TEST_CASE("fdp_power examples") {
    mt::RejectionReport r;
    CHECK(mt::fdp_power(r, I{1, 2}, 4).fdp == 0.0);
    CHECK(mt::fdp_power(r, I{1, 2}, 4).power == 0.0);
    r.rejected = {1, 2};
    auto e = mt::fdp_power(r, I{1, 2}, 4);
    CHECK(e.fdp == 0.0);
    CHECK(e.power == 1.0);
    r.rejected = {0, 1};
    e = mt::fdp_power(r, I{1, 2}, 4);
    CHECK(e.fdp == 0.5);
    CHECK(e.power == 0.5);
    CHECK_THROWS_AS(mt::fdp_power(r, I{9}, 4), std::invalid_argument);
}

TEST_CASE("global method names round-trip") {
    for (auto m : {mt::GlobalMethod::fisher, mt::GlobalMethod::fisher_corrected, mt::GlobalMethod::stouffer,
                   mt::GlobalMethod::simes, mt::GlobalMethod::harmonic}) {
        CHECK(mt::global_method_from_string(mt::to_string(m)) == m);
    }
}
