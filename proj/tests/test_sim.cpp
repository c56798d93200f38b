#include "doctest.h"

#include <cmath>
#include <numeric>

#include "ccv/conformal.hpp"
#include "ccv/core/order_stats.hpp"
#include "ccv/core/special.hpp"
#include "ccv/mtest.hpp"
#include "ccv/sim/experiments.hpp"
#include "gen.hpp"

namespace sim = ccv::sim;
namespace ad = ccv::adjust;
using ccv::stats::RandomStream;

namespace {

sim::ExperimentConfig small_config() {
    sim::ExperimentConfig c;
    c.practitioners = 4;
    c.test_sets = 3;
    c.n_train = 150;
    c.n_cal = 199;
    c.n_test = 100;
    c.dim = 4;
    c.centers = 5;
    c.box = 2.0;
    c.signal = 3.0;
    c.methods = {"marginal", "simes", "asymptotic"};
    c.alphas = {0.1, 0.2};
    c.seed = 17;
    return c;
}

bool same_rows(const sim::ExperimentReport& a, const sim::ExperimentReport& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const auto& x = a.rows[i];
        const auto& y = b.rows[i];
        if (x.practitioner != y.practitioner || x.method != y.method || x.procedure != y.procedure ||
            x.alpha != y.alpha || x.fdr != y.fdr || x.power != y.power) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("quantile matches linear interpolation") {
    CHECK(sim::quantile({1.0, 2.0, 3.0, 4.0}, 0.9) == doctest::Approx(3.7));
    CHECK(sim::quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
    CHECK(sim::quantile({5.0}, 0.9) == 5.0);
    CHECK(sim::quantile({1.0, 2.0}, 0.0) == 1.0);
    CHECK(sim::quantile({1.0, 2.0}, 1.0) == 2.0);
    CHECK(std::isnan(sim::quantile({}, 0.5)));
    CHECK(sim::quantile_se({1.0, 1.0, 1.0}, 0.9) == 0.0);
}

TEST_CASE("config validation") {
    auto c = small_config();
    CHECK_NOTHROW(sim::validate_config(c));
    c.practitioners = 0;
    CHECK_THROWS_AS(sim::validate_config(c), std::invalid_argument);
    c = small_config();
    c.methods = {"marginal", "bogus"};
    CHECK_THROWS_AS(sim::validate_config(c), std::invalid_argument);
    c = small_config();
    c.procedures = {"holm"};
    CHECK_THROWS_AS(sim::validate_config(c), std::invalid_argument);
    c = small_config();
    c.signal = 0.5;
    CHECK_THROWS_AS(sim::validate_config(c), std::invalid_argument);
    c = small_config();
    c.alphas = {1.5};
    CHECK_THROWS_AS(sim::validate_config(c), std::invalid_argument);
    c = small_config();
    c.batch_size = 7;
    CHECK_THROWS_AS(sim::run_batch_experiment(c), std::invalid_argument);
    c = small_config();
    c.uniform_scores = true;
    CHECK_THROWS_AS(sim::run_outlier_experiment(c), std::invalid_argument);
}

TEST_CASE("outlier experiment: shape, bookkeeping and determinism") {
    auto c = small_config();
    const auto a = sim::run_outlier_experiment(c);
    CHECK(a.rows.size() == c.practitioners * c.methods.size() * c.procedures.size() * c.alphas.size());
    CHECK(a.summaries.size() == c.methods.size() * c.procedures.size() * c.alphas.size());
    CHECK(a.sequences.size() == 2);

    for (const auto& s : a.summaries) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : a.rows) {
            if (r.method == s.method && r.procedure == s.procedure && r.alpha == s.alpha) {
                sum += r.fdr;
                ++count;
                CHECK(r.fdr >= 0.0);
                CHECK(r.fdr <= 1.0);
                CHECK(r.power >= 0.0);
                CHECK(r.power <= 1.0);
            }
        }
        CHECK(count == c.practitioners);
        CHECK(s.mfdr == sum / static_cast<double>(count));
    }

    const auto b = sim::run_outlier_experiment(c);
    CHECK(same_rows(a, b));
    c.threads = 3;
    const auto t = sim::run_outlier_experiment(c);
    CHECK(same_rows(a, t));

    c.seed = 18;
    CHECK_FALSE(same_rows(a, sim::run_outlier_experiment(c)));
}

TEST_CASE("outlier experiment with one practitioner and one test set") {
    auto c = small_config();
    c.practitioners = 1;
    c.test_sets = 1;
    c.methods = {"marginal"};
    c.procedures = {"bh"};
    c.alphas = {0.1};
    const auto r = sim::run_outlier_experiment(c);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.summaries[0].mfdr == r.rows[0].fdr);
    CHECK(r.summaries[0].mpower == r.rows[0].power);
}

TEST_CASE("outlier experiment across scorers") {
    for (auto kind : {ccv::scoring::ScorerKind::knn, ccv::scoring::ScorerKind::mahalanobis}) {
        auto c = small_config();
        c.scorer = kind;
        c.practitioners = 2;
        c.methods = {"marginal"};
        c.procedures = {"bh"};
        c.signal = 6.0;
        const double strong = sim::run_outlier_experiment(c).summaries.front().mpower;
        c.signal = 1.0;
        const double none = sim::run_outlier_experiment(c).summaries.front().mpower;
        CHECK(strong > none + 0.1);
    }
}

TEST_CASE("no signal: power only from false rejections, FDR near pi0 alpha") {
    auto c = small_config();
    c.signal = 1.0;
    c.practitioners = 40;
    c.test_sets = 20;
    c.methods = {"marginal"};
    c.procedures = {"bh"};
    c.alphas = {0.1};
    const auto r = sim::run_outlier_experiment(c);
    const auto& s = r.summaries.front();
    CHECK(s.mpower < 0.05);
    CHECK(s.mfdr <= 0.9 * 0.1 + 3.0 * s.mfdr_se + 1e-12);
}

TEST_CASE("batch size one reduces to the outlier experiment") {
    auto c = small_config();
    c.batch_size = 1;
    c.procedures = {"bh"};
    const auto batch = sim::run_batch_experiment(c);
    const auto single = sim::run_outlier_experiment(c);
    REQUIRE(batch.rows.size() == single.rows.size());
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        CHECK(batch.rows[i].fdr == doctest::Approx(single.rows[i].fdr).epsilon(1e-12));
        CHECK(batch.rows[i].power == doctest::Approx(single.rows[i].power).epsilon(1e-12));
    }
}

TEST_CASE("batch experiment detects non-null batches") {
    auto c = small_config();
    c.batch_size = 10;
    c.outlier_fraction = 0.3;
    c.signal = 4.0;
    c.procedures = {"storey-bh"};
    c.alphas = {0.1};
    const auto r = sim::run_batch_experiment(c);
    CHECK(r.summaries.front().mpower > 0.5);
    c.threads = 2;
    CHECK(same_rows(r, sim::run_batch_experiment(c)));
}

TEST_CASE("batch FWER under the null: uniform fast path agrees in law with scored data") {
    auto c = small_config();
    c.practitioners = 30;
    c.test_sets = 20;
    c.n_test = 200;
    c.batch_size = 10;
    c.methods = {"marginal", "simes"};
    const auto scored = sim::run_batch_fwer(c);
    c.uniform_scores = true;
    const auto fast = sim::run_batch_fwer(c);
    for (std::size_t k = 0; k < 2; ++k) {
        const auto& a = scored.summaries[k];
        const auto& b = fast.summaries[k];
        CHECK(a.procedure == "fwer");
        CHECK(std::abs(a.mfdr - b.mfdr) <= 4.0 * std::hypot(a.mfdr_se, b.mfdr_se) + 1e-12);
    }
    // Simes-adjusted p-values are conservative on average
    CHECK(fast.summaries[1].mfdr < fast.summaries[0].mfdr);
}

TEST_CASE("fisher_null_calibration agrees with the mtest procedures replicate by replicate") {
    const std::size_t n = 60;
    const double gamma = 2.0;
    const std::size_t reps = 300;
    const RandomStream rng(5);
    const auto fast = sim::fisher_null_calibration(n, gamma, 0.1, reps, rng);
    std::size_t plain = 0;
    std::size_t corrected = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        auto s = rng.split(r);
        const ccv::conformal::CalibrationSet cal(ccv::stats::uniform_order_stats(n, s));
        std::vector<double> p(fast.m);
        for (auto& v : p) v = ccv::conformal::marginal_pvalue(cal, s.uniform());
        plain += ccv::mtest::fisher_test(p, 0.1).reject ? 1 : 0;
        corrected += ccv::mtest::fisher_corrected_test(p, 0.1, gamma).reject ? 1 : 0;
    }
    CHECK(fast.m == 120);
    CHECK(fast.uncorrected.value == static_cast<double>(plain) / reps);
    CHECK(fast.corrected.value == static_cast<double>(corrected) / reps);
}

TEST_CASE("fisher with a single test p-value has level near alpha") {
    const auto r = sim::fisher_null_calibration(100, 0.01, 0.05, 20000, RandomStream(6));
    CHECK(r.m == 1);
    // Exact levels on the grid k/101: the plain cut admits p <= 5/101; the
    // corrected cut -2 log p >= 6.01144 lands just above -2 log(5/101) = 6.01124.
    CHECK(std::abs(r.uncorrected.value - 5.0 / 101.0) <= 4.0 * r.uncorrected.se);
    CHECK(std::abs(r.corrected.value - 4.0 / 101.0) <= 4.0 * r.corrected.se);
    CHECK_THROWS_AS(sim::fisher_null_calibration(100, 0.001, 0.05, 10, RandomStream(6)), std::invalid_argument);
}

TEST_CASE("fisher inflation grows with gamma, correction holds the level") {
    const auto lo = sim::fisher_null_calibration(300, 0.5, 0.05, 3000, RandomStream(8));
    const auto hi = sim::fisher_null_calibration(300, 3.0, 0.05, 3000, RandomStream(8));
    CHECK(hi.uncorrected.value > lo.uncorrected.value);
    CHECK(hi.uncorrected.value > 0.12);
    CHECK(hi.corrected.value < 0.05 + 4.0 * hi.corrected.se);
    CHECK(hi.limit_uncorrected == doctest::Approx(0.20541).epsilon(1e-4));
}

TEST_CASE("conditional fisher type-I error is spread widely over calibration draws") {
    const auto r = sim::fisher_conditional_type1(300, 3.0, 0.05, 60, 100, RandomStream(9), 2);
    REQUIRE(r.rates.size() == 60);
    CHECK(r.q90 > 0.4);
    CHECK(r.q90 > r.mean);
    const auto again = sim::fisher_conditional_type1(300, 3.0, 0.05, 60, 100, RandomStream(9), 1);
    CHECK(again.rates == r.rates);
}

TEST_CASE("p-values sharing a calibration set correlate at 1/(n+2)") {
    const auto shared = sim::correlation_check(20, 60000, [](double p) { return p; }, RandomStream(10));
    CHECK(shared.target == doctest::Approx(1.0 / 22.0));
    CHECK(std::abs(shared.correlation.value - shared.target) <= 4.0 * shared.correlation.se);
    const auto logged =
        sim::correlation_check(20, 60000, [](double p) { return -2.0 * std::log(p); }, RandomStream(11));
    CHECK(std::abs(logged.correlation.value - logged.target) <= 4.0 * logged.correlation.se);
    const auto indep =
        sim::correlation_check(20, 60000, [](double p) { return p; }, RandomStream(12), true);
    CHECK(indep.target == 0.0);
    CHECK(std::abs(indep.correlation.value) <= 4.0 * indep.correlation.se);
}

TEST_CASE("conditional FPR follows the Beta law") {
    const auto r = sim::fpr_beta_check(100, 0.1, 10000, RandomStream(13));
    CHECK(r.ell == 10);
    CHECK(r.beta_b == 91.0);
    CHECK(r.pass);
    CHECK(std::abs(r.mean - 10.0 / 101.0) <= 4.0 * r.mean_se);

    const auto big = sim::fpr_beta_check(1600, 0.1, 4000, RandomStream(14));
    const auto small = sim::fpr_beta_check(100, 0.1, 4000, RandomStream(15));
    const double ratio = small.sd / big.sd;
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);

    // Wrong law must be rejected: Beta(10, 91) samples against Beta(11, 90).
    const auto ks = ccv::stats::ks_test(r.samples, [](double x) { return ccv::stats::beta_cdf(11, 90, x); });
    CHECK(ks.p_value < 0.01);

    CHECK_THROWS_AS(sim::fpr_beta_check(5, 0.1, 100, RandomStream(1)), std::invalid_argument);
}

TEST_CASE("BH and Storey-BH FDR under conformal nulls") {
    const auto bh = sim::conformal_fdr_check(199, 40, 36, 0.1, "bh", std::nullopt, 3000, RandomStream(16));
    CHECK(bh.power.value == 1.0);
    CHECK(std::abs(bh.fdr.value - 0.09) <= 4.0 * bh.fdr.se);
    const auto st = sim::conformal_fdr_check(199, 40, 36, 0.1, "storey-bh", std::nullopt, 3000, RandomStream(17));
    CHECK(st.fdr.value <= 0.1 + 3.0 * st.fdr.se);
    CHECK_THROWS_AS(sim::conformal_fdr_check(199, 40, 41, 0.1, "bh", std::nullopt, 10, RandomStream(1)),
                    std::invalid_argument);
}

TEST_CASE("coverage event matches the sequence guarantee") {
    const auto seq = ad::simes_sequence(300, 0.1, 150);
    const auto r = sim::coverage_event_check(seq, 3000, RandomStream(18));
    CHECK(r.method == "simes");
    CHECK(std::abs(r.frequency.value - 0.9) <= 4.0 * r.frequency.se);
    const auto mc = ad::coverage_probability_mc(seq, 3000, RandomStream(19), 1);
    CHECK(std::abs(r.frequency.value - mc.value) <= 4.0 * std::hypot(r.frequency.se, mc.se));
    // A sequence of all ones always covers; b_i = (i-1)/n never does.
    ad::AdjustmentSequence ones = seq;
    std::fill(ones.b.begin(), ones.b.end(), 1.0);
    CHECK(sim::coverage_event_check(ones, 50, RandomStream(1)).frequency.value == 1.0);
    ad::AdjustmentSequence low = seq;
    for (std::size_t i = 0; i < low.n; ++i) low.b[i] = static_cast<double>(i) / static_cast<double>(low.n);
    CHECK(sim::coverage_event_check(low, 50, RandomStream(1)).frequency.value == 0.0);
}

TEST_CASE("needle effective level") {
    const std::size_t n = 10000;
    const auto dkwm = ad::dkwm_sequence(n, 0.1);
    CHECK(sim::needle_effective_level(dkwm, 100, 0.05) == 0.0);
    const auto asym = ad::asymptotic_sequence(n, 0.1);
    const double expected = 0.05 - 100.0 * (asym.at(1) - 1.0 / (n + 1.0));
    CHECK(sim::needle_effective_level(asym, 100, 0.05) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected > 0.0);
    CHECK_THROWS_AS(sim::needle_effective_level(asym, 0, 0.05), std::invalid_argument);
}

TEST_CASE("power curves") {
    sim::PowerCurveConfig c;
    c.ns = {400, 2500};
    c.methods = {"simes", "dkwm", "asymptotic"};
    c.fisher_reps = 2000;
    c.seed = 3;
    const auto rows = sim::power_curves(c);
    CHECK(rows.size() == 2 * 3 * 3);
    for (const auto& r : rows) {
        CHECK(r.m == static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(r.n)))));
        CHECK(r.effective_level >= 0.0);
        CHECK(r.effective_level <= c.alpha + 0.02);
        if (r.setting == "single") {
            const auto seq = ad::build(ad::method_from_string(r.method), r.n, c.delta, {});
            CHECK(r.effective_level == ad::effective_level(seq, c.alpha));
        }
    }
    auto level = [&](std::size_t n, const std::string& m, const std::string& s) {
        for (const auto& r : rows) {
            if (r.n == n && r.method == m && r.setting == s) return r.effective_level;
        }
        return -1.0;
    };
    CHECK(level(2500, "asymptotic", "single") > level(2500, "simes", "single"));
    CHECK(level(2500, "asymptotic", "single") > level(400, "asymptotic", "single"));
    CHECK(level(2500, "simes", "fisher") < level(2500, "asymptotic", "fisher"));

    c.threads = 2;
    const auto again = sim::power_curves(c);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].effective_level == rows[i].effective_level);
}
