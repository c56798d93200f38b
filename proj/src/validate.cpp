#include "ccv/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>

#include "ccv/mtest.hpp"
#include "ccv/sim/experiments.hpp"

namespace ccv::validate {

namespace {

using stats::RandomStream;

struct Context {
    const Options& opt;
    RandomStream root;
    bool full;

    RandomStream stream(int id) const { return root.split(static_cast<std::uint64_t>(id)); }

    adjust::AdjustmentSequence prepared(adjust::AdjustmentSequence seq) const {
        if (opt.sequence_hook) opt.sequence_hook(seq);
        adjust::validate_sequence(seq);
        return seq;
    }

    // Shared between criteria.
    std::optional<sim::FisherNullResult> fisher;
    std::optional<adjust::AdjustmentSequence> mc_seq;
};

std::string fmt(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

const sim::FisherNullResult& fisher_run(Context& ctx) {
    if (!ctx.fisher) {
        ctx.fisher = sim::fisher_null_calibration(2000, 3.0, 0.05, 5000, ctx.stream(1), ctx.opt.threads);
    }
    return *ctx.fisher;
}

const adjust::AdjustmentSequence& mc_sequence(Context& ctx) {
    if (!ctx.mc_seq) {
        auto seq = adjust::monte_carlo_sequence(1000, 0.1, adjust::default_simes_k(1000), 10000,
                                                ctx.stream(9).split(0), ctx.opt.threads);
        ctx.mc_seq = ctx.prepared(std::move(seq));
    }
    return *ctx.mc_seq;
}

CriterionResult c1(Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& r = fisher_run(ctx);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CriterionResult out;
    out.title = "Fisher type-I inflation";
    out.target = "uncorrected rate in [0.185, 0.225], runtime < 60 s";
    out.observed = r.uncorrected.value;
    out.tolerance = 0.02;
    out.pass = r.uncorrected.value >= 0.185 && r.uncorrected.value <= 0.225 && secs < 60.0;
    out.details = {{"n", r.n}, {"m", r.m}, {"alpha", r.alpha}, {"reps", r.uncorrected.reps},
                   {"se", r.uncorrected.se}, {"limit", r.limit_uncorrected}, {"runtime_s", secs}};
    return out;
}

CriterionResult c2(Context& ctx) {
    const auto& r = fisher_run(ctx);
    CriterionResult out;
    out.title = "Corrected Fisher validity";
    out.target = "corrected rate in [0.03, 0.07]";
    out.observed = r.corrected.value;
    out.tolerance = 0.02;
    out.pass = r.corrected.value >= 0.03 && r.corrected.value <= 0.07;
    out.details = {{"n", r.n}, {"m", r.m}, {"se", r.corrected.se}, {"reps", r.corrected.reps}};
    return out;
}

CriterionResult c3(Context& ctx) {
    const std::size_t inner = ctx.full ? 400 : 100;
    const auto r = sim::fisher_conditional_type1(1000, 3.0, 0.05, 200, inner, ctx.stream(3), ctx.opt.threads);
    CriterionResult out;
    out.title = "Conditional Fisher failure";
    out.target = "90th percentile of conditional type-I error > 0.5";
    out.observed = r.q90;
    out.tolerance = 0.0;
    out.pass = r.q90 > 0.5;
    out.details = {{"n", 1000}, {"gamma", 3.0}, {"calibration_draws", 200}, {"inner_reps", inner},
                   {"q90_se", r.q90_se}, {"mean", r.mean}, {"large_n_limit", 0.717}};
    return out;
}

CriterionResult c4(Context& ctx) {
    const std::size_t reps = 100000;
    const auto id = sim::correlation_check(100, reps, [](double p) { return p; }, ctx.stream(4).split(0),
                                                  false, ctx.opt.threads);
    const auto lg = sim::correlation_check(100, reps, [](double p) { return -2.0 * std::log(p); },
                                                  ctx.stream(4).split(1), false, ctx.opt.threads);
    const double target = 1.0 / 102.0;
    const double dev_id = std::abs(id.correlation.value - target) / id.correlation.se;
    const double dev_lg = std::abs(lg.correlation.value - target) / lg.correlation.se;
    CriterionResult out;
    out.title = "Shared-calibration correlation";
    out.target = "both estimates within 4 s.e. of 1/102";
    out.observed = id.correlation.value;
    out.tolerance = 4.0 * id.correlation.se;
    out.pass = dev_id <= 4.0 && dev_lg <= 4.0;
    out.details = {{"target", target},
                   {"identity", {{"estimate", id.correlation.value}, {"se", id.correlation.se}, {"z", dev_id}}},
                   {"neg2log", {{"estimate", lg.correlation.value}, {"se", lg.correlation.se}, {"z", dev_lg}}},
                   {"reps", reps}};
    return out;
}

CriterionResult c5(Context& ctx) {
    const std::size_t reps = ctx.full ? 4000 : 2000;
    const auto r = sim::conformal_fdr_check(999, 100, 90, 0.1, "bh", std::nullopt, reps, ctx.stream(5), ctx.opt.threads);
    const double tol = 3.0 * r.fdr.se;
    CriterionResult out;
    out.title = "BH FDR under conformal nulls";
    out.target = "mean FDP in [0.09 - 3 s.e., 0.09 + 3 s.e.]";
    out.observed = r.fdr.value;
    out.tolerance = tol;
    out.pass = std::abs(r.fdr.value - 0.09) <= tol;
    out.details = {{"n_cal", 999}, {"m", 100}, {"nulls", 90}, {"reps", reps}, {"se", r.fdr.se},
                   {"power", r.power.value}};
    return out;
}

CriterionResult c6(Context& ctx) {
    const std::size_t reps = ctx.full ? 4000 : 2000;
    const double lambda = mtest::storey_default_lambda(999);
    const auto r = sim::conformal_fdr_check(999, 100, 90, 0.1, "storey-bh", lambda, reps, ctx.stream(6), ctx.opt.threads);
    const double tol = 3.0 * r.fdr.se;
    CriterionResult out;
    out.title = "Storey-BH FDR";
    out.target = "mean FDP <= 0.1 + 3 s.e. with on-grid lambda";
    out.observed = r.fdr.value;
    out.tolerance = tol;
    out.pass = r.fdr.value <= 0.1 + tol && mtest::lambda_on_grid(lambda, 999);
    out.details = {{"lambda", lambda}, {"reps", reps}, {"se", r.fdr.se}, {"power", r.power.value}};
    return out;
}

CriterionResult c7(Context& ctx) {
    const auto r = sim::fpr_beta_check(100, 0.1, 10000, ctx.stream(7), ctx.opt.threads);
    CriterionResult out;
    out.title = "Beta law of FPR";
    out.target = "KS test vs Beta(10, 91) not rejected at 1%";
    out.observed = r.ks_pvalue;
    out.tolerance = 0.01;
    out.pass = r.pass && r.ell == 10 && r.beta_b == 91.0;
    out.details = {{"ell", r.ell}, {"ks_statistic", r.ks_statistic}, {"mean", r.mean}, {"mean_target", 10.0 / 101.0}};
    return out;
}

CriterionResult c8(Context& ctx) {
    const auto seq = ctx.prepared(adjust::simes_sequence(1000, 0.1, 500));
    const double b1_exact = 1.0 - std::pow(0.1, 0.002);
    const auto cov = adjust::coverage_probability_mc(seq, 100000, ctx.stream(8), ctx.opt.threads);
    const bool b1_ok = std::abs(seq.b[0] - b1_exact) <= 1e-12;
    const bool b25_ok = std::abs(seq.b[24] - 0.0377) <= 0.0005;
    const bool cov_ok = cov.value >= 0.9 - 3.0 * cov.se;
    CriterionResult out;
    out.title = "Simes sequence exactness";
    out.target = "b1 = 1 - 0.1^0.002 (1e-12), b25 = 0.0377 +/- 0.0005, coverage >= 0.9 - 3 s.e.";
    out.observed = seq.b[0];
    out.tolerance = 1e-12;
    out.pass = b1_ok && b25_ok && cov_ok;
    out.details = {{"b1", seq.b[0]}, {"b1_exact", b1_exact}, {"b25", seq.b[24]},
                   {"coverage", cov.value}, {"coverage_se", cov.se}, {"reps", cov.reps}};
    return out;
}

CriterionResult c9(Context& ctx) {
    const auto& seq = mc_sequence(ctx);
    const auto simes = adjust::simes_sequence(1000, 0.1, adjust::default_simes_k(1000));
    const auto cov = adjust::coverage_probability_mc(seq, 100000, ctx.stream(9).split(1), ctx.opt.threads);
    bool below = true;
    for (std::size_t i = 0; i < seq.n / 2; ++i) below = below && seq.b[i] <= simes.b[i];
    CriterionResult out;
    out.title = "Monte-Carlo sequence coverage";
    out.target = "independent coverage >= 0.9 - 3 s.e.; b^m <= b^s on the lower half";
    out.observed = cov.value;
    out.tolerance = 3.0 * cov.se;
    out.pass = cov.value >= 0.9 - 3.0 * cov.se && below;
    out.details = {{"delta_hat", seq.delta_hat ? *seq.delta_hat : std::nan("")}, {"build_reps", 10000},
                   {"coverage_se", cov.se}, {"reps", cov.reps}, {"lower_half_dominated", below},
                   {"warning", seq.warning}};
    return out;
}

CriterionResult c10(Context& ctx) {
    const double target = adjust::simes_sequence(1000, 0.1, 500).b[0];
    const auto seq = ctx.prepared(adjust::dempster_sequence(1000, 0.1, target));
    const double a = *seq.dempster_a;
    const double b = *seq.dempster_b;
    const double exact = adjust::dempster_delta(a, b, 1000);
    const std::size_t reps = ctx.full ? 100000 : 20000;
    const auto mc = adjust::dempster_crossing_mc(a, b, 1000, reps, ctx.stream(10), ctx.opt.threads);
    const bool exact_ok = std::abs(exact - 0.1) <= 1e-6;
    const bool mc_ok = std::abs(mc.value - 0.1) <= 3.0 * mc.se;
    CriterionResult out;
    out.title = "Dempster consistency";
    out.target = "exact crossing probability within 1e-6 of delta; MC within 3 s.e.";
    out.observed = exact;
    out.tolerance = 1e-6;
    out.pass = exact_ok && mc_ok;
    out.details = {{"a", a}, {"b", b}, {"mc", mc.value}, {"mc_se", mc.se}, {"reps", reps},
                   {"warning", seq.warning}, {"note", seq.note}};
    return out;
}

CriterionResult c11(Context& ctx) {
    std::vector<adjust::AdjustmentSequence> seqs{
        ctx.prepared(adjust::simes_sequence(1000, 0.1, adjust::default_simes_k(1000))),
        ctx.prepared(adjust::asymptotic_sequence(1000, 0.1)), mc_sequence(ctx)};
    bool pass = true;
    double worst = 1.0;
    nlohmann::json events = nlohmann::json::object();
    for (std::size_t k = 0; k < seqs.size(); ++k) {
        const auto r = sim::coverage_event_check(seqs[k], 500, ctx.stream(11).split(k));
        const double floor = 0.9 - 3.0 * std::sqrt(0.09 / 500.0);
        pass = pass && r.frequency.value >= floor;
        worst = std::min(worst, r.frequency.value);
        events[r.method] = r.frequency.value;
    }

    sim::ExperimentConfig cfg;
    cfg.practitioners = 25;
    cfg.test_sets = 25;
    cfg.n_cal = 1000;
    cfg.n_test = 1000;
    cfg.methods = {"simes", "asymptotic", "monte-carlo"};
    cfg.procedures = {"bh"};
    cfg.alphas = {0.1};
    cfg.seed = ctx.stream(11).split(100).next_u64();
    cfg.threads = ctx.opt.threads;
    const auto rep = sim::run_outlier_experiment(cfg);
    const double floor = 0.9 - 3.0 * std::sqrt(0.09 / 25.0);
    nlohmann::json fdr = nlohmann::json::object();
    for (const auto& s : rep.summaries) {
        pass = pass && s.frac_fdr_le_alpha >= floor;
        worst = std::min(worst, s.frac_fdr_le_alpha);
        fdr[s.method] = {{"frac_fdr_le_alpha", s.frac_fdr_le_alpha}, {"fdr_q90", s.fdr_q90}, {"mfdr", s.mfdr},
                         {"mpower", s.mpower}};
    }
    CriterionResult out;
    out.title = "CCV guarantee";
    out.target = "coverage event >= 0.9 - 3 s.e. (500 draws) and >= 90% - 3 s.e. of practitioners with cFDR <= 0.1";
    out.observed = worst;
    out.tolerance = 3.0 * std::sqrt(0.09 / 25.0);
    out.pass = pass;
    out.details = {{"coverage_event", events}, {"practitioner_fdr", fdr}, {"signal", cfg.signal},
                   {"scorer", scoring::to_string(cfg.scorer)}};
    return out;
}

CriterionResult c12(Context& ctx) {
    sim::ExperimentConfig cfg;
    cfg.practitioners = 100;
    cfg.test_sets = ctx.full ? 200 : 50;
    cfg.n_cal = 1000;
    cfg.n_test = 1000;
    cfg.batch_size = 10;
    cfg.fwer_cut = 0.1;
    cfg.uniform_scores = true;
    cfg.methods = {"marginal", "simes", "asymptotic", "monte-carlo"};
    cfg.seed = ctx.stream(12).next_u64();
    cfg.threads = ctx.opt.threads;
    const auto rep = sim::run_batch_fwer(cfg);
    bool pass = true;
    double marginal_q90 = 0.0;
    nlohmann::json per = nlohmann::json::object();
    for (const auto& s : rep.summaries) {
        const double bound = 0.1 + 3.0 * s.fdr_q90_se;
        if (s.method == "marginal") {
            marginal_q90 = s.fdr_q90;
            pass = pass && s.fdr_q90 > bound;
        } else {
            pass = pass && s.fdr_q90 <= bound;
        }
        per[s.method] = {{"fwer_q90", s.fdr_q90}, {"q90_se", s.fdr_q90_se}, {"mean_fwer", s.mfdr},
                         {"frac_le_cut", s.frac_fdr_le_alpha}};
    }
    CriterionResult out;
    out.title = "Batch FWER";
    out.target = "90th percentile of conditional FWER: marginal > 0.1 + 3 s.e., CCV <= 0.1 + 3 s.e.";
    out.observed = marginal_q90;
    out.tolerance = 3.0 * rep.summaries.front().fdr_q90_se;
    out.pass = pass;
    out.details = {{"methods", per}, {"practitioners", cfg.practitioners}, {"batches_per_practitioner",
                   cfg.test_sets * cfg.n_test / cfg.batch_size}};
    return out;
}

CriterionResult c13(Context& ctx) {
    sim::PowerCurveConfig cfg;
    cfg.ns = {10000};
    cfg.alpha = 0.05;
    cfg.delta = 0.1;
    cfg.methods = {"simes", "dkwm", "asymptotic"};
    cfg.fisher_reps = ctx.full ? 10000 : 2000;
    cfg.seed = ctx.stream(13).next_u64();
    cfg.threads = ctx.opt.threads;
    for (const auto& m : cfg.methods) {
        ctx.prepared(adjust::build(adjust::method_from_string(m), 10000, 0.1, {}));
    }
    const auto rows = sim::power_curves(cfg);
    auto level = [&](const std::string& method, const std::string& setting) {
        for (const auto& r : rows) {
            if (r.method == method && r.setting == setting) return r.effective_level;
        }
        throw std::logic_error("missing power-curve row");
    };
    const bool single = level("asymptotic", "single") > level("simes", "single");
    const bool needle = level("dkwm", "needle") == 0.0 && level("simes", "needle") > 0.0 &&
                        level("asymptotic", "needle") > 0.0;
    const bool fisher = level("simes", "fisher") < level("asymptotic", "fisher");
    nlohmann::json levels = nlohmann::json::object();
    for (const auto& r : rows) levels[r.setting][r.method] = r.effective_level;
    CriterionResult out;
    out.title = "Effective-level ordering";
    out.target = "single: asymptotic > simes; needle: dkwm = 0 < simes, asymptotic; fisher: simes < asymptotic";
    out.observed = level("asymptotic", "single") - level("simes", "single");
    out.tolerance = 0.0;
    out.pass = single && needle && fisher;
    out.details = {{"levels", levels}, {"n", 10000}, {"m", 100}, {"fisher_reps", cfg.fisher_reps}};
    return out;
}

using CriterionFn = CriterionResult (*)(Context&);

struct Entry {
    int id;
    CriterionFn fn;
    const char* title;
};

constexpr Entry kCriteria[] = {
    {1, c1, "Fisher type-I inflation"},   {2, c2, "Corrected Fisher validity"},
    {3, c3, "Conditional Fisher failure"}, {4, c4, "Shared-calibration correlation"},
    {5, c5, "BH FDR under conformal nulls"}, {6, c6, "Storey-BH FDR"},
    {7, c7, "Beta law of FPR"},           {8, c8, "Simes sequence exactness"},
    {9, c9, "Monte-Carlo sequence coverage"}, {10, c10, "Dempster consistency"},
    {11, c11, "CCV guarantee"},           {12, c12, "Batch FWER"},
    {13, c13, "Effective-level ordering"},
};

} // namespace

std::string to_string(Level level) { return level == Level::quick ? "quick" : "full"; }

Level level_from_string(const std::string& name) {
    if (name == "quick") return Level::quick;
    if (name == "full") return Level::full;
    throw std::invalid_argument("unknown validation level: " + name);
}

void tamper_non_monotone(adjust::AdjustmentSequence& seq) {
    if (seq.b.size() < 2) return;
    if (seq.b[1] < 1.0) {
        seq.b[0] = 0.5 * (seq.b[1] + 1.0);
    } else {
        seq.b[0] = 1.0;
        seq.b[1] = 0.5;
    }
}

std::vector<CriterionResult> run(const Options& options) {
    Context ctx{options, RandomStream(options.seed), options.level == Level::full, std::nullopt, std::nullopt};
    std::vector<CriterionResult> results;
    for (const auto& e : kCriteria) {
        if (!options.only.empty() &&
            std::find(options.only.begin(), options.only.end(), e.id) == options.only.end()) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        CriterionResult r;
        try {
            r = e.fn(ctx);
        } catch (const std::exception& ex) {
            r = CriterionResult{};
            r.title = e.title;
            r.target = "criterion completes";
            r.observed = std::nan("");
            r.pass = false;
            r.details = {{"error", ex.what()}};
        }
        r.id = e.id;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (options.on_result) options.on_result(r);
        results.push_back(std::move(r));
    }
    return results;
}

nlohmann::json report_json(const Options& options, const std::vector<CriterionResult>& results) {
    nlohmann::json j;
    j["level"] = to_string(options.level);
    j["seed"] = options.seed;
    j["threads"] = options.threads;
    bool all = true;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : results) {
        all = all && r.pass;
        arr.push_back({{"criterion", r.id},
                       {"title", r.title},
                       {"target", r.target},
                       {"observed", std::isnan(r.observed) ? nlohmann::json() : nlohmann::json(r.observed)},
                       {"tolerance", r.tolerance},
                       {"pass", r.pass},
                       {"seconds", r.seconds},
                       {"details", r.details}});
    }
    j["criteria"] = arr;
    j["pass"] = all;
    return j;
}

std::string summary_line(const CriterionResult& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "[%s] %2d  %-30s observed %s  (%.1f s)", r.pass ? "PASS" : "FAIL", r.id,
                  r.title.c_str(), std::isnan(r.observed) ? "error" : fmt(r.observed, 6).c_str(), r.seconds);
    std::string line = buf;
    if (r.details.contains("error")) line += "  error: " + r.details["error"].get<std::string>();
    return line;
}

} // namespace ccv::validate
