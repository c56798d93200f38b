#include "ccv/sim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ccv/conformal.hpp"
#include "ccv/core/order_stats.hpp"
#include "ccv/core/parallel.hpp"
#include "ccv/core/special.hpp"
#include "ccv/sim/mixture.hpp"

namespace ccv::sim {

namespace {

// Child-stream ids under the experiment root.
constexpr std::uint64_t kMixtureStream = 0;
constexpr std::uint64_t kPractitionerStream = 1;
constexpr std::uint64_t kSequenceStream = 2;

// Within a practitioner stream.
constexpr std::uint64_t kTrainStream = 0;
constexpr std::uint64_t kCalStream = 1;
constexpr std::uint64_t kFirstTestStream = 2;

struct Calibrator {
    std::string name;
    std::optional<adjust::AdjustmentSequence> seq;

    double map(double p) const { return seq ? adjust::apply(*seq, p) : p; }
};

std::vector<Calibrator> make_calibrators(const ExperimentConfig& config) {
    std::vector<Calibrator> out;
    const stats::RandomStream root(config.seed);
    for (const auto& name : config.methods) {
        if (name == "marginal") {
            out.push_back({name, std::nullopt});
            continue;
        }
        adjust::BuildOptions opts;
        opts.k = config.simes_k;
        opts.reps = config.mc_reps;
        opts.seed = root.split(kSequenceStream).next_u64();
        opts.threads = config.threads;
        out.push_back({name, adjust::build(adjust::method_from_string(name), config.n_cal, config.delta, opts)});
    }
    return out;
}

scoring::ScoreModel fit_scorer(const ExperimentConfig& config, const MixtureSpec& spec, stats::RandomStream rng) {
    switch (config.scorer) {
    case scoring::ScorerKind::oracle_mixture:
        return scoring::oracle_mixture(spec, 1.0);
    case scoring::ScorerKind::knn:
        return scoring::fit_knn(sample_mixture(spec, 1.0, config.n_train, rng), config.knn_k);
    case scoring::ScorerKind::mahalanobis:
        return scoring::fit_mahalanobis(sample_mixture(spec, 1.0, config.n_train, rng), config.ridge);
    }
    throw std::invalid_argument("unknown scorer");
}

/// Scores for n points drawn from P_X^a, or Unif(0,1) draws in uniform mode.
std::vector<double> draw_scores(const ExperimentConfig& config, const MixtureSpec& spec,
                                const scoring::ScoreModel* model, double a, std::size_t n,
                                stats::RandomStream& rng) {
    if (config.uniform_scores) {
        std::vector<double> out(n);
        for (auto& v : out) v = rng.uniform();
        return out;
    }
    return model->score_rows(sample_mixture(spec, a, n, rng));
}

std::vector<double> marginal_pvalues(const conformal::CalibrationSet& cal, std::span<const double> scores) {
    std::vector<double> p(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) p[i] = conformal::marginal_pvalue(cal, scores[i]);
    return p;
}

mtest::RejectionReport run_procedure(const std::string& procedure, std::span<const double> p, double alpha,
                                     double lambda, std::optional<std::size_t> conformal_n) {
    if (procedure == "bh") return mtest::bh(p, alpha);
    if (procedure == "storey-bh") return mtest::storey_bh(p, alpha, lambda, conformal_n);
    throw std::invalid_argument("unknown procedure: " + procedure);
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double se_of(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

std::vector<MetricSummary> summarize(const ExperimentConfig& config, const std::vector<MetricRow>& rows,
                                     const std::vector<std::string>& procedures,
                                     const std::vector<double>& alphas) {
    std::vector<MetricSummary> out;
    for (const auto& method : config.methods) {
        for (const auto& proc : procedures) {
            for (double alpha : alphas) {
                std::vector<double> fdr;
                std::vector<double> power;
                for (const auto& r : rows) {
                    if (r.method == method && r.procedure == proc && r.alpha == alpha) {
                        fdr.push_back(r.fdr);
                        power.push_back(r.power);
                    }
                }
                MetricSummary s{method, proc, alpha, 0, 0, 0, 0, 0, 0, 0};
                s.mfdr = mean_of(fdr);
                s.mfdr_se = se_of(fdr, s.mfdr);
                s.mpower = mean_of(power);
                s.mpower_se = se_of(power, s.mpower);
                s.fdr_q90 = quantile(fdr, 0.9);
                s.fdr_q90_se = quantile_se(fdr, 0.9);
                const auto below = std::count_if(fdr.begin(), fdr.end(), [alpha](double f) { return f <= alpha; });
                s.frac_fdr_le_alpha = static_cast<double>(below) / static_cast<double>(fdr.size());
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

/// Constant-time rank queries on a sorted sample of Unif(0,1) draws.
class UniformRanks {
public:
    explicit UniformRanks(std::span<const double> sorted) : s_(sorted), start_(sorted.size() + 1) {
        const std::size_t buckets = start_.size();
        std::size_t j = 0;
        for (std::size_t b = 0; b < buckets; ++b) {
            const double edge = static_cast<double>(b) / static_cast<double>(buckets);
            while (j < s_.size() && s_[j] < edge) ++j;
            start_[b] = j;
        }
    }

    /// #{S <= u} for u in (0, 1).
    std::size_t count_le(double u) const {
        const auto b = std::min(start_.size() - 1, static_cast<std::size_t>(u * static_cast<double>(start_.size())));
        std::size_t j = start_[b];
        while (j < s_.size() && s_[j] <= u) ++j;
        return j;
    }

private:
    std::span<const double> s_;
    std::vector<std::size_t> start_;
};

/// -2 log((1 + j)/(n + 1)) for j = 0..n.
std::vector<double> fisher_terms(std::size_t n) {
    std::vector<double> t(n + 1);
    const double denom = static_cast<double>(n + 1);
    for (std::size_t j = 0; j <= n; ++j) t[j] = -2.0 * std::log(static_cast<double>(j + 1) / denom);
    return t;
}

void check_gamma(std::size_t n, double gamma) {
    if (!(gamma > 0.0) || static_cast<std::size_t>(std::floor(gamma * static_cast<double>(n))) == 0) {
        throw std::invalid_argument("need m = floor(gamma n) >= 1");
    }
}

} // namespace

void validate_config(const ExperimentConfig& c) {
    auto fail = [](const std::string& what) { throw std::invalid_argument("experiment config: " + what); };
    if (c.practitioners == 0) fail("practitioners must be positive");
    if (c.test_sets == 0) fail("test_sets must be positive");
    if (c.n_cal == 0) fail("n_cal must be positive");
    if (c.n_test == 0) fail("n_test must be positive");
    if (c.scorer != scoring::ScorerKind::oracle_mixture && c.n_train == 0) fail("n_train must be positive");
    if (!(c.outlier_fraction >= 0.0 && c.outlier_fraction <= 1.0)) fail("outlier_fraction must lie in [0, 1]");
    if (!(c.batch_outlier_share >= 0.0 && c.batch_outlier_share <= 1.0)) fail("batch_outlier_share must lie in [0, 1]");
    if (!(c.signal >= 1.0)) fail("signal must be >= 1");
    if (c.dim == 0 || c.centers == 0 || !(c.box > 0.0)) fail("dim, centers and box must be positive");
    if (!(c.delta > 0.0 && c.delta < 1.0)) fail("delta must lie in (0, 1)");
    if (c.methods.empty()) fail("no methods");
    for (const auto& m : c.methods) {
        if (m != "marginal") adjust::method_from_string(m);
    }
    for (const auto& p : c.procedures) {
        if (p != "bh" && p != "storey-bh") fail("unknown procedure " + p);
    }
    if (c.alphas.empty()) fail("no alpha values");
    for (double a : c.alphas) {
        if (!(a > 0.0 && a < 1.0)) fail("alpha must lie in (0, 1)");
    }
    if (c.lambda && !(*c.lambda > 0.0 && *c.lambda < 1.0)) fail("lambda must lie in (0, 1)");
    if (c.batch_size == 0) fail("batch_size must be positive");
    if (!(c.fwer_cut > 0.0 && c.fwer_cut < 1.0)) fail("fwer_cut must lie in (0, 1)");
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double quantile_se(std::vector<double> values, double q) {
    if (values.size() < 2) return 0.0;
    const double w = std::sqrt(q * (1.0 - q) / static_cast<double>(values.size()));
    std::sort(values.begin(), values.end());
    const double hi = quantile(values, std::min(1.0, q + w));
    const double lo = quantile(values, std::max(0.0, q - w));
    return 0.5 * (hi - lo);
}

ExperimentReport run_outlier_experiment(const ExperimentConfig& config) {
    validate_config(config);
    if (config.uniform_scores && config.outlier_fraction > 0.0 && config.signal != 1.0) {
        throw std::invalid_argument("uniform_scores requires an all-null configuration");
    }
    const stats::RandomStream root(config.seed);
    auto mix_rng = root.split(kMixtureStream);
    const auto spec = make_mixture(config.dim, config.centers, config.box, mix_rng);
    const auto calibrators = make_calibrators(config);
    const double lambda = config.lambda ? *config.lambda : mtest::storey_default_lambda(config.n_cal);

    const std::size_t n_out =
        static_cast<std::size_t>(std::llround(config.outlier_fraction * static_cast<double>(config.n_test)));
    std::vector<std::size_t> truth(n_out);
    std::iota(truth.begin(), truth.end(), std::size_t{0});

    const std::size_t cells = calibrators.size() * config.procedures.size() * config.alphas.size();
    std::vector<std::vector<MetricRow>> per(config.practitioners);

    parallel_for(config.practitioners, config.threads, [&](std::size_t j) {
        const auto prng = root.split(kPractitionerStream).split(j);
        const auto model = config.uniform_scores ? std::nullopt
                                                 : std::optional(fit_scorer(config, spec, prng.split(kTrainStream)));
        auto cal_rng = prng.split(kCalStream);
        const conformal::CalibrationSet cal(
            draw_scores(config, spec, model ? &*model : nullptr, 1.0, config.n_cal, cal_rng));

        std::vector<double> fdr(cells, 0.0);
        std::vector<double> power(cells, 0.0);
        for (std::size_t l = 0; l < config.test_sets; ++l) {
            auto trng = prng.split(kFirstTestStream + l);
            auto scores = draw_scores(config, spec, model ? &*model : nullptr, config.signal, n_out, trng);
            const auto inl = draw_scores(config, spec, model ? &*model : nullptr, 1.0, config.n_test - n_out, trng);
            scores.insert(scores.end(), inl.begin(), inl.end());
            const auto pm = marginal_pvalues(cal, scores);

            std::size_t cell = 0;
            std::vector<double> p(pm.size());
            for (const auto& c : calibrators) {
                for (std::size_t i = 0; i < pm.size(); ++i) p[i] = c.map(pm[i]);
                for (const auto& proc : config.procedures) {
                    for (double alpha : config.alphas) {
                        const auto rep = run_procedure(proc, p, alpha, lambda, config.n_cal);
                        const auto met = mtest::fdp_power(rep, truth, p.size());
                        fdr[cell] += met.fdp;
                        power[cell] += met.power;
                        ++cell;
                    }
                }
            }
        }
        const double L = static_cast<double>(config.test_sets);
        std::size_t cell = 0;
        for (const auto& c : calibrators) {
            for (const auto& proc : config.procedures) {
                for (double alpha : config.alphas) {
                    per[j].push_back({j, c.name, proc, alpha, fdr[cell] / L, power[cell] / L});
                    ++cell;
                }
            }
        }
    });

    ExperimentReport report;
    report.suite = "outlier";
    report.config = config;
    for (auto& rows : per) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    report.summaries = summarize(config, report.rows, config.procedures, config.alphas);
    for (const auto& c : calibrators) {
        if (c.seq) report.sequences.push_back(*c.seq);
    }
    return report;
}

namespace {

struct BatchPlan {
    std::size_t batches = 0;
    std::size_t alt_batches = 0;
    std::size_t per_batch = 0;  // outliers in each non-null batch
};

BatchPlan plan_batches(const ExperimentConfig& config, bool all_null) {
    if (config.n_test % config.batch_size != 0) {
        throw std::invalid_argument("n_test must be divisible by batch_size");
    }
    BatchPlan plan;
    plan.batches = config.n_test / config.batch_size;
    if (all_null) return plan;
    plan.alt_batches =
        static_cast<std::size_t>(std::llround(config.outlier_fraction * static_cast<double>(plan.batches)));
    const auto share = static_cast<std::size_t>(
        std::llround(config.batch_outlier_share * static_cast<double>(config.batch_size)));
    plan.per_batch = plan.alt_batches == 0 ? 0 : std::clamp<std::size_t>(share, 1, config.batch_size);
    return plan;
}

/// Scores in batch order: non-null batches lead, outliers first within each.
std::vector<double> batch_scores(const ExperimentConfig& config, const MixtureSpec& spec,
                                 const scoring::ScoreModel* model, const BatchPlan& plan,
                                 stats::RandomStream& rng) {
    const std::size_t n_out = plan.alt_batches * plan.per_batch;
    const auto out = draw_scores(config, spec, model, config.signal, n_out, rng);
    const auto inl = draw_scores(config, spec, model, 1.0, config.n_test - n_out, rng);
    std::vector<double> scores;
    scores.reserve(config.n_test);
    std::size_t io = 0;
    std::size_t ii = 0;
    for (std::size_t b = 0; b < plan.batches; ++b) {
        for (std::size_t r = 0; r < config.batch_size; ++r) {
            const bool outlier = b < plan.alt_batches && r < plan.per_batch;
            scores.push_back(outlier ? out[io++] : inl[ii++]);
        }
    }
    return scores;
}

} // namespace

ExperimentReport run_batch_experiment(const ExperimentConfig& config) {
    validate_config(config);
    const auto plan = plan_batches(config, false);
    if (config.uniform_scores && plan.alt_batches > 0 && config.signal != 1.0) {
        throw std::invalid_argument("uniform_scores requires an all-null configuration");
    }
    const stats::RandomStream root(config.seed);
    auto mix_rng = root.split(kMixtureStream);
    const auto spec = make_mixture(config.dim, config.centers, config.box, mix_rng);
    const auto calibrators = make_calibrators(config);
    const double lambda = config.lambda ? *config.lambda : 0.5;

    std::vector<std::size_t> truth(plan.alt_batches);
    std::iota(truth.begin(), truth.end(), std::size_t{0});
    const std::size_t cells = calibrators.size() * config.procedures.size() * config.alphas.size();
    std::vector<std::vector<MetricRow>> per(config.practitioners);

    parallel_for(config.practitioners, config.threads, [&](std::size_t j) {
        const auto prng = root.split(kPractitionerStream).split(j);
        const auto model = config.uniform_scores ? std::nullopt
                                                 : std::optional(fit_scorer(config, spec, prng.split(kTrainStream)));
        const auto* mp = model ? &*model : nullptr;
        auto cal_rng = prng.split(kCalStream);
        const conformal::CalibrationSet cal(draw_scores(config, spec, mp, 1.0, config.n_cal, cal_rng));

        std::vector<double> fdr(cells, 0.0);
        std::vector<double> power(cells, 0.0);
        std::vector<double> batch_p(plan.batches);
        std::vector<double> p(config.n_test);
        for (std::size_t l = 0; l < config.test_sets; ++l) {
            auto trng = prng.split(kFirstTestStream + l);
            const auto scores = batch_scores(config, spec, mp, plan, trng);
            const auto pm = marginal_pvalues(cal, scores);
            std::size_t cell = 0;
            for (const auto& c : calibrators) {
                for (std::size_t i = 0; i < pm.size(); ++i) p[i] = c.map(pm[i]);
                for (std::size_t b = 0; b < plan.batches; ++b) {
                    const std::span<const double> chunk(p.data() + b * config.batch_size, config.batch_size);
                    batch_p[b] = mtest::combined_pvalue(config.global_method, chunk);
                }
                for (const auto& proc : config.procedures) {
                    for (double alpha : config.alphas) {
                        const auto rep = run_procedure(proc, batch_p, alpha, lambda, std::nullopt);
                        const auto met = mtest::fdp_power(rep, truth, plan.batches);
                        fdr[cell] += met.fdp;
                        power[cell] += met.power;
                        ++cell;
                    }
                }
            }
        }
        const double L = static_cast<double>(config.test_sets);
        std::size_t cell = 0;
        for (const auto& c : calibrators) {
            for (const auto& proc : config.procedures) {
                for (double alpha : config.alphas) {
                    per[j].push_back({j, c.name, proc, alpha, fdr[cell] / L, power[cell] / L});
                    ++cell;
                }
            }
        }
    });

    ExperimentReport report;
    report.suite = "batch";
    report.config = config;
    for (auto& rows : per) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    report.summaries = summarize(config, report.rows, config.procedures, config.alphas);
    for (const auto& c : calibrators) {
        if (c.seq) report.sequences.push_back(*c.seq);
    }
    return report;
}

ExperimentReport run_batch_fwer(const ExperimentConfig& config) {
    validate_config(config);
    const auto plan = plan_batches(config, true);
    const stats::RandomStream root(config.seed);
    auto mix_rng = root.split(kMixtureStream);
    const auto spec = make_mixture(config.dim, config.centers, config.box, mix_rng);
    const auto calibrators = make_calibrators(config);

    std::vector<std::vector<MetricRow>> per(config.practitioners);
    parallel_for(config.practitioners, config.threads, [&](std::size_t j) {
        const auto prng = root.split(kPractitionerStream).split(j);
        const auto model = config.uniform_scores ? std::nullopt
                                                 : std::optional(fit_scorer(config, spec, prng.split(kTrainStream)));
        const auto* mp = model ? &*model : nullptr;
        auto cal_rng = prng.split(kCalStream);
        const conformal::CalibrationSet cal(draw_scores(config, spec, mp, 1.0, config.n_cal, cal_rng));

        std::vector<std::size_t> hits(calibrators.size(), 0);
        std::vector<double> p(config.n_test);
        for (std::size_t l = 0; l < config.test_sets; ++l) {
            auto trng = prng.split(kFirstTestStream + l);
            const auto scores = batch_scores(config, spec, mp, plan, trng);
            const auto pm = marginal_pvalues(cal, scores);
            for (std::size_t c = 0; c < calibrators.size(); ++c) {
                for (std::size_t i = 0; i < pm.size(); ++i) p[i] = calibrators[c].map(pm[i]);
                for (std::size_t b = 0; b < plan.batches; ++b) {
                    const std::span<const double> chunk(p.data() + b * config.batch_size, config.batch_size);
                    if (mtest::combined_pvalue(config.global_method, chunk) <= config.fwer_cut) ++hits[c];
                }
            }
        }
        const double total = static_cast<double>(config.test_sets * plan.batches);
        for (std::size_t c = 0; c < calibrators.size(); ++c) {
            per[j].push_back({j, calibrators[c].name, "fwer", config.fwer_cut,
                              static_cast<double>(hits[c]) / total, 0.0});
        }
    });

    ExperimentReport report;
    report.suite = "batch-fwer";
    report.config = config;
    for (auto& rows : per) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    report.summaries = summarize(config, report.rows, {"fwer"}, {config.fwer_cut});
    for (const auto& c : calibrators) {
        if (c.seq) report.sequences.push_back(*c.seq);
    }
    return report;
}

FisherNullResult fisher_null_calibration(std::size_t n, double gamma, double alpha, std::size_t reps,
                                         const stats::RandomStream& rng, unsigned threads) {
    check_gamma(n, gamma);
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    const auto m = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(n)));
    const double md = static_cast<double>(m);
    const double q = stats::chi_square_quantile(2.0 * md, 1.0 - alpha);
    const double root = std::sqrt(1.0 + gamma);
    const auto terms = fisher_terms(n);

    std::vector<unsigned char> plain(reps, 0);
    std::vector<unsigned char> corrected(reps, 0);
    parallel_for(reps, threads, [&](std::size_t r) {
        auto s = rng.split(r);
        const auto cal = stats::uniform_order_stats(n, s);
        const UniformRanks ranks(cal);
        double stat = 0.0;
        for (std::size_t i = 0; i < m; ++i) stat += terms[ranks.count_le(s.uniform())];
        plain[r] = stat >= q;
        corrected[r] = (stat + 2.0 * (root - 1.0) * md) / root >= q;
    });

    FisherNullResult out;
    out.n = n;
    out.m = m;
    out.gamma = gamma;
    out.alpha = alpha;
    out.uncorrected = proportion_estimate(std::accumulate(plain.begin(), plain.end(), std::size_t{0}), reps);
    out.corrected = proportion_estimate(std::accumulate(corrected.begin(), corrected.end(), std::size_t{0}), reps);
    out.limit_uncorrected = stats::normal_sf(stats::normal_quantile(1.0 - alpha) / root);
    return out;
}

ConditionalTypeOneResult fisher_conditional_type1(std::size_t n, double gamma, double alpha,
                                                  std::size_t cal_draws, std::size_t inner_reps,
                                                  const stats::RandomStream& rng, unsigned threads) {
    check_gamma(n, gamma);
    if (cal_draws == 0 || inner_reps == 0) throw std::invalid_argument("need positive draw counts");
    const auto m = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(n)));
    const double q = stats::chi_square_quantile(2.0 * static_cast<double>(m), 1.0 - alpha);
    const auto terms = fisher_terms(n);

    ConditionalTypeOneResult out;
    out.inner_reps = inner_reps;
    out.rates.assign(cal_draws, 0.0);
    parallel_for(cal_draws, threads, [&](std::size_t c) {
        const auto base = rng.split(c);
        auto cs = base.split(0);
        const auto cal = stats::uniform_order_stats(n, cs);
        const UniformRanks ranks(cal);
        std::size_t hits = 0;
        for (std::size_t r = 0; r < inner_reps; ++r) {
            auto s = base.split(r + 1);
            double stat = 0.0;
            for (std::size_t i = 0; i < m; ++i) stat += terms[ranks.count_le(s.uniform())];
            hits += stat >= q ? 1 : 0;
        }
        out.rates[c] = static_cast<double>(hits) / static_cast<double>(inner_reps);
    });
    out.q90 = quantile(out.rates, 0.9);
    out.q90_se = quantile_se(out.rates, 0.9);
    out.mean = mean_of(out.rates);
    return out;
}

CorrelationResult correlation_check(std::size_t n, std::size_t reps,
                                           const std::function<double(double)>& transform,
                                           const stats::RandomStream& rng, bool independent, unsigned threads) {
    if (n == 0 || reps < 3) throw std::invalid_argument("need n >= 1 and reps >= 3");
    std::vector<double> x(reps);
    std::vector<double> y(reps);
    const double denom = static_cast<double>(n + 1);
    parallel_for(reps, threads, [&](std::size_t r) {
        auto s = rng.split(r);
        std::vector<double> cal(n);
        for (auto& v : cal) v = s.uniform();
        const double u1 = s.uniform();
        const double u2 = s.uniform();
        if (independent) {
            std::vector<double> cal2(n);
            for (auto& v : cal2) v = s.uniform();
            const auto j1 = std::count_if(cal.begin(), cal.end(), [u1](double v) { return v <= u1; });
            const auto j2 = std::count_if(cal2.begin(), cal2.end(), [u2](double v) { return v <= u2; });
            x[r] = transform((1.0 + static_cast<double>(j1)) / denom);
            y[r] = transform((1.0 + static_cast<double>(j2)) / denom);
            return;
        }
        const auto j1 = std::count_if(cal.begin(), cal.end(), [u1](double v) { return v <= u1; });
        const auto j2 = std::count_if(cal.begin(), cal.end(), [u2](double v) { return v <= u2; });
        x[r] = transform((1.0 + static_cast<double>(j1)) / denom);
        y[r] = transform((1.0 + static_cast<double>(j2)) / denom);
    });
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        sxy += (x[r] - mx) * (y[r] - my);
        sxx += (x[r] - mx) * (x[r] - mx);
        syy += (y[r] - my) * (y[r] - my);
    }
    const double corr = sxy / std::sqrt(sxx * syy);
    CorrelationResult out;
    out.correlation = {corr, (1.0 - corr * corr) / std::sqrt(static_cast<double>(reps - 1)), reps};
    out.target = independent ? 0.0 : 1.0 / static_cast<double>(n + 2);
    return out;
}

BetaCheckResult fpr_beta_check(std::size_t n, double alpha, std::size_t reps, const stats::RandomStream& rng,
                               unsigned threads) {
    if (reps < 2) throw std::invalid_argument("need reps >= 2");
    const double scaled = static_cast<double>(n + 1) * alpha;
    const auto ell = static_cast<std::size_t>(std::floor(scaled + 1e-9));
    if (!(alpha > 0.0 && alpha < 1.0) || ell == 0) {
        throw std::invalid_argument("fpr_beta_check: floor((n+1) alpha) must be >= 1");
    }
    BetaCheckResult out;
    out.ell = ell;
    out.beta_a = static_cast<double>(ell);
    out.beta_b = static_cast<double>(n + 1 - ell);
    out.samples.assign(reps, 0.0);
    parallel_for(reps, threads, [&](std::size_t r) {
        auto s = rng.split(r);
        const auto cal = stats::uniform_order_stats(n, s);
        out.samples[r] = cal[ell - 1];
    });
    out.mean = mean_of(out.samples);
    out.mean_se = se_of(out.samples, out.mean);
    out.sd = out.mean_se * std::sqrt(static_cast<double>(reps));
    const double a = out.beta_a;
    const double b = out.beta_b;
    const auto ks = stats::ks_test(out.samples, [a, b](double x) { return stats::beta_cdf(a, b, x); });
    out.ks_statistic = ks.statistic;
    out.ks_pvalue = ks.p_value;
    out.pass = ks.p_value > 0.01;
    return out;
}

FdrCheckResult conformal_fdr_check(std::size_t n_cal, std::size_t m, std::size_t nulls, double alpha,
                                   const std::string& procedure, std::optional<double> lambda,
                                   std::size_t reps, const stats::RandomStream& rng, unsigned threads) {
    if (n_cal == 0 || m == 0 || nulls > m || reps < 2) throw std::invalid_argument("conformal_fdr_check: bad sizes");
    const double lam = lambda ? *lambda : mtest::storey_default_lambda(n_cal);
    const std::size_t outliers = m - nulls;
    std::vector<std::size_t> truth(outliers);
    std::iota(truth.begin(), truth.end(), std::size_t{0});
    std::vector<double> fdp(reps);
    std::vector<double> pow(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
        auto s = rng.split(r);
        std::vector<double> raw(n_cal);
        for (auto& v : raw) v = s.uniform();
        const conformal::CalibrationSet cal(std::move(raw));
        std::vector<double> p(m);
        for (std::size_t i = 0; i < m; ++i) {
            // Outliers sit below the whole calibration set.
            const double score = i < outliers ? -1.0 : s.uniform();
            p[i] = conformal::marginal_pvalue(cal, score);
        }
        const auto rep = run_procedure(procedure, p, alpha, lam, n_cal);
        const auto met = mtest::fdp_power(rep, truth, m);
        fdp[r] = met.fdp;
        pow[r] = met.power;
    });
    FdrCheckResult out;
    out.m = m;
    out.nulls = nulls;
    const double mf = mean_of(fdp);
    const double mp = mean_of(pow);
    out.fdr = {mf, se_of(fdp, mf), reps};
    out.power = {mp, se_of(pow, mp), reps};
    return out;
}

CoverageEventResult coverage_event_check(const adjust::AdjustmentSequence& seq, std::size_t draws,
                                         const stats::RandomStream& rng) {
    adjust::validate_sequence(seq);
    std::size_t hits = 0;
    std::vector<double> u(seq.n);
    for (std::size_t d = 0; d < draws; ++d) {
        auto s = rng.split(d);
        for (auto& v : u) v = s.uniform();
        std::sort(u.begin(), u.end());
        bool ok = true;
        for (std::size_t i = 0; i < seq.n && ok; ++i) ok = u[i] <= seq.b[i];
        hits += ok ? 1 : 0;
    }
    return {proportion_estimate(hits, draws), adjust::to_string(seq.method)};
}

double needle_effective_level(const adjust::AdjustmentSequence& seq, std::size_t m, double alpha) {
    if (m == 0) throw std::invalid_argument("needle_effective_level: m must be positive");
    const double shift = seq.at(1) - 1.0 / static_cast<double>(seq.n + 1);
    return std::max(0.0, alpha - static_cast<double>(m) * shift);
}

std::vector<PowerCurveRow> power_curves(const PowerCurveConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (config.ns.empty() || config.methods.empty()) throw std::invalid_argument("empty power-curve grid");
    const stats::RandomStream root(config.seed);
    std::vector<PowerCurveRow> rows;
    for (std::size_t gi = 0; gi < config.ns.size(); ++gi) {
        const std::size_t n = config.ns[gi];
        if (n < 3) throw std::invalid_argument("power_curves: n must be >= 3");
        const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n)))));
        const auto grid_rng = root.split(gi);

        std::vector<adjust::AdjustmentSequence> seqs;
        for (const auto& name : config.methods) {
            adjust::BuildOptions opts;
            opts.k = config.simes_k;
            opts.reps = config.mc_reps;
            opts.seed = grid_rng.split(0).next_u64();
            opts.threads = config.threads;
            seqs.push_back(adjust::build(adjust::method_from_string(name), n, config.delta, opts));
        }
        for (const auto& seq : seqs) {
            rows.push_back({n, m, adjust::to_string(seq.method), "single", adjust::effective_level(seq, config.alpha), 0.0});
        }
        for (const auto& seq : seqs) {
            rows.push_back({n, m, adjust::to_string(seq.method), "needle", needle_effective_level(seq, m, config.alpha), 0.0});
        }

        // Fisher on h(p) under the global null; the matched marginal level is the
        // rejection rate's quantile of the marginal combined p-values, same replicates.
        const std::size_t reps = config.fisher_reps;
        const double q = stats::chi_square_quantile(2.0 * static_cast<double>(m), 1.0 - config.alpha);
        std::vector<double> marginal_p(reps);
        std::vector<std::vector<unsigned char>> reject(seqs.size(), std::vector<unsigned char>(reps, 0));
        std::vector<std::vector<double>> adj_terms(seqs.size(), std::vector<double>(n + 1));
        for (std::size_t k = 0; k < seqs.size(); ++k) {
            for (std::size_t j = 0; j <= n; ++j) adj_terms[k][j] = -2.0 * std::log(seqs[k].at(j + 1));
        }
        const auto terms = fisher_terms(n);
        const auto mc_rng = grid_rng.split(1);
        parallel_for(reps, config.threads, [&](std::size_t r) {
            auto s = mc_rng.split(r);
            const auto cal = stats::uniform_order_stats(n, s);
            const UniformRanks ranks(cal);
            std::vector<double> stat(seqs.size(), 0.0);
            double mstat = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t j = ranks.count_le(s.uniform());
                mstat += terms[j];
                for (std::size_t k = 0; k < seqs.size(); ++k) stat[k] += adj_terms[k][j];
            }
            marginal_p[r] = stats::chi_square_sf(mstat, 2.0 * static_cast<double>(m));
            for (std::size_t k = 0; k < seqs.size(); ++k) reject[k][r] = stat[k] >= q;
        });
        for (std::size_t k = 0; k < seqs.size(); ++k) {
            const auto hits = std::accumulate(reject[k].begin(), reject[k].end(), std::size_t{0});
            const auto rate = proportion_estimate(hits, reps);
            const double level = hits == 0 ? 0.0 : quantile(marginal_p, rate.value);
            rows.push_back({n, m, adjust::to_string(seqs[k].method), "fisher", level, rate.se});
        }
    }
    return rows;
}

} // namespace ccv::sim
