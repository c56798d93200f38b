#ifndef CCV_SIM_EXPERIMENTS_HPP
#define CCV_SIM_EXPERIMENTS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccv/adjust.hpp"
#include "ccv/core/estimate.hpp"
#include "ccv/core/random.hpp"
#include "ccv/mtest.hpp"
#include "ccv/scoring.hpp"

namespace ccv::sim {

/*
 * Protocol for the simulated outlier experiments. J practitioners each get
 * their own training and calibration draws; each then scores L test sets.
 * Per-practitioner metrics average over the L test sets; marginal metrics
 * average over practitioners.
 */
struct ExperimentConfig {
    std::size_t practitioners = 25;  // J
    std::size_t test_sets = 25;      // L
    std::size_t n_train = 1000;
    std::size_t n_cal = 1000;
    std::size_t n_test = 1000;
    double outlier_fraction = 0.1;   // outlier experiment: share of outliers; batch: share of non-null batches
    double signal = 1.75;            // a for outliers; inliers always use a = 1

    std::size_t dim = 50;
    std::size_t centers = 50;
    double box = 3.0;

    scoring::ScorerKind scorer = scoring::ScorerKind::oracle_mixture;
    std::size_t knn_k = 10;
    double ridge = 1e-6;

    // "marginal" or any adjustment name.
    std::vector<std::string> methods{"marginal", "simes", "asymptotic", "monte-carlo"};
    std::vector<std::string> procedures{"bh", "storey-bh"};
    double delta = 0.1;
    std::vector<double> alphas{0.1};
    std::optional<double> lambda;    // Storey; default is the on-grid value nearest 1/2
    std::size_t simes_k = 0;         // 0 = (n+1)/2
    std::size_t mc_reps = 10000;

    std::size_t batch_size = 10;
    double batch_outlier_share = 0.5;
    mtest::GlobalMethod global_method = mtest::GlobalMethod::fisher;
    double fwer_cut = 0.1;
    // All-null runs only: scores drawn Unif(0,1) directly. Conformal p-values
    // depend on scores through ranks alone, so any continuous scorer gives the same law.
    bool uniform_scores = false;

    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Throws std::invalid_argument naming the first bad field.
void validate_config(const ExperimentConfig& config);

/// One per (practitioner, method, procedure, alpha).
struct MetricRow {
    std::size_t practitioner;
    std::string method;
    std::string procedure;
    double alpha;
    double fdr;    // conditional FDR estimate: mean FDP over the L test sets
    double power;
};

struct MetricSummary {
    std::string method;
    std::string procedure;
    double alpha;
    double mfdr;          // mean of per-practitioner FDR
    double mfdr_se;
    double mpower;
    double mpower_se;
    double fdr_q90;       // 90th percentile of per-practitioner FDR
    double fdr_q90_se;
    double frac_fdr_le_alpha;
};

struct ExperimentReport {
    std::string suite;
    ExperimentConfig config;
    std::vector<MetricRow> rows;
    std::vector<MetricSummary> summaries;
    std::vector<adjust::AdjustmentSequence> sequences;  // one per conditional method, in method order
};

ExperimentReport run_outlier_experiment(const ExperimentConfig& config);

/// Batch-level testing: combine p-values per batch, then run the procedures across batches.
ExperimentReport run_batch_experiment(const ExperimentConfig& config);

/*
 * All-null batches; a batch is flagged when its combined p-value is <= fwer_cut.
 * Rows carry the per-practitioner rejection rate in the fdr column (every
 * rejection is false) and zero power; procedure is "fwer".
 */
ExperimentReport run_batch_fwer(const ExperimentConfig& config);

/// Empirical quantile, linear interpolation between order statistics (numpy's default).
double quantile(std::vector<double> values, double q);

/// Rough s.e. of the q-quantile from the spread of the order statistics at q +/- sqrt(q(1-q)/n).
double quantile_se(std::vector<double> values, double q);

struct FisherNullResult {
    McEstimate uncorrected;
    McEstimate corrected;
    std::size_t n = 0;
    std::size_t m = 0;
    double gamma = 0.0;
    double alpha = 0.0;
    double limit_uncorrected = 0.0;  // Phi-bar(z_{1-alpha} / sqrt(1+gamma))
};

/// Marginal type-I error of Fisher's test on m = floor(gamma n) null conformal p-values.
FisherNullResult fisher_null_calibration(std::size_t n, double gamma, double alpha, std::size_t reps,
                                         const stats::RandomStream& rng, unsigned threads = 1);

struct ConditionalTypeOneResult {
    std::vector<double> rates;   // conditional type-I error per calibration draw
    double q90 = 0.0;
    double q90_se = 0.0;
    double mean = 0.0;
    std::size_t inner_reps = 0;
};

/// Fisher type-I error given the calibration set, estimated by inner MC for each of cal_draws sets.
ConditionalTypeOneResult fisher_conditional_type1(std::size_t n, double gamma, double alpha,
                                                  std::size_t cal_draws, std::size_t inner_reps,
                                                  const stats::RandomStream& rng, unsigned threads = 1);

struct CorrelationResult {
    McEstimate correlation;
    double target = 0.0;  // 1/(n+2), or 0 for independent calibration sets
};

/// MC correlation of G(p1), G(p2) for two null p-values sharing (or not) a calibration set.
CorrelationResult correlation_check(std::size_t n, std::size_t reps,
                                           const std::function<double(double)>& transform,
                                           const stats::RandomStream& rng, bool independent = false,
                                           unsigned threads = 1);

struct BetaCheckResult {
    std::size_t ell = 0;
    double beta_a = 0.0;
    double beta_b = 0.0;
    std::vector<double> samples;  // conditional FPR per calibration draw
    double mean = 0.0;
    double mean_se = 0.0;
    double sd = 0.0;
    double ks_statistic = 0.0;
    double ks_pvalue = 0.0;
    bool pass = false;            // KS not rejected at 1%
};

/// Conditional FPR of the marginal level-alpha test, F(S_(ell)) = S_(ell) under uniform scores.
BetaCheckResult fpr_beta_check(std::size_t n, double alpha, std::size_t reps, const stats::RandomStream& rng,
                               unsigned threads = 1);

struct FdrCheckResult {
    McEstimate fdr;      // mean FDP with its s.e.
    McEstimate power;
    std::size_t m = 0;
    std::size_t nulls = 0;
};

/*
 * Marginal FDR of BH or Storey-BH on marginal conformal p-values: each
 * replicate draws a fresh calibration set and m test points, the first
 * m - nulls of which are outliers scoring below every calibration point.
 */
FdrCheckResult conformal_fdr_check(std::size_t n_cal, std::size_t m, std::size_t nulls, double alpha,
                                   const std::string& procedure, std::optional<double> lambda,
                                   std::size_t reps, const stats::RandomStream& rng, unsigned threads = 1);

struct CoverageEventResult {
    McEstimate frequency;  // P[U_(i) <= b_i for all i] over calibration draws
    std::string method;
};

/// Frequency of the simultaneous event over calibration draws of uniform scores.
CoverageEventResult coverage_event_check(const adjust::AdjustmentSequence& seq, std::size_t draws,
                                         const stats::RandomStream& rng);

struct PowerCurveRow {
    std::size_t n;
    std::size_t m;
    std::string method;
    std::string setting;   // single, needle, fisher
    double effective_level;
    double se;             // 0 for closed forms
};

struct PowerCurveConfig {
    std::vector<std::size_t> ns{100, 300, 1000, 3000, 10000};
    double alpha = 0.05;
    double delta = 0.1;
    std::vector<std::string> methods{"simes", "dkwm", "asymptotic", "monte-carlo"};
    std::size_t fisher_reps = 10000;
    std::size_t mc_reps = 10000;
    std::size_t simes_k = 0;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// m = round(sqrt(n)) per setting; Fisher levels by MC with common random numbers across methods.
std::vector<PowerCurveRow> power_curves(const PowerCurveConfig& config);

/// max(0, alpha - m (b_1 - 1/(n+1))): needle-in-a-haystack Bonferroni level on the marginal scale.
double needle_effective_level(const adjust::AdjustmentSequence& seq, std::size_t m, double alpha);

} // namespace ccv::sim

#endif // CCV_SIM_EXPERIMENTS_HPP
