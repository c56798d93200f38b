#ifndef CCV_MTEST_HPP
#define CCV_MTEST_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ccv::mtest {

/// Indices are 0-based positions in the input p-value vector.
struct RejectionReport {
    std::vector<std::size_t> rejected;  // ascending
    std::string procedure;
    double alpha = 0.0;
    std::optional<double> lambda;
    std::optional<double> pi0;
    double critical_value = 0.0;        // largest rejected p-value, 0 when nothing is rejected
    std::optional<double> fdp;
    std::optional<double> power;
    bool warning = false;
    std::string note;
};

struct GlobalTestResult {
    std::string procedure;
    double statistic = 0.0;
    double threshold = 0.0;
    bool reject = false;
    std::optional<double> combined_p;
    bool approximate = false;
    std::string note;
};

/// Benjamini-Hochberg step-up: rejects every p <= p_(r), r = max{r : p_(r) <= r alpha / m}.
RejectionReport bh(std::span<const double> p, double alpha);

/// (1 + #{p_i > lambda}) / (m (1 - lambda)); may exceed 1.
double storey_pi0(std::span<const double> p, double lambda);

/// round((n+1)/2)/(n+1): the on-grid lambda closest to 1/2 for calibration size n.
double storey_default_lambda(std::size_t n);

/// True when lambda (n + 1) is an integer.
bool lambda_on_grid(double lambda, std::size_t n);

/*
 * BH at level alpha / pi0_hat, keeping only p_i < lambda. Pass the
 * calibration size for conformal p-values; an off-grid lambda then sets the
 * warning flag.
 */
RejectionReport storey_bh(std::span<const double> p, double alpha, double lambda,
                          std::optional<std::size_t> conformal_n = std::nullopt);

/// Rejects when -2 sum log p_i >= chi2(2m; 1 - alpha).
GlobalTestResult fisher_test(std::span<const double> p, double alpha);

/// Rejects when (stat + 2(sqrt(1+gamma) - 1) m) / sqrt(1+gamma) >= chi2(2m; 1 - alpha).
GlobalTestResult fisher_corrected_test(std::span<const double> p, double alpha, double gamma);

/// chi-square(2m) survival function at -2 sum log p_i.
double fisher_pvalue(std::span<const double> p);
double stouffer_pvalue(std::span<const double> p);
double simes_global_pvalue(std::span<const double> p);
/// Raw harmonic mean m / sum(1/p_i), capped at 1. Slightly anti-conservative.
double harmonic_mean_pvalue(std::span<const double> p);

enum class GlobalMethod { fisher, fisher_corrected, stouffer, simes, harmonic };
std::string to_string(GlobalMethod method);
GlobalMethod global_method_from_string(const std::string& name);

/// Combined p-value for any global method; fisher_corrected maps the corrected
/// statistic through the chi-square(2m) tail.
double combined_pvalue(GlobalMethod method, std::span<const double> p, double gamma = 0.0);

/// Dispatch; p-value methods reject when the combined p-value is <= alpha.
GlobalTestResult global_test(GlobalMethod method, std::span<const double> p, double alpha, double gamma = 0.0);

struct ErrorMetrics {
    double fdp = 0.0;
    double power = 0.0;
};

/// fdp = |R \ truth| / max(1, |R|), power = |R & truth| / max(1, |truth|). truth holds 0-based indices < m.
ErrorMetrics fdp_power(const RejectionReport& report, std::span<const std::size_t> truth, std::size_t m);

/// Same, filling report.fdp and report.power.
void attach_metrics(RejectionReport& report, std::span<const std::size_t> truth, std::size_t m);

} // namespace ccv::mtest

#endif // CCV_MTEST_HPP
