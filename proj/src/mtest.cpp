#include "ccv/mtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ccv/core/special.hpp"

namespace ccv::mtest {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1)");
    }
}

void check_pvalues(std::span<const double> p) {
    if (p.empty()) {
        throw std::invalid_argument("empty p-value vector");
    }
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("p-values must lie in [0, 1]");
        }
    }
}

void check_positive(std::span<const double> p, const char* who) {
    for (double v : p) {
        if (!(v > 0.0)) {
            throw std::invalid_argument(std::string(who) + ": p-values must be positive");
        }
    }
}

// Step-up over the candidates (indices into p) at per-rank slope `level / m`.
RejectionReport step_up(std::span<const double> p, std::vector<std::size_t> candidates, double level,
                        std::size_t m) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::size_t r = 0;
    for (std::size_t rank = candidates.size(); rank >= 1; --rank) {
        if (p[candidates[rank - 1]] <= static_cast<double>(rank) * level / static_cast<double>(m)) {
            r = rank;
            break;
        }
    }
    RejectionReport rep;
    if (r > 0) {
        const double crit = p[candidates[r - 1]];
        rep.critical_value = crit;
        for (std::size_t idx : candidates) {
            if (p[idx] <= crit) rep.rejected.push_back(idx);
        }
        std::sort(rep.rejected.begin(), rep.rejected.end());
    }
    return rep;
}

} // namespace

RejectionReport bh(std::span<const double> p, double alpha) {
    check_alpha(alpha);
    check_pvalues(p);
    std::vector<std::size_t> all(p.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    auto rep = step_up(p, std::move(all), alpha, p.size());
    rep.procedure = "bh";
    rep.alpha = alpha;
    return rep;
}

double storey_pi0(std::span<const double> p, double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw std::invalid_argument("lambda must lie in (0, 1)");
    }
    check_pvalues(p);
    const auto above = std::count_if(p.begin(), p.end(), [lambda](double v) { return v > lambda; });
    return (1.0 + static_cast<double>(above)) / (static_cast<double>(p.size()) * (1.0 - lambda));
}

double storey_default_lambda(std::size_t n) {
    const double np1 = static_cast<double>(n + 1);
    return std::round(0.5 * np1) / np1;
}

bool lambda_on_grid(double lambda, std::size_t n) {
    const double scaled = lambda * static_cast<double>(n + 1);
    return std::fabs(scaled - std::round(scaled)) < 1e-9 * std::max(1.0, scaled);
}

RejectionReport storey_bh(std::span<const double> p, double alpha, double lambda,
                          std::optional<std::size_t> conformal_n) {
    check_alpha(alpha);
    const double pi0 = storey_pi0(p, lambda);
    std::vector<std::size_t> below;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < lambda) below.push_back(i);
    }
    // BH at alpha / pi0 over all m p-values, restricted to p_i < lambda. Values
    // >= lambda cannot be rejected, so ranking only the candidates is equivalent.
    auto rep = step_up(p, std::move(below), alpha / pi0, p.size());
    rep.procedure = "storey-bh";
    rep.alpha = alpha;
    rep.lambda = lambda;
    rep.pi0 = pi0;
    if (conformal_n && !lambda_on_grid(lambda, *conformal_n)) {
        rep.warning = true;
        rep.note = "lambda is not on the grid K/(n+1); the finite-sample FDR guarantee does not apply";
    }
    return rep;
}

double fisher_pvalue(std::span<const double> p) {
    check_pvalues(p);
    check_positive(p, "fisher");
    double stat = 0.0;
    for (double v : p) stat -= 2.0 * std::log(v);
    return stats::chi_square_sf(stat, 2.0 * static_cast<double>(p.size()));
}

GlobalTestResult fisher_test(std::span<const double> p, double alpha) {
    check_alpha(alpha);
    check_pvalues(p);
    check_positive(p, "fisher");
    GlobalTestResult res;
    res.procedure = "fisher";
    for (double v : p) res.statistic -= 2.0 * std::log(v);
    const double df = 2.0 * static_cast<double>(p.size());
    res.threshold = stats::chi_square_quantile(df, 1.0 - alpha);
    res.reject = res.statistic >= res.threshold;
    res.combined_p = stats::chi_square_sf(res.statistic, df);
    return res;
}

GlobalTestResult fisher_corrected_test(std::span<const double> p, double alpha, double gamma) {
    if (!(gamma >= 0.0)) {
        throw std::invalid_argument("gamma must be nonnegative");
    }
    auto res = fisher_test(p, alpha);
    res.procedure = "fisher-corrected";
    const double root = std::sqrt(1.0 + gamma);
    const double m = static_cast<double>(p.size());
    res.statistic = (res.statistic + 2.0 * (root - 1.0) * m) / root;
    res.reject = res.statistic >= res.threshold;
    res.combined_p = stats::chi_square_sf(res.statistic, 2.0 * m);
    return res;
}

double stouffer_pvalue(std::span<const double> p) {
    check_pvalues(p);
    double z = 0.0;
    for (double v : p) {
        if (!(v > 0.0 && v < 1.0)) {
            throw std::invalid_argument("stouffer: p-values must lie strictly inside (0, 1)");
        }
        z -= stats::normal_quantile(v);
    }
    return stats::normal_sf(z / std::sqrt(static_cast<double>(p.size())));
}

double simes_global_pvalue(std::span<const double> p) {
    check_pvalues(p);
    std::vector<double> s(p.begin(), p.end());
    std::sort(s.begin(), s.end());
    const double m = static_cast<double>(s.size());
    double best = 1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        best = std::min(best, m * s[i] / static_cast<double>(i + 1));
    }
    return best;
}

double harmonic_mean_pvalue(std::span<const double> p) {
    check_pvalues(p);
    check_positive(p, "harmonic mean");
    double inv = 0.0;
    for (double v : p) inv += 1.0 / v;
    return std::min(1.0, static_cast<double>(p.size()) / inv);
}

std::string to_string(GlobalMethod method) {
    switch (method) {
    case GlobalMethod::fisher: return "fisher";
    case GlobalMethod::fisher_corrected: return "fisher-corrected";
    case GlobalMethod::stouffer: return "stouffer";
    case GlobalMethod::simes: return "simes-global";
    case GlobalMethod::harmonic: return "harmonic";
    }
    return "unknown";
}

GlobalMethod global_method_from_string(const std::string& name) {
    if (name == "fisher") return GlobalMethod::fisher;
    if (name == "fisher-corrected") return GlobalMethod::fisher_corrected;
    if (name == "stouffer") return GlobalMethod::stouffer;
    if (name == "simes-global" || name == "simes") return GlobalMethod::simes;
    if (name == "harmonic") return GlobalMethod::harmonic;
    throw std::invalid_argument("unknown global test: " + name);
}

double combined_pvalue(GlobalMethod method, std::span<const double> p, double gamma) {
    switch (method) {
    case GlobalMethod::fisher: return fisher_pvalue(p);
    case GlobalMethod::fisher_corrected: return *fisher_corrected_test(p, 0.5, gamma).combined_p;
    case GlobalMethod::stouffer: return stouffer_pvalue(p);
    case GlobalMethod::simes: return simes_global_pvalue(p);
    case GlobalMethod::harmonic: return harmonic_mean_pvalue(p);
    }
    throw std::invalid_argument("unknown global test");
}

GlobalTestResult global_test(GlobalMethod method, std::span<const double> p, double alpha, double gamma) {
    if (method == GlobalMethod::fisher) return fisher_test(p, alpha);
    if (method == GlobalMethod::fisher_corrected) return fisher_corrected_test(p, alpha, gamma);
    check_alpha(alpha);
    GlobalTestResult res;
    res.procedure = to_string(method);
    res.combined_p = combined_pvalue(method, p, gamma);
    res.statistic = *res.combined_p;
    res.threshold = alpha;
    res.reject = *res.combined_p <= alpha;
    if (method == GlobalMethod::harmonic) {
        res.approximate = true;
        res.note = "raw harmonic mean used as the combined p-value (no Landau-tail correction)";
    }
    return res;
}

ErrorMetrics fdp_power(const RejectionReport& report, std::span<const std::size_t> truth, std::size_t m) {
    std::vector<char> outlier(m, 0);
    for (std::size_t t : truth) {
        if (t >= m) throw std::invalid_argument("fdp_power: truth index out of range");
        outlier[t] = 1;
    }
    std::size_t true_pos = 0;
    for (std::size_t r : report.rejected) {
        if (r >= m) throw std::invalid_argument("fdp_power: rejected index out of range");
        true_pos += outlier[r] ? 1 : 0;
    }
    const std::size_t n_true = static_cast<std::size_t>(std::count(outlier.begin(), outlier.end(), 1));
    const std::size_t n_rej = report.rejected.size();
    ErrorMetrics out;
    out.fdp = static_cast<double>(n_rej - true_pos) / static_cast<double>(std::max<std::size_t>(1, n_rej));
    out.power = static_cast<double>(true_pos) / static_cast<double>(std::max<std::size_t>(1, n_true));
    return out;
}

void attach_metrics(RejectionReport& report, std::span<const std::size_t> truth, std::size_t m) {
    const auto e = fdp_power(report, truth, m);
    report.fdp = e.fdp;
    report.power = e.power;
}

} // namespace ccv::mtest
