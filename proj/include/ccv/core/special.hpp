#ifndef CCV_CORE_SPECIAL_HPP
#define CCV_CORE_SPECIAL_HPP

#include <cstddef>
#include <functional>
#include <span>

namespace ccv::stats {

/*
 * Special functions used across the library. Everything here is computed from
 * series and continued fractions in this file rather than from the platform
 * math library, so results are reproducible across toolchains. Only exp/log/
 * sqrt/pow from <cmath> are used.
 *
 * Domain violations throw std::domain_error.
 */

/// log Gamma(x) for x > 0; shifted Stirling series, relative error ~1e-16.
double log_gamma(double x);

/// log of the binomial coefficient C(n, k).
double log_binomial(double n, double k);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), accurate in the upper tail.
double gamma_q(double a, double x);

double normal_cdf(double x);
double normal_sf(double x);
double normal_pdf(double x);
/// Inverse of normal_cdf on (0, 1); absolute error well below 1e-9.
double normal_quantile(double p);

double chi_square_cdf(double x, double df);
double chi_square_sf(double x, double df);
/// Value q with chi_square_cdf(q, df) = p; relative error <= 1e-8.
double chi_square_quantile(double df, double p);

/// Regularized incomplete beta I_x(a, b).
double beta_cdf(double a, double b, double x);

/// Kolmogorov limiting survival function P(K > lambda).
double kolmogorov_sf(double lambda);

struct KsResult {
    double statistic;
    double p_value;
};

/// One-sample KS test of a sample against a continuous CDF. Sample need not be sorted.
KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf);

} // namespace ccv::stats

#endif // CCV_CORE_SPECIAL_HPP
