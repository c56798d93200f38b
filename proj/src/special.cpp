#include "ccv/core/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccv::stats {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 200000;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

[[noreturn]] void domain_fail(const char* what) {
    throw std::domain_error(std::string(what));
}

// Stirling remainder lgamma(x) - [(x - 1/2) log x - x + log sqrt(2 pi)] for x >= 15.
double stirling_tail(double x) {
    const double r = 1.0 / x;
    const double r2 = r * r;
    return r * (1.0 / 12.0 +
                r2 * (-1.0 / 360.0 +
                      r2 * (1.0 / 1260.0 +
                            r2 * (-1.0 / 1680.0 +
                                  r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360360.0 + r2 * (1.0 / 156.0)))))));
}

double stirling_correction(double x) {
    if (x >= 15.0) {
        return stirling_tail(x);
    }
    return log_gamma(x) - ((x - 0.5) * std::log(x) - x + kHalfLog2Pi);
}

// log1p(t) - t without cancellation near zero.
double log1p_minus(double t) {
    if (std::fabs(t) < 0.1) {
        double power = t * t;
        double sum = 0.0;
        for (int k = 2; k < 40; ++k) {
            const double add = (k % 2 == 0 ? -power : power) / k;
            sum += add;
            if (std::fabs(add) < kEps * std::fabs(sum)) {
                break;
            }
            power *= t;
        }
        return sum;
    }
    return std::log1p(t) - t;
}

// log of x^a e^{-x} / Gamma(a), the common prefactor of P and Q.
double gamma_log_prefactor(double a, double x) {
    const double t = (x - a) / a;
    if (t < -0.5) {
        // Far below the mode log1p(t) would lose x entirely; the direct form is exact enough.
        return a * std::log(x) - x - log_gamma(a);
    }
    return a * log1p_minus(t) + 0.5 * std::log(a) - kHalfLog2Pi - stirling_correction(a);
}

double gamma_series(double a, double x) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < kMaxIterations; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) {
            return sum * std::exp(gamma_log_prefactor(a, x));
        }
    }
    throw std::runtime_error("gamma series failed to converge");
}

double gamma_continued_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) {
            return std::exp(gamma_log_prefactor(a, x)) * h;
        }
    }
    throw std::runtime_error("gamma continued fraction failed to converge");
}

double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m < kMaxIterations; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) {
            return h;
        }
    }
    throw std::runtime_error("beta continued fraction failed to converge");
}

} // namespace

double log_gamma(double x) {
    if (!(x > 0.0) || std::isinf(x)) {
        domain_fail("log_gamma: argument must be positive and finite");
    }
    double shift = 1.0;
    while (x < 15.0) {
        shift *= x;
        x += 1.0;
    }
    return (x - 0.5) * std::log(x) - x + kHalfLog2Pi + stirling_tail(x) - std::log(shift);
}

double log_binomial(double n, double k) {
    if (k < 0.0 || k > n) {
        domain_fail("log_binomial: k outside [0, n]");
    }
    return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

double gamma_p(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0)) {
        domain_fail("gamma_p: requires a > 0, x >= 0");
    }
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) {
        return gamma_series(a, x);
    }
    return 1.0 - gamma_continued_fraction(a, x);
}

double gamma_q(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0)) {
        domain_fail("gamma_q: requires a > 0, x >= 0");
    }
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) {
        return 1.0 - gamma_series(a, x);
    }
    return gamma_continued_fraction(a, x);
}

double normal_cdf(double x) {
    if (std::isnan(x)) domain_fail("normal_cdf: NaN");
    if (x < 0.0) {
        return 0.5 * gamma_q(0.5, 0.5 * x * x);
    }
    return 0.5 + 0.5 * gamma_p(0.5, 0.5 * x * x);
}

double normal_sf(double x) {
    return normal_cdf(-x);
}

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x - kHalfLog2Pi);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        domain_fail("normal_quantile: p must lie in (0, 1)");
    }
    if (p == 0.5) return 0.0;
    if (p > 0.5) {
        return -normal_quantile(1.0 - p);
    }
    // Lower tail. Start from Abramowitz-Stegun 26.2.23, polish with Newton on log Phi.
    const double t = std::sqrt(-2.0 * std::log(p));
    double x = -(t - (2.515517 + t * (0.802853 + t * 0.010328)) /
                         (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308))));
    const double log_p = std::log(p);
    for (int iter = 0; iter < 100; ++iter) {
        const double cdf = normal_cdf(x);
        const double step = (std::log(cdf) - log_p) * cdf / normal_pdf(x);
        x -= step;
        if (std::fabs(step) <= 1e-15 * std::max(1.0, std::fabs(x))) {
            break;
        }
    }
    return x;
}

double chi_square_cdf(double x, double df) {
    if (!(df > 0.0)) domain_fail("chi_square_cdf: df must be positive");
    if (x <= 0.0) return 0.0;
    return gamma_p(0.5 * df, 0.5 * x);
}

double chi_square_sf(double x, double df) {
    if (!(df > 0.0)) domain_fail("chi_square_sf: df must be positive");
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * df, 0.5 * x);
}

double chi_square_quantile(double df, double p) {
    if (!(df > 0.0)) domain_fail("chi_square_quantile: df must be positive");
    if (!(p > 0.0 && p < 1.0)) domain_fail("chi_square_quantile: p must lie in (0, 1)");

    const double a = 0.5 * df;
    const bool upper = p > 0.5;
    const double log_target = std::log(upper ? 1.0 - p : p);
    // Newton in t = log y on the log of the relevant tail; g is increasing in t.
    auto g = [&](double t) {
        const double y = std::exp(t);
        return upper ? log_target - std::log(gamma_q(a, y)) : std::log(gamma_p(a, y)) - log_target;
    };
    auto slope = [&](double t) {
        const double y = std::exp(t);
        const double log_dens_y = a * t - y - log_gamma(a);
        const double tail = upper ? gamma_q(a, y) : gamma_p(a, y);
        return std::exp(log_dens_y) / tail;
    };

    // Wilson-Hilferty start, replaced by the small-y power law deep in the lower tail.
    const double z = normal_quantile(p);
    const double v = 2.0 / (9.0 * df);
    double y0 = 0.5 * df * std::pow(1.0 - v + z * std::sqrt(v), 3);
    if (!(y0 > 0.0) || p < 0.05) {
        const double small = std::exp((std::log(p) + log_gamma(a + 1.0)) / a);
        if (!(y0 > 0.0) || small < y0) y0 = small;
    }
    double t = std::log(y0);

    double lo = t - 1.0, hi = t + 1.0;
    while (g(lo) > 0.0) lo -= 2.0 * (hi - lo);
    while (g(hi) < 0.0) hi += 2.0 * (hi - lo);
    for (int iter = 0; iter < 300; ++iter) {
        const double gt = g(t);
        if (gt == 0.0) break;
        if (gt < 0.0) lo = t;
        else hi = t;
        const double d = slope(t);
        double next = (d > 0.0 && std::isfinite(d)) ? t - gt / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::fabs(next - t);
        t = next;
        if (step <= 1e-14 || hi - lo <= 1e-14) break;
    }
    return 2.0 * std::exp(t);
}

double beta_cdf(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) domain_fail("beta_cdf: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) domain_fail("beta_cdf: x must lie in [0, 1]");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_bt = log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
    const double bt = std::exp(log_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - bt * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double kolmogorov_sf(double lambda) {
    if (std::isnan(lambda)) domain_fail("kolmogorov_sf: NaN");
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {
        // Jacobi-transformed series, fast for small lambda.
        const double pi2 = std::numbers::pi * std::numbers::pi;
        const double w = -pi2 / (8.0 * lambda * lambda);
        double sum = 0.0;
        for (int k = 1; k < 50; ++k) {
            const double odd = 2.0 * k - 1.0;
            const double term = std::exp(odd * odd * w);
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        return 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    }
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k < 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-18) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) {
        throw std::invalid_argument("ks_test: empty sample");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max({d, (i + 1.0) / n - f, f - i / n});
    }
    const double root_n = std::sqrt(n);
    return {d, kolmogorov_sf((root_n + 0.12 + 0.11 / root_n) * d)};
}

} // namespace ccv::stats
