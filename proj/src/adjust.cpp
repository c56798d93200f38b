#include "ccv/adjust.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ccv/core/order_stats.hpp"
#include "ccv/core/parallel.hpp"
#include "ccv/core/special.hpp"

namespace ccv::adjust {

namespace {

void check_delta(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("delta must lie in (0, 1)");
    }
}

void check_n(std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("calibration size n must be positive");
    }
}

// Replicate r is covered iff U_(i) <= b_i for every i. The uniforms are
// cum_i / total, so the comparison is done on the unnormalized cumulative
// sums to avoid n divisions.
bool covered(std::span<const double> b, stats::RandomStream& rng, std::vector<double>& cum) {
    const std::size_t n = b.size();
    double run = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        run += rng.exponential();
        cum[i] = run;
    }
    const double total = run + rng.exponential();
    for (std::size_t i = 0; i < n; ++i) {
        if (cum[i] > b[i] * total) {
            return false;
        }
    }
    return true;
}

std::size_t count_covered(std::span<const double> b, std::size_t reps, const stats::RandomStream& rng,
                          unsigned threads) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(resolve_threads(threads), reps));
    std::vector<std::size_t> hits(workers, 0);
    // Chunk boundaries only decide which worker handles which replicate; each
    // replicate's stream is fixed, so the total is thread-count independent.
    parallel_for(workers, static_cast<unsigned>(workers), [&](std::size_t w) {
        std::vector<double> cum(b.size());
        const std::size_t begin = reps * w / workers;
        const std::size_t end = reps * (w + 1) / workers;
        std::size_t local = 0;
        for (std::size_t r = begin; r < end; ++r) {
            auto sub = rng.split(r);
            local += covered(b, sub, cum) ? 1 : 0;
        }
        hits[w] = local;
    });
    std::size_t total = 0;
    for (auto h : hits) total += h;
    return total;
}

std::vector<double> asymptotic_values(std::size_t n, double c) {
    std::vector<double> b(n);
    const double nd = static_cast<double>(n);
    const double scale = nd * std::sqrt(nd);
    for (std::size_t i = 1; i <= n; ++i) {
        const double id = static_cast<double>(i);
        const double v = id / nd + c * std::sqrt(id * (nd - id)) / scale;
        b[i - 1] = std::clamp(v, 0.0, 1.0);
    }
    if (n > 0) b[n - 1] = 1.0;
    return b;
}

double log_c_terms(std::size_t n) {
    const double ll = std::log(std::log(static_cast<double>(n)));
    return 2.0 * ll + 0.5 * std::log(ll) - 0.5 * std::log(std::numbers::pi);
}

} // namespace

std::string to_string(Method method) {
    switch (method) {
    case Method::simes: return "simes";
    case Method::dkwm: return "dkwm";
    case Method::asymptotic: return "asymptotic";
    case Method::monte_carlo: return "monte-carlo";
    case Method::dempster: return "dempster";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "simes") return Method::simes;
    if (name == "dkwm") return Method::dkwm;
    if (name == "asymptotic") return Method::asymptotic;
    if (name == "monte-carlo" || name == "mc" || name == "monte_carlo") return Method::monte_carlo;
    if (name == "dempster") return Method::dempster;
    throw std::invalid_argument("unknown adjustment method: " + name);
}

double AdjustmentSequence::at(std::size_t i) const {
    if (i == 0) return 0.0;
    if (i > n) return 1.0;
    return b[i - 1];
}

void validate_sequence(const AdjustmentSequence& seq) {
    if (seq.b.size() != seq.n) {
        throw std::invalid_argument("adjustment sequence length does not match n");
    }
    double prev = 0.0;
    for (std::size_t i = 0; i < seq.b.size(); ++i) {
        const double v = seq.b[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("adjustment sequence value outside [0, 1] at index " +
                                        std::to_string(i + 1));
        }
        if (v < prev) {
            throw std::invalid_argument("adjustment sequence decreases at index " + std::to_string(i + 1));
        }
        prev = v;
    }
}

std::size_t default_simes_k(std::size_t n) { return (n + 1) / 2; }

AdjustmentSequence simes_sequence(std::size_t n, double delta, std::size_t k) {
    check_n(n);
    check_delta(delta);
    if (k < 1 || k > n) {
        throw std::invalid_argument("simes_sequence: k must lie in [1, n]");
    }
    AdjustmentSequence seq;
    seq.method = Method::simes;
    seq.n = n;
    seq.delta = delta;
    seq.k = k;
    seq.b.assign(n, 1.0);

    const double kd = static_cast<double>(k);
    const double log_delta = std::log(delta);
    // log of i (i-1) ... (i-k+1)
    auto falling = [&](std::size_t i) {
        return stats::log_gamma(static_cast<double>(i) + 1.0) - stats::log_gamma(static_cast<double>(i - k) + 1.0);
    };
    const double top = falling(n);
    for (std::size_t i = k; i <= n; ++i) {
        const double x = (log_delta + (falling(i) - top)) / kd;
        seq.b[n - i] = -std::expm1(x);
    }
    // Round-off in the log-gamma differences must not break monotonicity.
    for (std::size_t j = 1; j < n; ++j) seq.b[j] = std::max(seq.b[j], seq.b[j - 1]);
    return seq;
}

AdjustmentSequence dkwm_sequence(std::size_t n, double delta) {
    check_n(n);
    check_delta(delta);
    AdjustmentSequence seq;
    seq.method = Method::dkwm;
    seq.n = n;
    seq.delta = delta;
    seq.b.resize(n);
    const double nd = static_cast<double>(n);
    const double eps = std::sqrt(std::log(2.0 / delta) / (2.0 * nd));
    for (std::size_t i = 1; i <= n; ++i) {
        seq.b[i - 1] = std::min(static_cast<double>(i) / nd + eps, 1.0);
    }
    return seq;
}

double asymptotic_constant(std::size_t n, double delta) {
    if (n < 3) {
        throw std::invalid_argument("asymptotic adjustment needs n >= 3");
    }
    check_delta(delta);
    const double ll = std::log(std::log(static_cast<double>(n)));
    return (-std::log(-std::log1p(-delta)) + log_c_terms(n)) / std::sqrt(2.0 * ll);
}

AdjustmentSequence asymptotic_sequence(std::size_t n, double delta) {
    const double c = asymptotic_constant(n, delta);
    AdjustmentSequence seq;
    seq.method = Method::asymptotic;
    seq.n = n;
    seq.delta = delta;
    seq.b = asymptotic_values(n, c);
    return seq;
}

std::size_t asymptotic_istar(std::size_t n, double delta, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1)");
    }
    const double c = asymptotic_constant(n, delta);
    const double nd = static_cast<double>(n);
    const double disc = c * c + 4.0 * nd * alpha - 4.0 * nd * alpha * alpha;
    const double root = (c * c * nd + 2.0 * nd * nd * alpha - c * nd * std::sqrt(disc)) / (2.0 * (c * c + nd));
    if (root < 1.0) return 0;
    return std::min(n, static_cast<std::size_t>(std::floor(root)));
}

std::size_t monte_carlo_required_reps(double delta) {
    check_delta(delta);
    // About 100 expected non-coverage events at the target level.
    return static_cast<std::size_t>(std::ceil(100.0 * (1.0 - delta) / delta));
}

std::vector<double> monte_carlo_candidate(std::size_t n, std::size_t /*k*/, double delta_hat,
                                          std::span<const double> simes_b) {
    const double c = asymptotic_constant(n, delta_hat);
    std::vector<double> b = asymptotic_values(n, c);
    const std::size_t half = (n + 2) / 2;  // ceil((n+1)/2)
    for (std::size_t i = 1; i <= std::min(half, n); ++i) {
        b[i - 1] = std::min(b[i - 1], simes_b[i - 1]);
    }
    for (std::size_t j = 1; j < std::min(half, n); ++j) b[j] = std::max(b[j], b[j - 1]);
    // Above t = 1/2: the tangent of x + a sqrt(x(1-x)) at x = 1/2, which is x + a/2.
    const double nd = static_cast<double>(n);
    const double offset = 0.5 * c / std::sqrt(nd);
    for (std::size_t i = half + 1; i <= n; ++i) {
        const double line = static_cast<double>(i) / nd + offset;
        b[i - 1] = std::clamp(line, b[i - 2], 1.0);
    }
    b[n - 1] = 1.0;
    return b;
}

AdjustmentSequence monte_carlo_sequence(std::size_t n, double delta, std::size_t k, std::size_t reps,
                                        const stats::RandomStream& rng, unsigned threads) {
    if (n < 3) {
        throw std::invalid_argument("monte-carlo adjustment needs n >= 3");
    }
    check_delta(delta);
    const std::size_t needed = monte_carlo_required_reps(delta);
    if (reps < needed) {
        throw std::invalid_argument("monte-carlo adjustment: reps = " + std::to_string(reps) +
                                    " cannot resolve delta = " + std::to_string(delta) +
                                    "; need at least " + std::to_string(needed));
    }
    const auto simes = simes_sequence(n, delta, k);

    // Simes already covers with probability >= 1 - delta, so its MC coverage on
    // the same replicates is the noise-free yardstick: a candidate may not fall
    // below the smaller of the nominal level and what Simes achieves here.
    const double simes_cov =
        static_cast<double>(count_covered(simes.b, reps, rng, threads)) / static_cast<double>(reps);
    const double target = std::min(1.0 - delta, simes_cov);
    auto feasible = [&](double dh) {
        const auto b = monte_carlo_candidate(n, k, dh, simes.b);
        const double cov = static_cast<double>(count_covered(b, reps, rng, threads)) / static_cast<double>(reps);
        return cov >= target;
    };

    AdjustmentSequence seq;
    seq.method = Method::monte_carlo;
    seq.n = n;
    seq.delta = delta;
    seq.k = k;
    seq.reps = reps;
    seq.seed = rng.seed();

    // Coverage falls as delta_hat grows (c_n shrinks). Above the root of c_n the
    // asymptotic part drops below i/n and cannot cover; that bounds the search.
    const double c_zero = 1.0 - std::exp(-std::exp(-log_c_terms(n)));
    double lo = 1e-9;
    double hi = std::min(1.0 - 1e-12, c_zero);
    if (!feasible(lo)) {
        seq.b = simes.b;
        seq.delta_hat = 0.0;
        seq.warning = true;
        seq.note = "no delta_hat reached the Simes coverage; returned the Simes sequence";
        return seq;
    }
    if (feasible(hi)) {
        lo = hi;
    } else {
        while (hi - lo >= 1e-3) {
            const double mid = 0.5 * (lo + hi);
            (feasible(mid) ? lo : hi) = mid;
        }
    }
    seq.delta_hat = lo;
    seq.b = monte_carlo_candidate(n, k, lo, simes.b);
    return seq;
}

double dempster_delta(double a, double b, std::size_t n) {
    check_n(n);
    if (!(a > 0.0 && a < 1.0) || !(b >= 0.0 && b < 1.0)) {
        throw std::invalid_argument("dempster_delta: need a in (0, 1) and b in [0, 1)");
    }
    const double nd = static_cast<double>(n);
    const double slope = (1.0 - a) / (1.0 - b);
    const auto top = static_cast<std::size_t>(std::floor(nd * (1.0 - b)));
    const double log_a = std::log(a);
    double sum = 0.0;
    for (std::size_t j = 0; j <= std::min(top, n); ++j) {
        const double jd = static_cast<double>(j);
        const double left = a + slope * jd / nd;
        const double right = 1.0 - left;
        double log_term = log_a + stats::log_binomial(nd, jd) + (jd - 1.0) * std::log(left);
        if (j < n) {
            if (right <= 0.0) continue;
            log_term += (nd - jd) * std::log(right);
        }
        sum += std::exp(log_term);
    }
    return sum;
}

McEstimate dempster_crossing_mc(double a, double b, std::size_t n, std::size_t reps,
                                const stats::RandomStream& rng, unsigned threads) {
    check_n(n);
    // Just below the jump at U_(i) the empirical CDF is (i-1)/n, so the
    // boundary there is the sequence shifted by one index.
    std::vector<double> shifted(n);
    const double slope = (1.0 - a) / (1.0 - b);
    for (std::size_t i = 1; i <= n; ++i) {
        shifted[i - 1] = std::min(1.0, a + slope * static_cast<double>(i - 1) / static_cast<double>(n));
    }
    const std::size_t ok = count_covered(shifted, reps, rng, threads);
    return proportion_estimate(reps - ok, reps);
}

namespace {

// b in [0, 1) with Delta(a, b; n) = delta; Delta is decreasing in b.
double dempster_solve_b(double a, std::size_t n, double delta) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double d = dempster_delta(a, mid, n);
        if (d > delta) lo = mid;
        else hi = mid;
        if (std::fabs(d - delta) < 1e-13) return mid;
    }
    return 0.5 * (lo + hi);
}

struct DempsterPoint {
    double a;
    double b;
    double b1;
};

DempsterPoint dempster_point(double a, std::size_t n, double delta) {
    const double b = dempster_solve_b(a, n, delta);
    const double b1 = a + (1.0 - a) / ((1.0 - b) * static_cast<double>(n));
    return {a, b, b1};
}

} // namespace

AdjustmentSequence dempster_sequence(std::size_t n, double delta, double b1_target) {
    check_n(n);
    check_delta(delta);
    const double nd = static_cast<double>(n);
    // Feasible a: (1 - a)^n < delta <= Delta(a, 0).
    const double a_min = -std::expm1(std::log(delta) / nd);
    double lo = a_min, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (dempster_delta(mid, 0.0, n) > delta ? lo : hi) = mid;
    }
    const double a_max = lo;
    const double span = a_max - a_min;

    // Coarse scan, then golden-section refinement around the best grid cell.
    const int grid = 64;
    std::vector<DempsterPoint> pts;
    pts.reserve(grid + 1);
    for (int g = 1; g <= grid; ++g) {
        pts.push_back(dempster_point(a_min + span * g / grid, n, delta));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].b1 < pts[best].b1) best = i;
    }
    double gl = best == 0 ? a_min + span * 1e-9 : pts[best - 1].a;
    double gr = best + 1 < pts.size() ? pts[best + 1].a : a_max;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    auto x1 = gr - phi * (gr - gl), x2 = gl + phi * (gr - gl);
    auto p1 = dempster_point(x1, n, delta), p2 = dempster_point(x2, n, delta);
    for (int it = 0; it < 80 && gr - gl > 1e-13; ++it) {
        if (p1.b1 < p2.b1) {
            gr = x2; x2 = x1; p2 = p1;
            x1 = gr - phi * (gr - gl);
            p1 = dempster_point(x1, n, delta);
        } else {
            gl = x1; x1 = x2; p1 = p2;
            x2 = gl + phi * (gr - gl);
            p2 = dempster_point(x2, n, delta);
        }
    }
    DempsterPoint minimizer = p1.b1 < p2.b1 ? p1 : p2;
    if (pts[best].b1 < minimizer.b1) minimizer = pts[best];

    AdjustmentSequence seq;
    seq.method = Method::dempster;
    seq.n = n;
    seq.delta = delta;

    DempsterPoint chosen = minimizer;
    auto match_on = [&](double from, double to) -> std::optional<DempsterPoint> {
        // b1 is monotone between the minimizer and either end of the feasible range.
        auto pf = dempster_point(from, n, delta);
        auto pt = dempster_point(to, n, delta);
        if ((pf.b1 - b1_target) * (pt.b1 - b1_target) > 0.0) return std::nullopt;
        for (int it = 0; it < 100 && std::fabs(to - from) > 1e-14; ++it) {
            const double mid = 0.5 * (from + to);
            auto pm = dempster_point(mid, n, delta);
            if ((pm.b1 - b1_target) * (pf.b1 - b1_target) > 0.0) { from = mid; pf = pm; }
            else { to = mid; pt = pm; }
        }
        return std::fabs(pf.b1 - b1_target) < std::fabs(pt.b1 - b1_target) ? pf : pt;
    };
    if (b1_target < minimizer.b1) {
        seq.warning = true;
        seq.note = "b1 target below the smallest attainable b1; used the b1-minimizing pair";
    } else if (auto right = match_on(minimizer.a, a_max)) {
        chosen = *right;
    } else if (auto left = match_on(a_min + span * 1e-9, minimizer.a)) {
        chosen = *left;
    } else {
        seq.warning = true;
        seq.note = "b1 target not attainable; used the b1-minimizing pair";
    }

    seq.dempster_a = chosen.a;
    seq.dempster_b = chosen.b;
    seq.b.resize(n);
    const double slope = (1.0 - chosen.a) / (1.0 - chosen.b);
    for (std::size_t i = 1; i <= n; ++i) {
        seq.b[i - 1] = std::min(1.0, chosen.a + slope * static_cast<double>(i) / nd);
    }
    return seq;
}

double apply(const AdjustmentSequence& seq, double p) {
    if (!(p > 0.0)) {
        throw std::invalid_argument("apply: p-value must be positive");
    }
    if (p >= 1.0) return 1.0;
    const double scaled = static_cast<double>(seq.n + 1) * p;
    const double nearest = std::round(scaled);
    // Grid p-values i/(n+1) come back as i up to round-off.
    const double idx = std::fabs(scaled - nearest) < 1e-9 * std::max(1.0, nearest) ? nearest : std::ceil(scaled);
    return seq.at(static_cast<std::size_t>(idx));
}

conformal::PValueVector apply(const AdjustmentSequence& seq, const conformal::PValueVector& marginal) {
    if (marginal.n != 0 && marginal.n != seq.n) {
        throw std::invalid_argument("apply: calibration size of p-values does not match the sequence");
    }
    conformal::PValueVector out;
    out.kind = conformal::PValueKind::conditional;
    out.n = seq.n;
    out.delta = seq.delta;
    out.method = to_string(seq.method);
    out.values.reserve(marginal.size());
    for (double p : marginal.values) out.values.push_back(apply(seq, p));
    return out;
}

McEstimate coverage_probability_mc(std::span<const double> b, std::size_t reps, const stats::RandomStream& rng,
                                   unsigned threads) {
    if (reps == 0) {
        throw std::invalid_argument("coverage_probability_mc: reps must be positive");
    }
    return proportion_estimate(count_covered(b, reps, rng, threads), reps);
}

McEstimate coverage_probability_mc(const AdjustmentSequence& seq, std::size_t reps, const stats::RandomStream& rng,
                                   unsigned threads) {
    return coverage_probability_mc(std::span<const double>(seq.b), reps, rng, threads);
}

std::size_t istar(const AdjustmentSequence& seq, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1)");
    }
    return static_cast<std::size_t>(std::upper_bound(seq.b.begin(), seq.b.end(), alpha) - seq.b.begin());
}

double effective_level(const AdjustmentSequence& seq, double alpha) {
    return static_cast<double>(istar(seq, alpha)) / static_cast<double>(seq.n + 1);
}

AdjustmentSequence build(Method method, std::size_t n, double delta, const BuildOptions& opts) {
    const std::size_t k = opts.k == 0 ? default_simes_k(n) : opts.k;
    switch (method) {
    case Method::simes: return simes_sequence(n, delta, k);
    case Method::dkwm: return dkwm_sequence(n, delta);
    case Method::asymptotic: return asymptotic_sequence(n, delta);
    case Method::monte_carlo:
        return monte_carlo_sequence(n, delta, k, opts.reps, stats::RandomStream(opts.seed), opts.threads);
    case Method::dempster: {
        const double target = opts.b1_target ? *opts.b1_target : simes_sequence(n, delta, k).b[0];
        auto seq = dempster_sequence(n, delta, target);
        seq.k = k;
        return seq;
    }
    }
    throw std::invalid_argument("unknown adjustment method");
}

} // namespace ccv::adjust
