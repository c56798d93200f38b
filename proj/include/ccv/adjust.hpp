#ifndef CCV_ADJUST_HPP
#define CCV_ADJUST_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccv/conformal.hpp"
#include "ccv/core/estimate.hpp"
#include "ccv/core/random.hpp"

namespace ccv::adjust {

/*
 * Calibration-conditional adjustment sequences. A sequence b_1 <= ... <= b_n
 * in [0, 1] defines h(t) = b_{ceil((n+1) t)} with b_{n+1} = 1; when
 * P[U_(i) <= b_i for all i] >= 1 - delta over uniform order statistics,
 * h applied to a marginal p-value is conditionally valid with probability
 * >= 1 - delta over the calibration draw.
 *
 * Indices in the public API are 1-based where they refer to b_i; the
 * storage vector `b` is 0-based (b[0] = b_1).
 */

enum class Method { simes, dkwm, asymptotic, monte_carlo, dempster };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct AdjustmentSequence {
    Method method = Method::simes;
    std::size_t n = 0;
    double delta = 0.0;
    std::vector<double> b;

    std::optional<std::size_t> k;           // simes, monte_carlo
    std::optional<double> delta_hat;        // monte_carlo
    std::optional<std::size_t> reps;        // monte_carlo
    std::optional<std::uint64_t> seed;      // monte_carlo
    std::optional<double> dempster_a;
    std::optional<double> dempster_b;
    bool warning = false;
    std::string note;

    /// b_i with b_0 = 0 and b_{n+1} = 1.
    double at(std::size_t i) const;
};

/// Throws std::invalid_argument unless b has n entries, lies in [0, 1] and is nondecreasing.
void validate_sequence(const AdjustmentSequence& seq);

/// ceil(n / 2).
std::size_t default_simes_k(std::size_t n);

AdjustmentSequence simes_sequence(std::size_t n, double delta, std::size_t k);
AdjustmentSequence dkwm_sequence(std::size_t n, double delta);

/// c_n(delta) of the asymptotic envelope; n >= 3.
double asymptotic_constant(std::size_t n, double delta);
AdjustmentSequence asymptotic_sequence(std::size_t n, double delta);

/// Closed-form i*(alpha; h^a) = max{i : b_i^a <= alpha} from the quadratic root.
std::size_t asymptotic_istar(std::size_t n, double delta, double alpha);

/// Smallest replicate count monte_carlo_sequence accepts for this delta.
std::size_t monte_carlo_required_reps(double delta);

/*
 * min{simes, asymptotic(delta_hat)} on i <= ceil((n+1)/2), continued above
 * that index as the straight line through the last two grid values, capped
 * at 1. delta_hat is the largest value whose MC coverage is >= 1 - delta,
 * located by bisection with common random numbers (replicate r always uses
 * rng.split(r)). The returned sequence is the feasible end of the final
 * bracket.
 */
AdjustmentSequence monte_carlo_sequence(std::size_t n, double delta, std::size_t k, std::size_t reps,
                                        const stats::RandomStream& rng, unsigned threads = 1);

/// The min/tangent construction for a fixed delta_hat, without calibration.
std::vector<double> monte_carlo_candidate(std::size_t n, std::size_t k, double delta_hat,
                                          std::span<const double> simes_b);

/// Exact linear-boundary crossing probability Delta(a, b; n).
double dempster_delta(double a, double b, std::size_t n);

/// MC probability that z > a + (1 - a)/(1 - b) F_n(z) for some z, i.e. that
/// U_(i) > a + (1 - a)(i - 1)/((1 - b) n) for some i.
McEstimate dempster_crossing_mc(double a, double b, std::size_t n, std::size_t reps,
                                const stats::RandomStream& rng, unsigned threads = 1);

/*
 * Linear sequence b_i = a + (1 - a) i / ((1 - b) n) with Delta(a, b; n) = delta.
 * a is chosen so that b_1 matches b1_target; when no a reaches the target the
 * b_1-minimizing pair is returned and `warning` is set.
 */
AdjustmentSequence dempster_sequence(std::size_t n, double delta, double b1_target);

/// h(p) = b_{ceil((n+1) p)}; p in (0, 1].
double apply(const AdjustmentSequence& seq, double p);

/// Element-wise apply over marginal p-values; the result is tagged conditional.
conformal::PValueVector apply(const AdjustmentSequence& seq, const conformal::PValueVector& marginal);

/// MC estimate of P[U_(i) <= b_i for all i]; replicate r uses rng.split(r).
McEstimate coverage_probability_mc(const AdjustmentSequence& seq, std::size_t reps,
                                   const stats::RandomStream& rng, unsigned threads = 1);

/// Same, for a raw b vector.
McEstimate coverage_probability_mc(std::span<const double> b, std::size_t reps,
                                   const stats::RandomStream& rng, unsigned threads = 1);

/// i*(alpha)/(n+1) with i* = max{i : b_i <= alpha}; 0 when no index qualifies.
double effective_level(const AdjustmentSequence& seq, double alpha);

/// i*(alpha) itself.
std::size_t istar(const AdjustmentSequence& seq, double alpha);

/// Dispatch by method name; k = 0 selects the default Simes parameter.
struct BuildOptions {
    std::size_t k = 0;
    std::size_t reps = 10000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::optional<double> b1_target;  // dempster; defaults to the Simes b_1
};
AdjustmentSequence build(Method method, std::size_t n, double delta, const BuildOptions& opts);

} // namespace ccv::adjust

#endif // CCV_ADJUST_HPP
