#ifndef CCV_CORE_ESTIMATE_HPP
#define CCV_CORE_ESTIMATE_HPP

#include <cmath>
#include <cstddef>

namespace ccv {

/// Monte-Carlo estimate with its standard error.
struct McEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t reps = 0;
};

/// Binomial proportion hits/reps with s.e. sqrt(p(1-p)/reps).
inline McEstimate proportion_estimate(std::size_t hits, std::size_t reps) {
    if (reps == 0) {
        return {};
    }
    const double p = static_cast<double>(hits) / static_cast<double>(reps);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(reps)), reps};
}

} // namespace ccv

#endif // CCV_CORE_ESTIMATE_HPP
