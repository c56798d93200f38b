#ifndef CCV_CORE_ORDER_STATS_HPP
#define CCV_CORE_ORDER_STATS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "ccv/core/random.hpp"

namespace ccv::stats {

/// Sorted Unif(0,1)^n draw built from normalized cumulative Exp(1) spacings. O(n), no sort.
std::vector<double> uniform_order_stats(std::size_t n, RandomStream& rng);

/// Same draw written into `out` (size n), for allocation-free inner loops.
void fill_uniform_order_stats(std::span<double> out, RandomStream& rng);

} // namespace ccv::stats

#endif // CCV_CORE_ORDER_STATS_HPP
