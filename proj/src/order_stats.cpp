#include "ccv/core/order_stats.hpp"

#include <stdexcept>

namespace ccv::stats {

void fill_uniform_order_stats(std::span<double> out, RandomStream& rng) {
    double total = 0.0;
    for (double& value : out) {
        total += rng.exponential();
        value = total;
    }
    total += rng.exponential();
    const double scale = 1.0 / total;
    for (double& value : out) {
        value *= scale;
    }
}

std::vector<double> uniform_order_stats(std::size_t n, RandomStream& rng) {
    if (n == 0) {
        throw std::invalid_argument("uniform_order_stats: n must be positive");
    }
    std::vector<double> out(n);
    fill_uniform_order_stats(out, rng);
    return out;
}

} // namespace ccv::stats
