#ifndef CCV_SIM_MIXTURE_HPP
#define CCV_SIM_MIXTURE_HPP

#include <cstddef>
#include <vector>

#include "ccv/core/random.hpp"
#include "ccv/data_matrix.hpp"

namespace ccv::sim {

/*
 * Gaussian mixture P_X^a: X = sqrt(a) V + W with V standard normal in R^d and
 * W drawn uniformly from a fixed finite set of centers. The centers are drawn
 * once per experiment suite and then held constant.
 */
struct MixtureSpec {
    std::size_t dim = 0;
    double box = 0.0;
    std::vector<std::vector<double>> centers;
};

/// Centers i.i.d. uniform on [-box, box]^d.
MixtureSpec make_mixture(std::size_t dim, std::size_t n_centers, double box,
                         stats::RandomStream& rng);

/// n rows from P_X^a; a >= 1.
DataMatrix sample_mixture(const MixtureSpec& spec, double a, std::size_t n,
                          stats::RandomStream& rng);

} // namespace ccv::sim

#endif // CCV_SIM_MIXTURE_HPP
