#include "ccv/sim/mixture.hpp"

#include <cmath>
#include <stdexcept>

namespace ccv::sim {

MixtureSpec make_mixture(std::size_t dim, std::size_t n_centers, double box,
                         stats::RandomStream& rng) {
    if (dim == 0 || n_centers == 0 || !(box > 0.0)) {
        throw std::invalid_argument("make_mixture: dim, n_centers and box must be positive");
    }
    MixtureSpec spec;
    spec.dim = dim;
    spec.box = box;
    spec.centers.assign(n_centers, std::vector<double>(dim));
    for (auto& center : spec.centers) {
        for (double& c : center) {
            c = rng.uniform(-box, box);
        }
    }
    return spec;
}

DataMatrix sample_mixture(const MixtureSpec& spec, double a, std::size_t n,
                          stats::RandomStream& rng) {
    if (!(a >= 1.0)) {
        throw std::invalid_argument("sample_mixture: signal strength a must be >= 1");
    }
    if (spec.centers.empty() || spec.dim == 0) {
        throw std::invalid_argument("sample_mixture: empty mixture spec");
    }
    DataMatrix out(n, spec.dim);
    const double scale = std::sqrt(a);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& center = spec.centers[rng.below(spec.centers.size())];
        auto row = out.row(i);
        for (std::size_t j = 0; j < spec.dim; ++j) {
            row[j] = scale * rng.normal() + center[j];
        }
    }
    return out;
}

} // namespace ccv::sim
