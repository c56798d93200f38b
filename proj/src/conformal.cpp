#include "ccv/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ccv/core/parallel.hpp"

namespace ccv::conformal {

CalibrationSet::CalibrationSet(std::vector<double> scores) : scores_(std::move(scores)) {
    if (scores_.empty()) {
        throw std::invalid_argument("calibration set must contain at least one score");
    }
    for (double s : scores_) {
        if (!std::isfinite(s)) {
            throw std::invalid_argument("calibration scores must be finite");
        }
    }
    std::sort(scores_.begin(), scores_.end());
}

std::size_t CalibrationSet::count_le(double s) const noexcept {
    return static_cast<std::size_t>(std::upper_bound(scores_.begin(), scores_.end(), s) - scores_.begin());
}

std::size_t CalibrationSet::count_lt(double s) const noexcept {
    return static_cast<std::size_t>(std::lower_bound(scores_.begin(), scores_.end(), s) - scores_.begin());
}

std::string to_string(PValueKind kind) {
    return kind == PValueKind::marginal ? "marginal" : "conditional";
}

double marginal_pvalue(const CalibrationSet& cal, double s) {
    if (std::isnan(s)) {
        throw std::invalid_argument("marginal_pvalue: NaN score");
    }
    return static_cast<double>(1 + cal.count_le(s)) / static_cast<double>(cal.size() + 1);
}

double marginal_pvalue_randomized(const CalibrationSet& cal, double s, double u) {
    if (std::isnan(s)) {
        throw std::invalid_argument("marginal_pvalue_randomized: NaN score");
    }
    if (!(u >= 0.0 && u <= 1.0)) {
        throw std::invalid_argument("marginal_pvalue_randomized: u must lie in [0, 1]");
    }
    const std::size_t below = cal.count_lt(s);
    const std::size_t ties = cal.count_le(s) - below;
    const double slots = static_cast<double>(ties + 1);
    const double drawn = std::max(1.0, std::ceil(slots * u));
    return (static_cast<double>(below) + drawn) / static_cast<double>(cal.size() + 1);
}

PValueVector marginal_pvalues_batch(const CalibrationSet& cal, std::span<const double> tests,
                                    const stats::RandomStream& rng, bool randomized,
                                    unsigned threads) {
    PValueVector out;
    out.kind = PValueKind::marginal;
    out.n = cal.size();
    out.values.resize(tests.size());
    parallel_for(tests.size(), threads, [&](std::size_t i) {
        if (randomized) {
            auto sub = rng.split(i);
            out.values[i] = marginal_pvalue_randomized(cal, tests[i], sub.uniform());
        } else {
            out.values[i] = marginal_pvalue(cal, tests[i]);
        }
    });
    return out;
}

} // namespace ccv::conformal
