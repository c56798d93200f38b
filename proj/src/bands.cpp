#include "ccv/bands.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ccv::bands {

BetaLaw fpr_pointwise_law(std::size_t n, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1)");
    }
    const double scaled = static_cast<double>(n + 1) * alpha;
    // Guard the floor against representation error, e.g. 100 * 0.1.
    const auto ell = static_cast<std::size_t>(std::floor(scaled + 1e-9));
    if (ell == 0) {
        throw std::invalid_argument("fpr_pointwise_law: floor((n+1) alpha) = 0, the test never rejects");
    }
    return {ell, static_cast<double>(ell), static_cast<double>(n + 1 - ell)};
}

const BandStep& FprBand::step_for(double t) const {
    // Last step whose threshold is <= t; the first step covers everything below.
    auto it = std::upper_bound(steps_.begin() + 1, steps_.end(), t,
                               [](double v, const BandStep& s) { return v < s.threshold; });
    return *(it - 1);
}

double FprBand::value_at(double t) const { return step_for(t).bound; }
double FprBand::empirical_at(double t) const { return step_for(t).empirical_fpr; }

FprBand fpr_band(const conformal::CalibrationSet& cal, const adjust::AdjustmentSequence& seq) {
    const std::size_t n = cal.size();
    if (seq.n != n) {
        throw std::invalid_argument("fpr_band: sequence n does not match the calibration size");
    }
    adjust::validate_sequence(seq);
    std::vector<BandStep> steps;
    steps.reserve(n + 1);
    steps.push_back({-std::numeric_limits<double>::infinity(), 0.0, seq.at(1)});
    const auto scores = cal.scores();
    for (std::size_t i = 1; i <= n; ++i) {
        const double s = scores[i - 1];
        // Tied scores collapse into one step at the highest rank.
        if (i < n && scores[i] == s) continue;
        steps.push_back({s, static_cast<double>(i) / static_cast<double>(n), seq.at(i + 1)});
    }
    return FprBand(std::move(steps), seq.delta, adjust::to_string(seq.method));
}

PredictionSet prediction_set(const conformal::CalibrationSet& cal, const adjust::AdjustmentSequence& seq,
                             double alpha) {
    if (seq.n != cal.size()) {
        throw std::invalid_argument("prediction_set: sequence n does not match the calibration size");
    }
    PredictionSet out;
    out.istar = adjust::istar(seq, alpha);
    if (out.istar > 0) {
        out.threshold = cal.order_stat(out.istar);
    }
    return out;
}

double prediction_set_threshold(const conformal::CalibrationSet& cal, const adjust::AdjustmentSequence& seq,
                                double alpha) {
    return prediction_set(cal, seq, alpha).threshold;
}

} // namespace ccv::bands
