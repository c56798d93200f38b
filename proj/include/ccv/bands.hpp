#ifndef CCV_BANDS_HPP
#define CCV_BANDS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ccv/adjust.hpp"
#include "ccv/conformal.hpp"

namespace ccv::bands {

/// Law of the conditional FPR of the marginal test at level alpha: Beta(ell, n + 1 - ell).
struct BetaLaw {
    std::size_t ell = 0;
    double a = 0.0;
    double b = 0.0;
    double mean() const { return a / (a + b); }
    double sd() const { return std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0))); }
};

/// ell = floor((n + 1) alpha); throws when ell = 0.
BetaLaw fpr_pointwise_law(std::size_t n, double alpha);

struct BandStep {
    double threshold;      // step starts here; the first step starts at -inf
    double empirical_fpr;  // F_n on [threshold, next threshold)
    double bound;          // h(F_n) on the same interval
};

/*
 * Right-continuous upper band on F(t) = P[s(X) <= t] for inliers, keyed on the
 * calibration order statistics: b_1 below S_(1), b_{i+1} on [S_(i), S_(i+1)),
 * and 1 from S_(n) on.
 */
class FprBand {
public:
    FprBand(std::vector<BandStep> steps, double delta, std::string method)
        : steps_(std::move(steps)), delta_(delta), method_(std::move(method)) {}

    const std::vector<BandStep>& steps() const noexcept { return steps_; }
    double delta() const noexcept { return delta_; }
    const std::string& method() const noexcept { return method_; }

    double value_at(double t) const;
    double empirical_at(double t) const;

private:
    const BandStep& step_for(double t) const;

    std::vector<BandStep> steps_;
    double delta_;
    std::string method_;
};

FprBand fpr_band(const conformal::CalibrationSet& cal, const adjust::AdjustmentSequence& seq);

/*
 * C = {x : h(u_marg(x)) > alpha}. With i* = max{i : b_i <= alpha} this is
 * {x : s(x) >= S_(i*)}; the threshold is -inf when i* = 0.
 */
struct PredictionSet {
    double threshold = -std::numeric_limits<double>::infinity();
    std::size_t istar = 0;
    bool contains(double score) const { return score >= threshold; }
    bool everything() const { return istar == 0; }
};

PredictionSet prediction_set(const conformal::CalibrationSet& cal, const adjust::AdjustmentSequence& seq,
                             double alpha);

double prediction_set_threshold(const conformal::CalibrationSet& cal, const adjust::AdjustmentSequence& seq,
                                double alpha);

} // namespace ccv::bands

#endif // CCV_BANDS_HPP
