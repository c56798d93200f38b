#ifndef CCV_CONFORMAL_HPP
#define CCV_CONFORMAL_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccv/core/random.hpp"

namespace ccv::conformal {

/// Sorted hold-out scores. Built from any order; entries must be finite.
class CalibrationSet {
public:
    explicit CalibrationSet(std::vector<double> scores);

    std::size_t size() const noexcept { return scores_.size(); }
    std::span<const double> scores() const noexcept { return scores_; }
    /// i-th order statistic, 1-based.
    double order_stat(std::size_t i) const { return scores_.at(i - 1); }

    std::size_t count_le(double s) const noexcept;
    std::size_t count_lt(double s) const noexcept;

private:
    std::vector<double> scores_;
};

enum class PValueKind { marginal, conditional };

std::string to_string(PValueKind kind);

struct PValueVector {
    std::vector<double> values;
    PValueKind kind = PValueKind::marginal;
    std::size_t n = 0;
    std::optional<double> delta;  // conditional only
    std::string method;           // adjustment method name for conditional values

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

/// (1 + #{S_i <= s}) / (n + 1).
double marginal_pvalue(const CalibrationSet& cal, double s);

/// (#{S_i < s} + ceil((1 + #{S_i = s}) u)) / (n + 1), with the ceiling floored at 1
/// so that u = 0 behaves like u -> 0+.
double marginal_pvalue_randomized(const CalibrationSet& cal, double s, double u);

/// Element-wise marginal p-values. In randomized mode test i draws its u from
/// rng.split(i), so the output does not depend on the thread count.
PValueVector marginal_pvalues_batch(const CalibrationSet& cal, std::span<const double> tests,
                                    const stats::RandomStream& rng, bool randomized = false,
                                    unsigned threads = 1);

} // namespace ccv::conformal

#endif // CCV_CONFORMAL_HPP
