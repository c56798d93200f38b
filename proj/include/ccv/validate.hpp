#ifndef CCV_VALIDATE_HPP
#define CCV_VALIDATE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccv/adjust.hpp"

namespace ccv::validate {

enum class Level { quick, full };

std::string to_string(Level level);
Level level_from_string(const std::string& name);

struct CriterionResult {
    int id = 0;
    std::string title;
    std::string target;        // human-readable pass condition
    double observed = 0.0;     // headline statistic
    double tolerance = 0.0;    // slack allowed around the target (3 s.e., 1e-12, ...)
    bool pass = false;
    double seconds = 0.0;
    nlohmann::json details = nlohmann::json::object();
};

struct Options {
    Level level = Level::full;
    std::uint64_t seed = 20211;
    unsigned threads = 1;
    std::vector<int> only;     // empty = every criterion
    // Applied to every adjustment sequence the suite builds; a negative control
    // uses it to corrupt sequences and confirm the suite goes red.
    std::function<void(adjust::AdjustmentSequence&)> sequence_hook;
    std::function<void(const CriterionResult&)> on_result;
};

/// Runs the acceptance criteria; an exception inside a criterion marks it failed.
std::vector<CriterionResult> run(const Options& options);

/// Pushes b_1 above b_2 so the sequence decreases.
void tamper_non_monotone(adjust::AdjustmentSequence& seq);

nlohmann::json report_json(const Options& options, const std::vector<CriterionResult>& results);

/// "[PASS] 8  Simes sequence exactness: observed ... (1.2 s)"
std::string summary_line(const CriterionResult& result);

} // namespace ccv::validate

#endif // CCV_VALIDATE_HPP
