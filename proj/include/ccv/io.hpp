#ifndef CCV_IO_HPP
#define CCV_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ccv/adjust.hpp"
#include "ccv/bands.hpp"
#include "ccv/data_matrix.hpp"
#include "ccv/mtest.hpp"
#include "ccv/sim/experiments.hpp"

namespace ccv::io {

/*
 * CSV conventions: header row, ',' separator, '.' decimal, LF line endings.
 * Reals are written in the shortest form that parses back to the same double;
 * infinities as "inf"/"-inf". Row indices in p-value and rejection files are
 * 0-based positions in the input; sequence files use the 1-based b_i index.
 */

/// Malformed or inconsistent input data (as opposed to bad flags).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string format_double(double x);
std::optional<double> try_parse_double(std::string_view s);

struct Table {
    std::vector<std::string> header;  // empty when the file had none
    std::vector<std::vector<std::string>> rows;
};

/// Splits on commas and trims blanks; the first line is a header when any field is non-numeric.
Table read_table(std::istream& in, const std::string& source);
Table read_table_file(const std::filesystem::path& path);

/// Column by header name, or the first column when name is empty. Every cell must parse.
std::vector<double> numeric_column(const Table& table, const std::string& name, const std::string& source);

/// Scores from a CSV: a named column, else a column called "score", else the first column.
std::vector<double> read_scores(const std::filesystem::path& path, const std::string& column = "");

/// All columns as features; header optional.
DataMatrix read_matrix(const std::filesystem::path& path);

nlohmann::json sequence_metadata(const adjust::AdjustmentSequence& seq);
void write_sequence_csv(std::ostream& out, const adjust::AdjustmentSequence& seq);
/// "<csv>.json" next to the CSV.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);
/// Reads index,b plus the sidecar when present; validates the result.
adjust::AdjustmentSequence read_sequence(const std::filesystem::path& csv);

void write_pvalues_csv(std::ostream& out, const std::vector<double>& scores, const std::vector<double>& marginal,
                       const std::vector<double>* conditional);

void write_band_csv(std::ostream& out, const bands::FprBand& band);

nlohmann::json to_json(const mtest::RejectionReport& report);
nlohmann::json to_json(const mtest::GlobalTestResult& result);
nlohmann::json to_json(const sim::ExperimentConfig& config);
nlohmann::json to_json(const McEstimate& estimate);

void write_rejections_csv(std::ostream& out, const mtest::RejectionReport& report, const std::vector<double>& p);

/// Tidy rows: suite,practitioner,method,procedure,alpha,metric,value.
void write_experiment_csv(std::ostream& out, const sim::ExperimentReport& report);
void write_summary_csv(std::ostream& out, const sim::ExperimentReport& report);
void write_power_curves_csv(std::ostream& out, const std::vector<sim::PowerCurveRow>& rows);

/// Writes to a temporary sibling and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& path, const std::string& contents);

} // namespace ccv::io

#endif // CCV_IO_HPP
