#include "ccv/data_matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace ccv {

DataMatrix::DataMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {
    if (cols == 0) {
        throw std::invalid_argument("DataMatrix: at least one column is required");
    }
}

DataMatrix::DataMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (cols == 0) {
        throw std::invalid_argument("DataMatrix: at least one column is required");
    }
    if (values_.size() != rows * cols) {
        throw std::invalid_argument("DataMatrix: value count does not match rows * cols");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("DataMatrix: entries must be finite");
        }
    }
}

DataMatrix DataMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        throw std::invalid_argument("DataMatrix::from_rows: no rows");
    }
    const std::size_t cols = rows.front().size();
    std::vector<double> values;
    values.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) {
            throw std::invalid_argument("DataMatrix::from_rows: ragged rows");
        }
        values.insert(values.end(), r.begin(), r.end());
    }
    return DataMatrix(rows.size(), cols, std::move(values));
}

} // namespace ccv
