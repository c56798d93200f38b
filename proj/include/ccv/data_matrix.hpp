#ifndef CCV_DATA_MATRIX_HPP
#define CCV_DATA_MATRIX_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace ccv {

/// Row-major observation matrix: one observation per row, cols >= 1, finite entries.
class DataMatrix {
public:
    DataMatrix(std::size_t rows, std::size_t cols);
    DataMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static DataMatrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * cols_, cols_};
    }
    std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

    double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> values_;
};

} // namespace ccv

#endif // CCV_DATA_MATRIX_HPP
