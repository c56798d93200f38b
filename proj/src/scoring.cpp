#include "ccv/scoring.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "ccv/core/parallel.hpp"

namespace ccv::scoring {

namespace {

void check_dim(std::span<const double> x, std::size_t dim) {
    if (x.size() != dim) {
        throw std::invalid_argument("score: feature dimension mismatch");
    }
}

double knn_score(const KnnModel& m, std::span<const double> x) {
    check_dim(x, m.train.cols());
    std::vector<std::pair<double, std::size_t>> dist(m.train.rows());
    for (std::size_t i = 0; i < m.train.rows(); ++i) {
        const auto row = m.train.row(i);
        double sq = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double diff = row[j] - x[j];
            sq += diff * diff;
        }
        dist[i] = {sq, i};
    }
    const auto kth = dist.begin() + static_cast<std::ptrdiff_t>(m.k);
    std::nth_element(dist.begin(), kth - 1, dist.end());
    std::sort(dist.begin(), kth);
    // Summing in ascending order makes the result independent of training-row order.
    double sum = 0.0;
    for (auto it = dist.begin(); it != kth; ++it) {
        sum += std::sqrt(it->first);
    }
    return -sum / static_cast<double>(m.k);
}

double mahalanobis_score(const MahalanobisModel& m, std::span<const double> x) {
    check_dim(x, m.dim);
    // Forward substitution L y = x - mu; the squared distance is |y|^2.
    std::vector<double> y(m.dim);
    double sq = 0.0;
    for (std::size_t i = 0; i < m.dim; ++i) {
        double v = x[i] - m.mean[i];
        for (std::size_t j = 0; j < i; ++j) {
            v -= m.cholesky[i * m.dim + j] * y[j];
        }
        y[i] = v / m.cholesky[i * m.dim + i];
        sq += y[i] * y[i];
    }
    return -std::sqrt(sq);
}

double mixture_score(const MixtureModel& m, std::span<const double> x) {
    check_dim(x, m.spec.dim);
    std::vector<double> exponents(m.spec.centers.size());
    for (std::size_t c = 0; c < m.spec.centers.size(); ++c) {
        const auto& center = m.spec.centers[c];
        double sq = 0.0;
        for (std::size_t j = 0; j < m.spec.dim; ++j) {
            const double diff = x[j] - center[j];
            sq += diff * diff;
        }
        exponents[c] = -sq / (2.0 * m.a);
    }
    const double top = *std::max_element(exponents.begin(), exponents.end());
    double sum = 0.0;
    for (double e : exponents) {
        sum += std::exp(e - top);
    }
    const double d = static_cast<double>(m.spec.dim);
    return top + std::log(sum) - std::log(static_cast<double>(exponents.size())) -
           0.5 * d * std::log(2.0 * std::numbers::pi * m.a);
}

// Row order sorted lexicographically, so accumulations do not depend on input order.
std::vector<std::size_t> canonical_order(const DataMatrix& data) {
    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ra = data.row(a);
        const auto rb = data.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    return order;
}

} // namespace

std::string to_string(ScorerKind kind) {
    switch (kind) {
    case ScorerKind::knn: return "knn";
    case ScorerKind::mahalanobis: return "mahalanobis";
    case ScorerKind::oracle_mixture: return "oracle";
    }
    return "unknown";
}

ScorerKind scorer_kind_from_string(const std::string& name) {
    if (name == "knn") return ScorerKind::knn;
    if (name == "mahalanobis") return ScorerKind::mahalanobis;
    if (name == "oracle" || name == "oracle-mixture") return ScorerKind::oracle_mixture;
    throw std::invalid_argument("unknown scorer kind: " + name);
}

ScorerKind ScoreModel::kind() const noexcept {
    switch (model_.index()) {
    case 0: return ScorerKind::knn;
    case 1: return ScorerKind::mahalanobis;
    default: return ScorerKind::oracle_mixture;
    }
}

std::size_t ScoreModel::dim() const noexcept {
    return std::visit(
        [](const auto& m) -> std::size_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KnnModel>) return m.train.cols();
            else if constexpr (std::is_same_v<T, MahalanobisModel>) return m.dim;
            else return m.spec.dim;
        },
        model_);
}

double ScoreModel::score(std::span<const double> x) const {
    return std::visit(
        [x](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KnnModel>) return knn_score(m, x);
            else if constexpr (std::is_same_v<T, MahalanobisModel>) return mahalanobis_score(m, x);
            else return mixture_score(m, x);
        },
        model_);
}

std::vector<double> ScoreModel::score_rows(const DataMatrix& data, unsigned threads) const {
    std::vector<double> out(data.rows());
    parallel_for(data.rows(), threads, [&](std::size_t i) { out[i] = score(data.row(i)); });
    return out;
}

ScoreModel fit_knn(const DataMatrix& train, std::size_t k) {
    if (train.rows() == 0) {
        throw std::invalid_argument("fit_knn: empty training set");
    }
    if (k == 0 || k > train.rows()) {
        throw std::invalid_argument("fit_knn: k must lie in [1, rows]");
    }
    return ScoreModel(KnnModel{train, k});
}

ScoreModel fit_mahalanobis(const DataMatrix& train, double ridge) {
    if (train.rows() == 0) {
        throw std::invalid_argument("fit_mahalanobis: empty training set");
    }
    if (!(ridge >= 0.0)) {
        throw std::invalid_argument("fit_mahalanobis: ridge must be nonnegative");
    }
    const std::size_t d = train.cols();
    const std::size_t n = train.rows();
    if (ridge == 0.0 && n <= d) {
        throw std::invalid_argument("fit_mahalanobis: need rows > cols when ridge = 0");
    }

    const auto order = canonical_order(train);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t idx : order) {
        const auto r = train.row(idx);
        for (std::size_t j = 0; j < d; ++j) mean[static_cast<Eigen::Index>(j)] += r[j];
    }
    mean /= static_cast<double>(n);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t idx : order) {
        const auto r = train.row(idx);
        Eigen::VectorXd centered(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) {
            centered[static_cast<Eigen::Index>(j)] = r[j] - mean[static_cast<Eigen::Index>(j)];
        }
        cov.noalias() += centered * centered.transpose();
    }
    if (n > 1) {
        cov /= static_cast<double>(n - 1);
    }
    cov.diagonal().array() += ridge;

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("fit_mahalanobis: covariance is singular; use ridge > 0");
    }
    const Eigen::MatrixXd lower = llt.matrixL();
    const double max_pivot = lower.diagonal().maxCoeff();
    const double min_pivot = lower.diagonal().minCoeff();
    if (!(min_pivot > 1e-7 * max_pivot)) {
        throw std::invalid_argument("fit_mahalanobis: covariance is numerically singular; use ridge > 0");
    }

    MahalanobisModel model;
    model.dim = d;
    model.mean.assign(mean.data(), mean.data() + mean.size());
    model.cholesky.resize(d * d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            model.cholesky[i * d + j] = lower(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return ScoreModel(std::move(model));
}

ScoreModel oracle_mixture(const sim::MixtureSpec& spec, double a) {
    if (spec.centers.empty() || spec.dim == 0) {
        throw std::invalid_argument("oracle_mixture: empty mixture spec");
    }
    if (!(a >= 1.0)) {
        throw std::invalid_argument("oracle_mixture: signal strength a must be >= 1");
    }
    for (const auto& c : spec.centers) {
        if (c.size() != spec.dim) {
            throw std::invalid_argument("oracle_mixture: center dimension mismatch");
        }
    }
    return ScoreModel(MixtureModel{spec, a});
}

} // namespace ccv::scoring
