#ifndef CCV_SCORING_HPP
#define CCV_SCORING_HPP

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ccv/data_matrix.hpp"
#include "ccv/sim/mixture.hpp"

namespace ccv::scoring {

/*
 * One-class score functions. Convention throughout the library: smaller
 * scores are more outlying, so conformal p-values count calibration scores
 * <= the test score. Adapters for scorers with the opposite orientation
 * should negate.
 */

enum class ScorerKind { knn, mahalanobis, oracle_mixture };

std::string to_string(ScorerKind kind);
ScorerKind scorer_kind_from_string(const std::string& name);

struct KnnModel {
    DataMatrix train;
    std::size_t k;
};

struct MahalanobisModel {
    std::vector<double> mean;
    std::vector<double> cholesky;  // lower factor of (cov + ridge I), row-major dim x dim
    std::size_t dim;
};

struct MixtureModel {
    sim::MixtureSpec spec;
    double a;
};

/// Immutable fitted scorer; score() is thread-safe.
class ScoreModel {
public:
    explicit ScoreModel(KnnModel m) : model_(std::move(m)) {}
    explicit ScoreModel(MahalanobisModel m) : model_(std::move(m)) {}
    explicit ScoreModel(MixtureModel m) : model_(std::move(m)) {}

    ScorerKind kind() const noexcept;
    std::size_t dim() const noexcept;

    double score(std::span<const double> x) const;
    std::vector<double> score_rows(const DataMatrix& data, unsigned threads = 1) const;

private:
    std::variant<KnnModel, MahalanobisModel, MixtureModel> model_;
};

/// score(x) = -(mean Euclidean distance to the k nearest training rows).
/// Ties in distance are broken by training-row index.
ScoreModel fit_knn(const DataMatrix& train, std::size_t k);

/// score(x) = -sqrt((x - mu)^T (Sigma + ridge I)^{-1} (x - mu)), Sigma the sample covariance.
ScoreModel fit_mahalanobis(const DataMatrix& train, double ridge);

/// score(x) = log density of P_X^a at x.
ScoreModel oracle_mixture(const sim::MixtureSpec& spec, double a);

} // namespace ccv::scoring

#endif // CCV_SCORING_HPP
