#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "core.hpp"

namespace suretune {

/// Relative pivot tolerance used to decide numerical rank.
inline constexpr double kRankTolerance = 1e-10;

/**
 * Orthogonal projection onto col(X), held as an orthonormal basis taken from
 * a column-pivoted Householder QR. The n x n projector is never formed.
 */
class ColumnProjector {
 public:
  ColumnProjector() = default;

  explicit ColumnProjector(const Mat& x) : n_(x.rows()) {
    if (x.cols() == 0 || x.rows() == 0) {
      basis_ = Mat::Zero(n_, 0);
      return;
    }
    Eigen::ColPivHouseholderQR<Mat> qr(x);
    // Pivot magnitudes are compared against the largest column norm.
    qr.setThreshold(kRankTolerance);
    const Index r = qr.rank();
    basis_ = qr.householderQ() * Mat::Identity(n_, r);
  }

  Index rows() const { return n_; }
  Index rank() const { return basis_.cols(); }
  const Mat& basis() const { return basis_; }

  Vec apply(const Vec& y) const {
    if (rank() == 0) return Vec::Zero(n_);
    return basis_ * (basis_.transpose() * y);
  }
  /// ||P y||^2 without forming P y.
  double squared_norm_of_projection(const Vec& y) const {
    if (rank() == 0) return 0.0;
    return (basis_.transpose() * y).squaredNorm();
  }

 private:
  Index n_ = 0;
  Mat basis_;
};

/// Columns of x listed in idx (0-based).
inline Mat select_columns(const Mat& x, const std::vector<std::size_t>& idx) {
  Mat out(x.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= static_cast<std::size_t>(x.cols())) {
      throw std::out_of_range("select_columns: column index out of range");
    }
    out.col(static_cast<Index>(j)) = x.col(static_cast<Index>(idx[j]));
  }
  return out;
}

inline Index numerical_rank(const Mat& x) { return ColumnProjector(x).rank(); }

/// Least-squares coefficients of y on x (minimum-norm when rank deficient).
inline Vec least_squares(const Mat& x, const Vec& y) {
  if (x.cols() == 0) return Vec::Zero(0);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(x);
  cod.setThreshold(kRankTolerance);
  return cod.solve(y);
}

}  // namespace suretune
