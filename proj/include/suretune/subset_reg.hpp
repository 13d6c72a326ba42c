#pragma once

// Subset regression tuned by Cp: theta_s(Y) = P_{X_s} Y over a collection of
// column subsets, nested-chain helpers, the two-model closed-form edf and the
// Lagrangian best-subset estimator.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "linalg.hpp"
#include "monte_carlo.hpp"

namespace suretune {

using Subset = std::vector<std::size_t>;

/// Largest p accepted by exhaustive all-subsets search.
inline constexpr std::size_t kMaxExhaustiveP = 25;

/// "{}" or "{1,3}" with 1-based column numbers.
inline std::string subset_label(const Subset& s) {
  std::string out = "{";
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(s[k] + 1);
  }
  return out + "}";
}

/// Smaller size first, then lexicographic on sorted indices.
inline bool subset_precedes(const Subset& a, const Subset& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

/**
 * A design matrix with a fixed family of column subsets (0-based). Every
 * subset carries its own projector and rank r_s = rank(X_s).
 */
class SubsetCollection {
 public:
  SubsetCollection(const Mat& x, std::vector<Subset> subsets) : x_(x), subsets_(std::move(subsets)) {
    if (subsets_.empty()) throw std::invalid_argument("SubsetCollection: no subsets");
    const auto p = static_cast<std::size_t>(x_.cols());
    for (auto& s : subsets_) {
      std::sort(s.begin(), s.end());
      if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
        throw std::invalid_argument("SubsetCollection: repeated column in " + subset_label(s));
      }
      if (!s.empty() && s.back() >= p) {
        throw std::out_of_range("SubsetCollection: column index out of range in " + subset_label(s));
      }
    }
    std::vector<const Subset*> order;
    order.reserve(subsets_.size());
    for (const auto& s : subsets_) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const Subset* a, const Subset* b) { return *a < *b; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (*order[i] == *order[i - 1]) {
        throw std::invalid_argument("SubsetCollection: duplicate subset " + subset_label(*order[i]));
      }
    }
    proj_.reserve(subsets_.size());
    for (const auto& s : subsets_) proj_.emplace_back(select_columns(x_, s));
    nested_ = true;
    for (std::size_t i = 0; i < subsets_.size() && nested_; ++i) {
      for (std::size_t j = i + 1; j < subsets_.size(); ++j) {
        const auto& a = subsets_[i];
        const auto& b = subsets_[j];
        const bool ab = std::includes(b.begin(), b.end(), a.begin(), a.end());
        const bool ba = std::includes(a.begin(), a.end(), b.begin(), b.end());
        if (!ab && !ba) {
          nested_ = false;
          break;
        }
      }
    }
  }

  /// Every subset of {0..p-1}, p <= kMaxExhaustiveP.
  static SubsetCollection all_subsets(const Mat& x) {
    const auto p = static_cast<std::size_t>(x.cols());
    if (p > kMaxExhaustiveP) {
      throw std::length_error("SubsetCollection::all_subsets: p = " + std::to_string(p) +
                              " exceeds the exhaustive-search limit " +
                              std::to_string(kMaxExhaustiveP));
    }
    std::vector<Subset> subs;
    subs.reserve(std::size_t{1} << p);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p); ++mask) {
      Subset s;
      for (std::size_t j = 0; j < p; ++j) {
        if (mask >> j & 1u) s.push_back(j);
      }
      subs.push_back(std::move(s));
    }
    return SubsetCollection(x, std::move(subs));
  }

  const Mat& design() const { return x_; }
  Index rows() const { return x_.rows(); }
  std::size_t size() const { return subsets_.size(); }
  bool nested() const { return nested_; }
  const Subset& subset(std::size_t k) const { return subsets_.at(k); }
  const std::vector<Subset>& subsets() const { return subsets_; }
  const ColumnProjector& projector(std::size_t k) const { return proj_.at(k); }
  Index rank(std::size_t k) const { return proj_.at(k).rank(); }
  std::size_t max_rank() const {
    Index m = 0;
    for (const auto& p : proj_) m = std::max(m, p.rank());
    return static_cast<std::size_t>(m);
  }

  /// Position of s in the collection.
  std::size_t find(Subset s) const {
    std::sort(s.begin(), s.end());
    for (std::size_t k = 0; k < subsets_.size(); ++k) {
      if (subsets_[k] == s) return k;
    }
    throw std::domain_error("SubsetCollection: subset " + subset_label(s) + " not in collection");
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(subsets_.size());
    for (const auto& s : subsets_) out.push_back(subset_label(s));
    return out;
  }

 private:
  Mat x_;
  std::vector<Subset> subsets_;
  std::vector<ColumnProjector> proj_;
  bool nested_ = false;
};

/// Prefix chain {0..k-1} for each k in prefix_sizes (0 gives the empty model).
inline SubsetCollection make_nested(const Mat& x, const std::vector<std::size_t>& prefix_sizes) {
  if (prefix_sizes.empty()) throw std::invalid_argument("make_nested: empty chain");
  std::vector<Subset> subs;
  for (auto k : prefix_sizes) {
    if (k > static_cast<std::size_t>(x.cols())) {
      throw std::out_of_range("make_nested: prefix size exceeds the number of columns");
    }
    Subset s(k);
    for (std::size_t j = 0; j < k; ++j) s[j] = j;
    subs.push_back(std::move(s));
  }
  return SubsetCollection(x, std::move(subs));
}

/// Full chain {}, {1}, {1,2}, ..., {1..p}.
inline SubsetCollection make_full_chain(const Mat& x) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(x.cols()) + 1);
  for (std::size_t k = 0; k < sizes.size(); ++k) sizes[k] = k;
  return make_nested(x, sizes);
}

/// The two nested models {1..p-1} and {1..p}.
inline SubsetCollection make_two_model(const Mat& x) {
  const auto p = static_cast<std::size_t>(x.cols());
  if (p < 1) throw std::invalid_argument("make_two_model: X needs at least one column");
  return make_nested(x, {p - 1, p});
}

/// ||Y - P_s Y||^2 + 2 sigma^2 r_s.
inline double cp_criterion(const SubsetCollection& coll, std::size_t k, const Vec& y, double sigma) {
  if (k >= coll.size()) throw std::domain_error("cp_criterion: unknown subset index");
  require_dim(y, coll.rows(), "cp_criterion");
  const auto& p = coll.projector(k);
  return (y - p.apply(y)).squaredNorm() + 2.0 * sigma * sigma * static_cast<double>(p.rank());
}

inline double cp_criterion(const SubsetCollection& coll, const Subset& s, const Vec& y, double sigma) {
  return cp_criterion(coll, coll.find(s), y, sigma);
}

/// Projection estimators over a subset collection, tuned by Cp.
class SubsetRegressionFamily {
 public:
  SubsetRegressionFamily(SubsetCollection coll, double sigma)
      : coll_(std::move(coll)),
        noise_(NoiseSpec::homoskedastic(sigma)),
        domain_(TuningDomain::discrete(coll_.labels())) {}

  Index dim() const { return coll_.rows(); }
  double sigma() const { return noise_.sigma(); }
  const SubsetCollection& collection() const { return coll_; }
  const NoiseSpec& noise() const { return noise_; }
  const TuningDomain& domain() const { return domain_; }

  Vec estimate(const Tuning& s, const Vec& y) const {
    const std::size_t k = index_of(s, "SubsetRegressionFamily::estimate");
    require_dim(y, dim(), "SubsetRegressionFamily::estimate");
    return coll_.projector(k).apply(y);
  }
  double naive_df(const Tuning& s, const Vec& y) const {
    const std::size_t k = index_of(s, "SubsetRegressionFamily::naive_df");
    require_dim(y, dim(), "SubsetRegressionFamily::naive_df");
    return static_cast<double>(coll_.rank(k));
  }

  /// Exhaustive Cp minimization; ties go to the smaller r_s, then to the lexicographically first subset.
  TunedFit tune(const Vec& y) const {
    require_dim(y, dim(), "SubsetRegressionFamily::tune");
    std::size_t best = 0;
    double best_val = kInf;
    Vec best_fit;
    for (std::size_t k = 0; k < coll_.size(); ++k) {
      Vec fit = coll_.projector(k).apply(y);
      const double val = (y - fit).squaredNorm() + 2.0 * sigma() * sigma() * static_cast<double>(coll_.rank(k));
      if (k == 0 || val < best_val - tie_tol(best_val) ||
          (val <= best_val + tie_tol(best_val) && prefer(k, best))) {
        best = k;
        best_val = val;
        best_fit = std::move(fit);
      }
    }
    TunedFit out;
    out.s_hat = Tuning::label(best);
    out.theta_hat = std::move(best_fit);
    out.sure_min = best_val;
    out.naive_df_at_shat = static_cast<double>(coll_.rank(best));
    return out;
  }

  /// Exact Risk of member k: ||(I - P_s) theta0||^2 + sigma^2 r_s.
  double exact_risk(std::size_t k, const GaussianModel& model) const {
    const Vec& th = model.theta0();
    const double s2 = model.noise().sigma() * model.noise().sigma();
    return (th - coll_.projector(k).apply(th)).squaredNorm() + s2 * static_cast<double>(coll_.rank(k));
  }

  /// Exhaustive oracle over members, same tie rule as tune().
  OracleResult oracle(const GaussianModel& model) const {
    require_dim(model.theta0(), dim(), "SubsetRegressionFamily::oracle");
    std::size_t best = 0;
    double best_risk = kInf;
    for (std::size_t k = 0; k < coll_.size(); ++k) {
      const double r = exact_risk(k, model);
      if (k == 0 || r < best_risk - tie_tol(best_risk) ||
          (r <= best_risk + tie_tol(best_risk) && prefer(k, best))) {
        best = k;
        best_risk = r;
      }
    }
    const double s2 = model.noise().sigma() * model.noise().sigma();
    return {Tuning::label(best), best_risk + static_cast<double>(dim()) * s2, best_risk};
  }

 private:
  static double tie_tol(double v) { return 1e-12 * (1.0 + std::abs(v)); }

  bool prefer(std::size_t a, std::size_t b) const {
    if (coll_.rank(a) != coll_.rank(b)) return coll_.rank(a) < coll_.rank(b);
    return subset_precedes(coll_.subset(a), coll_.subset(b));
  }

  std::size_t index_of(const Tuning& s, const char* where) const {
    if (!domain_.contains(s)) {
      throw std::domain_error(std::string(where) + ": tuning value " + s.to_string() +
                              " is not a subset of this collection");
    }
    return s.index();
  }

  SubsetCollection coll_;
  NoiseSpec noise_;
  TuningDomain domain_;
};

inline TunedFit tune_cp(const SubsetCollection& coll, const Vec& y, double sigma) {
  return SubsetRegressionFamily(coll, sigma).tune(y);
}

/**
 * Gram-Schmidt basis of the columns in order: v_j = P_{j-1}^perp X_j / ||.||,
 * where P_{j-1} projects onto the first j-1 columns.
 */
inline Mat gram_schmidt_basis(const Mat& x) {
  Eigen::HouseholderQR<Mat> qr(x);
  const Index p = x.cols();
  if (p > x.rows()) throw std::domain_error("gram_schmidt_basis: more columns than rows");
  Mat q = qr.householderQ() * Mat::Identity(x.rows(), p);
  const Mat r = qr.matrixQR().topRows(p).template triangularView<Eigen::Upper>();
  const double scale = std::max(1.0, x.colwise().norm().maxCoeff());
  for (Index j = 0; j < p; ++j) {
    if (std::abs(r(j, j)) <= kRankTolerance * scale) {
      throw std::domain_error("gram_schmidt_basis: column " + std::to_string(j + 1) +
                              " lies in the span of the previous columns");
    }
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// mu = V^T theta0 / sigma for the Gram-Schmidt basis V of X.
inline Vec chain_coordinates(const Mat& x, const Vec& theta0, double sigma) {
  require_dim(theta0, x.rows(), "chain_coordinates");
  return gram_schmidt_basis(x).transpose() * theta0 / sigma;
}

/// sqrt(2) [phi(sqrt2 - m) + phi(sqrt2 + m)] for m = v_p^T theta0 / sigma.
inline double edf_two_model_exact(const Mat& x, const Vec& theta0, double sigma) {
  if (x.cols() < 1) throw std::domain_error("edf_two_model_exact: X needs at least one column");
  const Vec mu = chain_coordinates(x, theta0, sigma);
  const double m = mu[mu.size() - 1];
  const double r2 = std::sqrt(2.0);
  return r2 * (std_normal_pdf(r2 - m) + std_normal_pdf(r2 + m));
}

/// Result of the Lagrangian best-subset search.
struct BestSubsetFit {
  Subset support;
  Vec beta;       // length p, zero off the support
  Vec fitted;     // X beta
  double criterion = 0.0;
};

/**
 * Best subset with penalty lambda ||beta||_0, caching the projector of every
 * subset. Construction cost is 2^p factorizations.
 */
class BestSubsetSelector {
 public:
  explicit BestSubsetSelector(const Mat& x) : coll_(SubsetCollection::all_subsets(x)) {}

  const SubsetCollection& collection() const { return coll_; }

  BestSubsetFit fit(const Vec& y, double lambda) const {
    require_dim(y, coll_.rows(), "BestSubsetSelector::fit");
    if (!(lambda >= 0.0)) throw std::domain_error("BestSubsetSelector::fit: lambda must be >= 0");
    std::size_t best = 0;
    double best_val = kInf;
    for (std::size_t k = 0; k < coll_.size(); ++k) {
      const auto& s = coll_.subset(k);
      const double rss = y.squaredNorm() - coll_.projector(k).squared_norm_of_projection(y);
      const double val = std::max(rss, 0.0) + lambda * static_cast<double>(s.size());
      const double tol = 1e-12 * (1.0 + std::abs(best_val));
      if (k == 0 || val < best_val - tol ||
          (val <= best_val + tol && subset_precedes(s, coll_.subset(best)))) {
        best = k;
        best_val = val;
      }
    }
    BestSubsetFit out;
    out.support = coll_.subset(best);
    out.beta = Vec::Zero(coll_.design().cols());
    const Vec b = least_squares(select_columns(coll_.design(), out.support), y);
    for (std::size_t j = 0; j < out.support.size(); ++j) {
      out.beta[static_cast<Index>(out.support[j])] = b[static_cast<Index>(j)];
    }
    out.fitted = coll_.design() * out.beta;
    out.criterion = best_val;
    return out;
  }

 private:
  SubsetCollection coll_;
};

/**
 * argmin ||Y - X beta||^2 + lambda ||beta||_0 by exhaustive search
 * (p <= kMaxExhaustiveP). Projections are formed on the fly; use
 * BestSubsetSelector for repeated fits on one design.
 */
inline Vec best_subset_lagrangian(const Mat& x, const Vec& y, double lambda) {
  require_dim(y, x.rows(), "best_subset_lagrangian");
  if (!(lambda >= 0.0)) throw std::domain_error("best_subset_lagrangian: lambda must be >= 0");
  const auto p = static_cast<std::size_t>(x.cols());
  if (p > kMaxExhaustiveP) {
    throw std::length_error("best_subset_lagrangian: p = " + std::to_string(p) +
                            " exceeds the exhaustive-search limit " + std::to_string(kMaxExhaustiveP));
  }
  Subset best;
  double best_val = kInf;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p); ++mask) {
    Subset s;
    for (std::size_t j = 0; j < p; ++j) {
      if (mask >> j & 1u) s.push_back(j);
    }
    const double rss = y.squaredNorm() - ColumnProjector(select_columns(x, s)).squared_norm_of_projection(y);
    const double val = std::max(rss, 0.0) + lambda * static_cast<double>(s.size());
    const double tol = 1e-12 * (1.0 + std::abs(best_val));
    if (mask == 0 || val < best_val - tol || (val <= best_val + tol && subset_precedes(s, best))) {
      best = std::move(s);
      best_val = val;
    }
  }
  Vec beta = Vec::Zero(x.cols());
  const Vec b = least_squares(select_columns(x, best), y);
  for (std::size_t j = 0; j < best.size(); ++j) beta[static_cast<Index>(best[j])] = b[static_cast<Index>(j)];
  return beta;
}

}  // namespace suretune
