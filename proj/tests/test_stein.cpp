#include <catch_amalgamated.hpp>

#include <suretune/stein_edf.hpp>

using namespace suretune;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
bool within_se(double a, double b, double se, double k = 4.0) { return std::abs(a - b) <= k * se; }

Mat random_design(Index n, Index p, std::mt19937_64& rng) {
  Mat x(n, p);
  for (Index j = 0; j < p; ++j) x.col(j) = standard_normal(n, rng);
  return x;
}

/// Means-shrinkage hooks with only theta and G supplied.
SmoothFamilyHooks numeric_means_hooks(double sigma) {
  auto full = means_shrink_hooks(sigma);
  SmoothFamilyHooks hk;
  hk.theta = full.theta;
  hk.G = full.G;
  return hk;
}
}  // namespace

TEST_CASE("numeric divergence of linear rules") {
  std::mt19937_64 rng(1);
  Vec y = standard_normal(10, rng);
  CHECK_THAT(numeric_divergence([](const Vec& v) { return v; }, y, 1.0), WithinAbs(10.0, 1e-6));
  Mat x = random_design(10, 3, rng);
  ColumnProjector p(x);
  CHECK_THAT(numeric_divergence([&](const Vec& v) { return p.apply(v); }, y, 1.0), WithinAbs(3.0, 1e-6));
  ShrinkMeansFamily f(10, 2.0);
  CHECK_THAT(numeric_divergence(fixed_rule(f, Tuning::value(1.5)), y, 2.0), WithinAbs(10.0 / 2.5, 1e-6));
}

TEST_CASE("numeric divergence matches Monte Carlo df for fixed rules") {
  Vec sig(6);
  sig << 0.5, 0.8, 1.0, 1.5, 2.0, 3.0;
  HeteroShrinkFamily f(sig);
  auto model = GaussianModel::heteroskedastic(Vec::LinSpaced(6, -1, 2), sig);
  const auto rule = fixed_rule(f, Tuning::value(0.4));
  auto df = mc_df(rule, model, 4000, 3);
  std::vector<double> div(4000);
  for (long r = 0; r < 4000; ++r) {
    auto rng = make_stream(3, {static_cast<std::uint64_t>(r), 0});
    div[static_cast<std::size_t>(r)] = numeric_divergence(rule, draw(model, rng), model.noise());
  }
  auto dm = mean_estimate(div);
  // Optimism in scaled units is 2 df.
  CHECK(within_se(2.0 * df.mean, 2.0 * dm.mean, 2.0 * combined_se(df, dm)));
  CHECK_THAT(dm.mean, WithinRel(f.naive_df(Tuning::value(0.4), Vec::Zero(6)), 1e-6));
}

TEST_CASE("closed-form and numeric hooks agree") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  Vec sig = (Vec::Random(7).array() * 0.5 + 1.0).matrix();
  const std::vector<SmoothFamilyHooks> all = {means_shrink_hooks(1.3), hetero_shrink_hooks(sig)};
  for (const auto& full : all) {
    SmoothFamilyHooks num;
    num.theta = full.theta;
    num.G = full.G;
    for (int k = 0; k < 30; ++k) {
      Vec y = standard_normal(7, rng) * 2.0;
      const double s = u(rng);
      auto rel = [](double a, double b) { return std::abs(a - b) <= 1e-4 * std::max(1.0, std::abs(b)); };
      CHECK(rel(hooks_dG_ds(num, y, s), hooks_dG_ds(full, y, s)));
      CHECK(rel(hooks_d2G_ds2(num, y, s), hooks_d2G_ds2(full, y, s)));
      CHECK((hooks_dtheta_ds(num, y, s) - hooks_dtheta_ds(full, y, s)).norm() <=
            1e-4 * std::max(1.0, hooks_dtheta_ds(full, y, s).norm()));
      CHECK((hooks_d2G_dYds(num, y, s) - hooks_d2G_dYds(full, y, s)).norm() <=
            1e-4 * std::max(1.0, hooks_d2G_dYds(full, y, s).norm()));
    }
  }
}

TEST_CASE("implicit differentiation reproduces the shrinkage edf") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int used = 0;
  const auto closed = means_shrink_hooks(1.0);
  const auto numeric = numeric_means_hooks(1.0);
  while (used < 100) {
    Vec y = standard_normal(20, rng) * (1.0 + 2.0 * u(rng));
    auto fit = tune_shrink_means(y, 1.0);
    if (fit.s_hat.is_infinite()) continue;
    ++used;
    const double target = edf_unbiased_shrink(fit);
    CHECK_THAT(edf_implicit_diff(closed, y, fit.s_hat.scalar()), WithinAbs(target, 1e-4));
    CHECK_THAT(edf_implicit_diff(numeric, y, fit.s_hat.scalar()), WithinAbs(target, 1e-4));
  }

  Mat x = random_design(15, 4, rng);
  ShrinkRegressionFamily reg(x, 0.7);
  const auto hk = regression_shrink_hooks(reg.projector(), 0.7);
  used = 0;
  while (used < 50) {
    Vec y = x * standard_normal(4, rng) * 0.3 + 0.7 * standard_normal(15, rng);
    auto fit = reg.tune(y);
    if (fit.s_hat.is_infinite()) continue;
    ++used;
    CHECK_THAT(edf_implicit_diff(hk, y, fit.s_hat.scalar()), WithinAbs(edf_unbiased_shrink(fit), 1e-4));
  }
}

TEST_CASE("implicit differentiation checks its preconditions") {
  const auto hk = means_shrink_hooks(1.0);
  Vec y = Vec::Constant(4, 2.0);  // ||Y||^2 = 16, s_hat = 1/3
  CHECK_THROWS_AS(edf_implicit_diff(hk, y, 2.0), stationarity_error);
  CHECK_THROWS_AS(edf_implicit_diff(hk, y, kInf), stationarity_error);
  // A stationary maximum: G(s) = -(s-1)^2.
  SmoothFamilyHooks bad;
  bad.theta = [](const Vec& v, double s) { return Vec(v / (1 + s)); };
  bad.G = [](const Vec&, double s) { return -(s - 1) * (s - 1); };
  CHECK_THROWS_AS(edf_implicit_diff(bad, y, 1.0), curvature_error);
}

TEST_CASE("implicit differentiation averaged over draws") {
  const Index n = 30;
  ShrinkMeansFamily f(n, 1.0);
  Vec th = Vec::Constant(n, 0.8);
  auto model = GaussianModel::homoskedastic(th, 1.0);
  const auto hk = means_shrink_hooks(1.0);
  const long reps = 3000;
  Mat table(reps, 2);
  parallel_for(reps, 0, [&](long r) {
    auto rng = make_stream(9, {static_cast<std::uint64_t>(r), 0});
    const Vec y = draw(model, rng);
    const auto fit = f.tune(y);
    table(r, 0) = fit.s_hat.is_infinite() ? 0.0 : edf_implicit_diff(hk, y, fit.s_hat.scalar());
    table(r, 1) = fit.theta_hat.dot(y - th) - fit.naive_df_at_shat;
  });
  auto e = column_estimates(table);
  CHECK(within_se(e[0].mean, e[1].mean, combined_se(e[0], e[1])));
}

TEST_CASE("heteroskedastic excess optimism ratio") {
  std::mt19937_64 rng(11);
  // Equal variances reduce to the homoskedastic ExOpt 2 sigma^2 (2 s/(1+s)).
  for (double sigma : {0.5, 1.0, 2.5}) {
    for (int k = 0; k < 20; ++k) {
      Vec y = standard_normal(12, rng) * sigma * 2.0;
      auto hom = tune_shrink_means(y, sigma);
      if (hom.s_hat.is_infinite()) continue;
      const Vec sig = Vec::Constant(12, sigma);
      auto het = tune_hetero_shrink(y, sig);
      REQUIRE_FALSE(het.s_hat.is_infinite());
      CHECK_THAT(het.s_hat.scalar() * sigma * sigma, WithinRel(hom.s_hat.scalar(), 1e-6));
      const double homo_exopt = 2.0 * sigma * sigma * edf_unbiased_shrink(hom);
      const double ratio = exopt_hetero_shrink(y, sig, hom.s_hat.scalar() / (sigma * sigma));
      CHECK_THAT(sigma * sigma * ratio, WithinAbs(homo_exopt, 1e-8));
    }
  }
  CHECK(exopt_hetero_shrink(Vec::Zero(5), Vec::Ones(5), 1.0) == 0.0);

  // Unequal variances: ratio is twice the implicit-differentiation edf.
  for (int k = 0; k < 30; ++k) {
    Vec sig = (Vec::Random(8).array().abs() * 2.0 + 0.3).matrix();
    Vec y = standard_normal(8, rng).cwiseProduct(sig) * 2.0;
    auto fit = tune_hetero_shrink(y, sig);
    if (fit.s_hat.is_infinite()) continue;
    const double s = fit.s_hat.scalar();
    double curv = 0.0;
    try {
      curv = hooks_d2G_ds2(hetero_shrink_hooks(sig), y, s);
    } catch (...) {
    }
    if (curv <= 0.0) continue;
    const double edf = edf_implicit_diff(hetero_shrink_hooks(sig), y, s);
    CHECK_THAT(exopt_hetero_shrink(y, sig, s), WithinRel(2.0 * edf, 1e-8));
  }
}

TEST_CASE("heteroskedastic tuning") {
  auto fit = tune_hetero_shrink(Vec::Zero(6), Vec::LinSpaced(6, 0.5, 2.0));
  CHECK(fit.s_hat.is_infinite());
  CHECK(fit.theta_hat.isZero());

  std::mt19937_64 rng(13);
  for (int k = 0; k < 20; ++k) {
    Vec sig = (Vec::Random(10).array().abs() * 3.0 + 0.2).matrix();
    Vec y = standard_normal(10, rng).cwiseProduct(sig) * (1.0 + k % 3);
    fit = tune_hetero_shrink(y, sig);
    // 1e5-point grid over s = expm1(x), x in [0, 25], plus s = inf.
    double grid_min = hetero_sure(y, sig, kInf);
    for (int g = 0; g < 100000; ++g) grid_min = std::min(grid_min, hetero_sure(y, sig, std::expm1(25.0 * g / 99999.0)));
    CHECK(fit.sure_min <= grid_min + 1e-9 * (1.0 + grid_min));
    HeteroShrinkFamily f(sig);
    CHECK_THAT(fit.sure_min, WithinRel(sure(f, fit.s_hat, y), 1e-9));
  }
}

TEST_CASE("heteroskedastic multimodality is flagged") {
  // Two variance groups with separated minimizers: local minima near s = 0.0033 and s = 33.
  Vec sig(8), y(8);
  sig << 0.1, 0.1, 0.1, 0.1, 10.0, 10.0, 10.0, 10.0;
  y << 0.2, 0.21, -0.19, 0.2, 20.0, -21.0, 19.0, 20.5;
  auto fit = tune_hetero_shrink(y, sig);
  double grid_min = hetero_sure(y, sig, kInf);
  int local = 0;
  double prev2 = kInf, prev = kInf;
  for (int g = 0; g <= 200000; ++g) {
    const double v = hetero_sure(y, sig, std::exp(-20.0 + 40.0 * g / 200000.0));
    grid_min = std::min(grid_min, v);
    if (prev < prev2 && prev < v) ++local;
    prev2 = prev;
    prev = v;
  }
  CHECK(fit.sure_min <= grid_min + 1e-9 * (1.0 + grid_min));
  CHECK(local == 2);
  CHECK(fit.multimodal);
  CHECK_THAT(fit.s_hat.scalar(), WithinRel(3.2735e-3, 1e-3));

  // A single group is unimodal.
  auto one = tune_hetero_shrink(y.tail(4), sig.tail(4));
  CHECK_FALSE(one.multimodal);
}

TEST_CASE("ridge through the rotated family") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Index n = 5 + k % 6, p = 1 + k % 5;
    Mat x = random_design(n, p, rng);
    Vec y = standard_normal(n, rng);
    const double lambda = 3.0 * u(rng);
    const double sigma = 0.5 + u(rng);
    auto rh = ridge_as_hetero(x, y, sigma);
    Mat a = x.transpose() * x;
    a.diagonal().array() += lambda;
    const Vec beta = a.ldlt().solve(x.transpose() * y);
    CHECK((rh.fitted(lambda) - x * beta).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((rh.coefficients(lambda) - beta).cwiseAbs().maxCoeff() <= 1e-8);
  }
  // Spec example size: 5 x 3 at s = 0.7.
  Mat x = random_design(5, 3, rng);
  Vec y = standard_normal(5, rng);
  auto rh = ridge_as_hetero(x, y);
  Mat a = x.transpose() * x;
  a.diagonal().array() += 0.7;
  CHECK((rh.fitted(0.7) - x * a.ldlt().solve(x.transpose() * y)).norm() <= 1e-8);
  // s = 0 is least squares.
  CHECK((rh.fitted(0.0) - x * least_squares(x, y)).norm() <= 1e-8);

  // Orthonormal columns: all d_i = 1, plain means shrinkage of U^T Y.
  Mat q = Eigen::HouseholderQR<Mat>(random_design(8, 3, rng)).householderQ() * Mat::Identity(8, 3);
  Vec yq = standard_normal(8, rng);
  auto ro = ridge_as_hetero(q, yq);
  CHECK((ro.d.array() - 1.0).abs().maxCoeff() < 1e-12);
  auto het = ro.family.tune(ro.w);
  auto hom = tune_shrink_means(ro.w, 1.0);
  if (!hom.s_hat.is_infinite()) CHECK_THAT(het.s_hat.scalar(), WithinRel(hom.s_hat.scalar(), 1e-6));

  // Rank-deficient design works on the rank-r reduction.
  Mat xd(6, 3);
  Mat base = random_design(6, 2, rng);
  xd << base, base.col(0) - base.col(1);
  Vec yd = standard_normal(6, rng);
  auto rd = ridge_as_hetero(xd, yd);
  CHECK(rd.d.size() == 2);
  Mat ad = xd.transpose() * xd;
  ad.diagonal().array() += 0.9;
  CHECK((rd.fitted(0.9) - xd * ad.ldlt().solve(xd.transpose() * yd)).norm() <= 1e-8);
  CHECK((rd.fitted(0.0) - xd * least_squares(xd, yd)).norm() <= 1e-8);
}

TEST_CASE("ridge SURE equals the rotated SURE plus the residual outside col(X)") {
  std::mt19937_64 rng(19);
  Mat x = random_design(9, 4, rng);
  Vec y = standard_normal(9, rng) * 1.5;
  const double sigma = 1.2, lambda = 2.0;
  auto rh = ridge_as_hetero(x, y, sigma);
  Mat a = x.transpose() * x;
  a.diagonal().array() += lambda;
  const Mat h = x * a.ldlt().solve(x.transpose());
  const double direct = (y - h * y).squaredNorm() + 2 * sigma * sigma * h.trace();
  const Vec outside = y - rh.u * (rh.u.transpose() * y);
  const double rotated = sigma * sigma * sure(rh.family, Tuning::value(rh.s_for_lambda(lambda)), rh.w);
  CHECK_THAT(rotated + outside.squaredNorm(), WithinRel(direct, 1e-10));
}
