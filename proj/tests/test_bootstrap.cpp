#include <catch_amalgamated.hpp>

#include <suretune/bootstrap_edf.hpp>
#include <suretune/shrinkage.hpp>
#include <suretune/subset_reg.hpp>

using namespace suretune;
using Catch::Matchers::WithinAbs;

namespace {
bool within_se(double a, double b, double se, double k = 4.0) { return std::abs(a - b) <= k * se; }

// Shrinkage at one fixed s, dressed up as a tuned family.
struct FixedShrink {
  Index n;
  double s;
  NoiseSpec nz;
  TuningDomain dom = TuningDomain::interval(0.0, kInf);
  Index dim() const { return n; }
  const NoiseSpec& noise() const { return nz; }
  TuningDomain domain() const { return dom; }
  Vec estimate(const Tuning&, const Vec& y) const { return y / (1.0 + s); }
  double naive_df(const Tuning&, const Vec&) const { return n / (1.0 + s); }
  TunedFit tune(const Vec& y) const {
    TunedFit f;
    f.s_hat = Tuning::value(s);
    f.theta_hat = estimate(f.s_hat, y);
    f.naive_df_at_shat = naive_df(f.s_hat, y);
    f.sure_min = sure(*this, f.s_hat, y);
    return f;
  }
};

// Ignores the data entirely.
struct ConstantRule {
  Vec c;
  NoiseSpec nz = NoiseSpec::homoskedastic(1.0);
  TuningDomain dom = TuningDomain::interval(0.0, 0.0);
  Index dim() const { return c.size(); }
  const NoiseSpec& noise() const { return nz; }
  TuningDomain domain() const { return dom; }
  Vec estimate(const Tuning&, const Vec&) const { return c; }
  double naive_df(const Tuning&, const Vec&) const { return 0.0; }
  TunedFit tune(const Vec& y) const {
    TunedFit f;
    f.theta_hat = c;
    f.sure_min = sure(*this, f.s_hat, y);
    return f;
  }
};

Vec draw_y(const GaussianModel& m, std::uint64_t seed) {
  auto rng = make_stream(seed, {0});
  return draw(m, rng);
}
}  // namespace

TEST_CASE("config validation") {
  ShrinkMeansFamily fam(5, 1.0);
  Vec y = Vec::Ones(5);
  BootstrapConfig cfg;
  cfg.B = 1;
  CHECK_THROWS_AS(bootstrap_edf(fam, y, cfg), std::invalid_argument);
  cfg.B = 10;
  cfg.sampler = BootstrapSampler::bigmodel;
  cfg.c = 0.0;
  CHECK_THROWS_AS(bootstrap_edf(fam, y, cfg), std::invalid_argument);
  cfg.c = 1.5;
  CHECK_THROWS_AS(bootstrap_edf(fam, y, cfg), std::invalid_argument);
  cfg.c = 0.5;
  CHECK_NOTHROW(bootstrap_edf(fam, y, cfg));
  CHECK_THROWS(bootstrap_edf(fam, Vec::Ones(4), BootstrapConfig{}));
}

TEST_CASE("identity rule has df near n and edf near 0") {
  const Index n = 10;
  SubsetRegressionFamily fam(SubsetCollection(Mat::Identity(n, n), {Subset{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}), 1.0);
  const Vec y = draw_y(GaussianModel::homoskedastic(Vec::Zero(n), 1.0), 3);
  for (auto smp : {BootstrapSampler::parametric, BootstrapSampler::bigmodel}) {
    BootstrapConfig cfg;
    cfg.B = 2000;
    cfg.sampler = smp;
    const auto run = bootstrap_run(fam, y, cfg);
    CHECK(run.naive_df.mean == n);
    CHECK(within_se(run.df.mean, n * (cfg.B - 1.0) / cfg.B, run.df.std_error));
    CHECK(within_se(run.edf.mean, -double(n) / cfg.B, run.edf.std_error));
  }
}

TEST_CASE("fixed shrinkage has df n/(1+s)") {
  const Index n = 20;
  for (double s : {0.0, 0.5, 3.0}) {
    FixedShrink fam{n, s, NoiseSpec::homoskedastic(2.0)};
    const Vec y = draw_y(GaussianModel::homoskedastic(Vec::Constant(n, 1.0), 2.0), 11);
    BootstrapConfig cfg;
    cfg.B = 2000;
    const auto run = bootstrap_run(fam, y, cfg);
    CHECK(within_se(run.df.mean, n / (1.0 + s) * (cfg.B - 1.0) / cfg.B, run.df.std_error));
    CHECK(std::abs(run.edf.mean) <= 4 * run.edf.std_error + double(n) / cfg.B);
  }
}

TEST_CASE("constant rule has zero df") {
  ConstantRule fam{Vec::LinSpaced(8, -1.0, 1.0)};
  const Vec y = Vec::Constant(8, 0.3);
  for (auto smp : {BootstrapSampler::parametric, BootstrapSampler::bigmodel, BootstrapSampler::residual}) {
    BootstrapConfig cfg;
    cfg.B = 500;
    cfg.sampler = smp;
    const auto rep = bootstrap_edf(fam, y, cfg);
    CHECK(std::abs(rep.value) <= 4 * rep.std_error + 1e-12);
    CHECK(rep.method == edf_method(smp));
  }
}

TEST_CASE("bootstrap is deterministic in the seed and thread count") {
  ShrinkMeansFamily fam(30, 1.0);
  const Vec y = draw_y(GaussianModel::homoskedastic(Vec::Constant(30, 0.5), 1.0), 5);
  BootstrapConfig cfg;
  cfg.B = 200;
  cfg.seed = 77;
  cfg.sampler = BootstrapSampler::residual;
  cfg.threads = 1;
  const auto a = bootstrap_edf(fam, y, cfg);
  cfg.threads = 4;
  const auto b = bootstrap_edf(fam, y, cfg);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  cfg.seed = 78;
  CHECK(bootstrap_edf(fam, y, cfg).value != a.value);
}

TEST_CASE("residual sampler ignores the noise scale") {
  Vec center = Vec::LinSpaced(6, 0.0, 5.0);
  Vec res(6);
  res << 0.1, -0.2, 0.3, 0.0, 0.5, -0.4;
  auto r1 = make_stream(9, {1});
  auto r2 = make_stream(9, {1});
  const Vec a = residual_draw(center, res, r1);
  const Vec b = residual_draw(center, res, r2);
  CHECK(a == b);
  for (Index i = 0; i < 6; ++i) {
    const double d = a[i] - center[i];
    CHECK(((res.array() - d).abs() < 1e-12).any());
  }
}

TEST_CASE("two-model parametric bootstrap matches the exact edf at theta_hat") {
  Mat x = Mat::Zero(5, 1);
  x(0, 0) = 1.0;
  SubsetRegressionFamily fam(make_two_model(x), 1.0);
  const auto model = GaussianModel::homoskedastic(Vec::Zero(5), 1.0);
  CHECK_THAT(edf_two_model_exact(x, Vec::Zero(5), 1.0), WithinAbs(0.41510749742059466, 1e-12));
  const int outer = 100;
  Mat table(outer, 1);
  for (int r = 0; r < outer; ++r) {
    BootstrapConfig cfg;
    cfg.B = 400;
    cfg.seed = 1000 + r;
    const Vec y = draw_y(model, r);
    const auto run = bootstrap_run(fam, y, cfg);
    table(r, 0) = run.edf.mean - edf_two_model_exact(x, run.fit.theta_hat, 1.0);
  }
  const auto gap = column_estimates(table)[0];
  CHECK(std::abs(gap.mean) <= 4 * gap.std_error + 0.01);
}

TEST_CASE("shrinkage null: bootstrap tracks Monte Carlo") {
  const Index n = 50;
  ShrinkMeansFamily fam(n, 1.0);
  const auto model = GaussianModel::homoskedastic(Vec::Zero(n), 1.0);
  const auto mc = mc_edf(fam, model, 20000, 21);
  double acc = 0.0;
  const int outer = 100;
  for (int r = 0; r < outer; ++r) {
    BootstrapConfig cfg;
    cfg.B = 500;
    cfg.seed = 500 + r;
    acc += bootstrap_edf(fam, draw_y(model, 9000 + r), cfg).value;
  }
  CHECK(std::abs(acc / outer - mc.value) < 0.3);
}

TEST_CASE("corrected error estimate") {
  const Index n = 40;
  ShrinkMeansFamily fam(n, 1.0);
  const Vec y = draw_y(GaussianModel::homoskedastic(Vec::Constant(n, 0.3), 1.0), 2);
  BootstrapConfig cfg;
  cfg.B = 300;
  const auto run = bootstrap_run(fam, y, cfg);
  CHECK_THAT(corrected_error_estimate(fam, y, cfg), WithinAbs(run.fit.sure_min + 2.0 * run.edf.mean, 1e-10));
}
