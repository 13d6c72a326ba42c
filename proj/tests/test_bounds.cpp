#include <catch_amalgamated.hpp>

#include <suretune/bounds.hpp>
#include <suretune/subset_reg.hpp>

using namespace suretune;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
bool within_se(double a, double b, double se, double k = 4.0) { return std::abs(a - b) <= k * se; }

Mat random_design(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mat x(n, p);
  for (Index j = 0; j < p; ++j) x.col(j) = standard_normal(n, rng);
  return x;
}

double phi(double x) { return std_normal_pdf(x); }
}  // namespace

TEST_CASE("chi-square max bound") {
  CHECK_THROWS_AS(chi_sq_max_bound({{3}, 1.0}), std::domain_error);
  CHECK_THROWS_AS(chi_sq_max_bound({{3}, -0.1}), std::domain_error);
  CHECK_THROWS_AS(chi_sq_max_bound({{}, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(chi_sq_max_bound({{-1}, 0.5}), std::invalid_argument);
  CHECK(chi_sq_max_bound({{2}, 0.0}) == kInf);
  CHECK_THAT(chi_sq_max_bound({{0, 0}, 0.0}), WithinRel(2.0 * std::log(2.0), 1e-14));

  // single subset: p (log(1/delta)/(1-delta) - 1), vanishing as delta -> 1
  for (double d : {0.3, 0.9, 0.999, 0.999999}) {
    CHECK_THAT(chi_sq_max_bound({{7}, d}), WithinRel(7.0 * (-std::log(d) / (1.0 - d) - 1.0), 1e-9));
  }
  CHECK(chi_sq_max_bound({{7}, 0.999999}) < 1e-5);

  // no overflow for |S| = 2^40 subsets of size 40
  std::vector<long> big(1000, 400);
  CHECK(std::isfinite(chi_sq_max_bound({big, 0.01})));
}

TEST_CASE("simplified bound and delta = 9/10 constants") {
  const double d = 0.9;
  CHECK_THAT(2.0 / (1.0 - d), WithinRel(20.0, 1e-12));
  CHECK_THAT(-std::log(d) / (1.0 - d) - 1.0, WithinAbs(0.0536052, 1e-7));
  std::vector<long> s10 = {20, 3, 5, 0, 20, 1, 2, 8, 9, 11};
  CHECK_THAT(edf_upper_bound_simplified(s10, 0.9), WithinAbs(47.12380499144619, 1e-9));
  CHECK_THAT(edf_upper_bound_simplified({20}, 0.9), WithinRel(20.0 * 0.0536051565782630, 1e-9));

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<long> size(0, 30), count(1, 40);
  std::uniform_real_distribution<double> delta(0.01, 0.99);
  for (int t = 0; t < 100; ++t) {
    std::vector<long> s(static_cast<std::size_t>(count(rng)));
    for (auto& v : s) v = size(rng);
    const double dl = delta(rng);
    CHECK(edf_upper_bound_tight(s, dl) <= edf_upper_bound_simplified(s, dl) + 1e-9);
  }
}

TEST_CASE("chi-square max bound dominates MC") {
  std::mt19937_64 rng(8);
  const Index m = 12;
  std::uniform_int_distribution<int> nsets(1, 12);
  std::bernoulli_distribution keep(0.4);
  for (int c = 0; c < 50; ++c) {
    std::vector<std::vector<Index>> sets(static_cast<std::size_t>(nsets(rng)));
    std::vector<long> sizes;
    for (auto& s : sets) {
      for (Index i = 0; i < m; ++i) {
        if (keep(rng)) s.push_back(i);
      }
      sizes.push_back(static_cast<long>(s.size()));
    }
    const auto est = mc_chi_sq_max(sets, m, 2000, 100 + c);
    for (double d : {0.3, 0.5, 0.7, 0.9}) CHECK(est.mean <= chi_sq_max_bound({sizes, d}) + 4 * est.std_error);
  }
}

TEST_CASE("centered surface areas") {
  for (double r : {0.5, 1.0, 2.0, 3.0}) CHECK_THAT(surface_area_centered(1, r), WithinRel(2.0 * phi(r), 1e-13));
  CHECK_THAT(surface_area_centered(2, 2.0), WithinRel(2.0 * std::exp(-2.0), 1e-13));
  CHECK_THAT(surface_area_centered(3, std::sqrt(6.0)), WithinRel(0.23834599907013215, 1e-12));
  CHECK_THAT(surface_area_centered(5, std::sqrt(10.0)), WithinRel(0.179203462735943, 1e-12));
  CHECK_THROWS(surface_area_centered(0, 1.0));
  CHECK_THROWS(surface_area_centered(2, 0.0));

  for (Index d : {1, 2, 3, 5}) {
    for (double r : {1.0, std::sqrt(2.0 * d)}) {
      const auto closed = gaussian_surface_area_ball(Vec::Zero(d), r);
      CHECK(closed.exact);
      const auto mc = gaussian_surface_area_ball_mc(Vec::Zero(d), r, 3);
      CHECK((within_se(mc.value, closed.value, mc.std_error) ||
             std::abs(mc.value - closed.value) <= 1e-10 * closed.value));
      CHECK(closed.value <= 1.0);
    }
  }
}

TEST_CASE("off-center surface areas") {
  // exact values 2 r f_{ncchi2_d(|c|^2)}(r^2)
  Vec c1(1);
  c1 << 1.0;
  const auto a1 = gaussian_surface_area_ball(c1, std::sqrt(2.0));
  CHECK_THAT(a1.value, WithinAbs(phi(1.0 - std::sqrt(2.0)) + phi(1.0 + std::sqrt(2.0)), 1e-12));

  Vec c3(3);
  c3 << 1.0, -0.5, 2.0;
  const auto a3 = gaussian_surface_area_ball(c3, 1.5, 7);
  CHECK_FALSE(a3.exact);
  CHECK(a3.std_error > 0.0);
  CHECK(a3.std_error < 2e-3);
  CHECK(within_se(a3.value, 0.19076924928569017, a3.std_error));

  Vec c2(2);
  c2 << 0.3, 0.4;
  const auto a2 = gaussian_surface_area_ball(c2, 2.0, 9);
  CHECK(within_se(a2.value, 0.3024200116022643, a2.std_error));

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.1, 4.0);
  for (int t = 0; t < 30; ++t) {
    const Index d = 1 + t % 6;
    Vec c = standard_normal(d, rng);
    const auto a = gaussian_surface_area_ball(c, u(rng), t, 20000);
    CHECK(a.value <= 1.0 + 4 * a.std_error);
  }
  // same seed, same estimate
  CHECK(gaussian_surface_area_ball(c3, 1.5, 7).value == a3.value);
}

TEST_CASE("gas stations") {
  auto r = gas_stations_rotation({1.0, 3.0});
  CHECK(r.index == 0);
  CHECK(r.multiplicity == 1);
  r = gas_stations_rotation({3.0, 1.0});
  CHECK(r.index == 1);
  CHECK(r.multiplicity == 1);
  r = gas_stations_rotation({2.0, 2.0, 2.0, 2.0});
  CHECK(r.index == 0);
  CHECK(r.multiplicity == 4);
  r = gas_stations_rotation({4.0, 0.0, 4.0, 0.0});
  CHECK(r.index == 1);
  CHECK(r.multiplicity == 2);
  CHECK_THROWS_AS(gas_stations_rotation({1.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(gas_stations_rotation({-1.0, 5.0}), std::domain_error);

  std::mt19937_64 rng(5);
  std::exponential_distribution<double> ex(1.0);
  int failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + static_cast<std::size_t>(t % 8);
    std::vector<double> w(d);
    double tot = 0.0;
    for (auto& v : w) tot += (v = ex(rng));
    for (auto& v : w) v *= 2.0 * static_cast<double>(d) / tot;
    std::size_t valid = 0, first = d;
    for (std::size_t i = 0; i < d; ++i) {
      if (gas_station_start_valid(w, i)) {
        ++valid;
        first = std::min(first, i);
      }
    }
    const auto g = gas_stations_rotation(w);
    if (valid != 1 || g.multiplicity != 1 || g.index != first) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("nested null constant") {
  CHECK_THAT(nested_null_edf_bound(1), WithinAbs(4.0 * std::sqrt(2.0) * phi(std::sqrt(2.0)), 1e-13));
  CHECK_THAT(nested_null_edf_bound(1), WithinAbs(0.83021, 1e-5));
  CHECK_THAT(nested_null_edf_bound(5), WithinAbs(3.8333, 1e-4));
  CHECK_THAT(nested_null_edf_bound(10), WithinAbs(6.4226, 1e-4));
  CHECK_THAT(nested_null_edf_bound(20), WithinAbs(8.7145, 1e-4));
  CHECK_THAT(nested_null_edf_bound(10000), WithinAbs(9.557430968171108, 1e-9));
  double prev = 0.0;
  for (long p = 1; p <= 10000; p += (p < 100 ? 1 : 97)) {
    const double v = nested_null_edf_bound(p);
    CHECK(v >= prev);
    CHECK(v < 10.0);
    prev = v;
  }
  const auto app = nested_null_stirling();
  CHECK_THAT(app.sqrt_part, WithinAbs(8.204906648441082, 1e-10));
  CHECK_THAT(app.inv_sqrt_part, WithinAbs(1.7469009431806857, 1e-10));
  CHECK(app.sqrt_part < 8.21);
  CHECK(app.inv_sqrt_part < 1.75);
  CHECK(app.total() < 10.0);
  CHECK(nested_null_edf_bound(10000) <= app.total());
  // small N: the tails are looser, and their closed forms match brute force
  const auto small = nested_null_stirling(5);
  CHECK(small.sqrt_part > app.sqrt_part);
  CHECK(small.inv_sqrt_part > app.inv_sqrt_part);
  const double x = std::sqrt(2.0 / std::numbers::e);
  double head_d = 0.0, head_i = 0.0, tail_d = 0.0, tail_1 = 0.0;
  for (int d = 1; d < 5000; ++d) {
    const double g = std::pow(x, d);
    if (d <= 5) {
      head_d += std::sqrt(double(d)) * g;
      head_i += g / std::sqrt(double(d));
    } else {
      tail_d += d * g;
      tail_1 += g;
    }
  }
  const double rpi = 1.0 / std::sqrt(std::numbers::pi);
  CHECK_THAT(small.sqrt_part, WithinRel(rpi * (head_d + tail_d), 1e-12));
  CHECK_THAT(small.inv_sqrt_part, WithinRel(rpi * (head_i + tail_1), 1e-12));
  CHECK_THAT(rpi * tail_d, WithinRel(19.00674215565112, 1e-10));
}

TEST_CASE("general theta bounds") {
  Vec m0 = Vec::Zero(1);
  CHECK_THAT(general_theta_bound(m0).value, WithinRel(0.8302149948411894, 1e-12));
  CHECK_THAT(alternate_theta_bound(m0).value, WithinRel(0.4151074974205947, 1e-12));
  for (double m : {1.0, 3.0}) {
    Vec mu(1);
    mu << m;
    const double exact = edf_two_model_exact(Mat::Identity(1, 1), mu, 1.0);
    CHECK_THAT(general_theta_bound(mu).value, WithinRel(2.0 * exact, 1e-10));
    CHECK_THAT(alternate_theta_bound(mu).value, WithinRel(exact, 1e-10));
  }
  CHECK_THAT(general_theta_bound(Vec::Zero(3)).value, WithinRel(4.789542713503332, 1e-12));
  CHECK_THAT(alternate_theta_bound(Vec::Zero(3)).value, WithinRel(2.4428055529888284, 1e-10));
  CHECK_THAT(general_theta_bound(Vec::Zero(5)).value, WithinRel(11.120191576708935, 1e-12));
  CHECK_THAT(alternate_theta_bound(Vec::Zero(5)).value, WithinRel(5.168688752706567, 1e-10));
  for (long p : {1, 3, 5, 10}) CHECK(general_theta_bound(Vec::Zero(p)).value >= nested_null_edf_bound(p));

  Vec mu3(3);
  mu3 << 1.0, 0.5, -1.0;
  const auto g3 = general_theta_bound(mu3, 2);
  CHECK(g3.approximate);
  CHECK(within_se(g3.value, 7.507595481417122, g3.std_error));
  const auto a3 = alternate_theta_bound(mu3, 2);
  CHECK(within_se(a3.value, 3.3029103494955603, a3.std_error));
  Vec mu5(5);
  mu5 << 2.0, 1.0, 0.0, 0.0, 0.0;
  const auto g5 = general_theta_bound(mu5, 3);
  CHECK(within_se(g5.value, 22.33243656495545, g5.std_error));
  const auto a5 = alternate_theta_bound(mu5, 3);
  CHECK(within_se(a5.value, 9.312074455258827, a5.std_error));
  CHECK(g5.value <= general_theta_loose_cap(5));
}

TEST_CASE("general theta bound dominates MC edf on chains") {
  for (Index p : {3, 5}) {
    const Mat x = random_design(30, p, 40 + p);
    SubsetRegressionFamily fam(make_full_chain(x), 1.0);
    Vec beta = Vec::Zero(p);
    beta[0] = 0.4;
    beta[1] = -0.3;
    for (const Vec& theta0 : {Vec(Vec::Zero(30)), Vec(x * beta)}) {
      const auto model = GaussianModel::homoskedastic(theta0, 1.0);
      const auto mc = mc_edf(fam, model, 4000, 7);
      const Vec mu = chain_coordinates(x, theta0, 1.0);
      const auto b = general_theta_bound(mu);
      CHECK(mc.value <= b.value + 4 * std::hypot(mc.std_error, b.std_error));
      CHECK(mc.value <= nested_null_edf_bound(p) + 4 * mc.std_error);
    }
  }
}

TEST_CASE("best subset constant") {
  const auto c = best_subset_constant();
  CHECK_THAT(c.value, WithinAbs(2.28915, 1e-5));
  CHECK_THAT(c.delta, WithinAbs(0.2068, 1e-3));
  CHECK(c.value >= 2.28);
  CHECK(c.value <= 2.30);
  CHECK_THAT(c.half(), WithinAbs(1.144575, 1e-5));
  CHECK_THAT(best_subset_f(0.5), WithinAbs(2.9704, 1e-4));
  CHECK(best_subset_f(0.05) > c.value);
  CHECK(best_subset_f(0.9) > c.value);
  CHECK_THROWS_AS(best_subset_f(1.0), std::domain_error);
}
