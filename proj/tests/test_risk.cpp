#include <doctest.h>

#include <Eigen/Cholesky>

#include <cmath>
#include <vector>

#include "risk_oracle.hpp"
#include "stormrisk/covariate.hpp"
#include "stormrisk/error.hpp"
#include "stormrisk/random_effects.hpp"
#include "stormrisk/risk.hpp"
#include "stormrisk/rng.hpp"

using namespace stormrisk;

namespace {

CovariateNhpp section4_model(double xi) { return {{0.0, 2.5, std::log(1.5), 0.0, xi, 0.0}}; }

RandomEffectsModel effects_model(double mu1, double sigma1, double rho, double xi = 0.0) {
  RandomEffectsModel m;
  m.coef = {0.0, mu1, std::log(1.5), sigma1, xi, 0.0};
  m.dims = kLocationScaleEffects;
  m.correlation.resize(2, 2);
  m.correlation << 1.0, rho, rho, 1.0;
  return m;
}

RiskQuery query(double t, double T, std::vector<double> grid) {
  RiskQuery q;
  q.t = t;
  q.T = T;
  q.T_star = std::move(grid);
  q.band_draws = 0;
  return q;
}

}  // namespace

TEST_CASE("zero slopes give R identically 1") {
  const auto h = CovariateDensity::normal(0.0, 1.0);
  const NhppParams base{0.3, 1.5, 0.2};
  for (double t : {0.1, 0.4, 0.9}) {
    for (double T : {2.0, 100.0, 1000.0}) {
      const RiskQuery q = query(t, T, default_T_star_grid());
      for (const auto& p : risk_measure_cov(q, CovariateNhpp::stationary(base), h).points) {
        CHECK(std::abs(p.R - 1.0) <= 1e-8);
      }
      RandomEffectsModel flat = effects_model(0.0, 0.0, 0.5, -0.2);
      for (const auto& p : risk_measure_re(q, flat).points) {
        CHECK(std::abs(p.R - 1.0) <= 1e-8);
      }
    }
  }
}

TEST_CASE("unconditional probability: stationary closed form and empty remainder") {
  const auto h = CovariateDensity::normal(0.0, 1.0);
  const NhppParams base{0.0, 1.5, -0.2};
  for (double z : {-1.0, 0.5, 2.0, 5.0}) {
    for (double t : {0.2, 0.6}) {
      const double closed = 1.0 - std::pow(gev_cdf(z, base), 1.0 - t);
      CHECK(std::abs(unconditional_exceed_prob_cov(z, t, CovariateNhpp::stationary(base), h) - closed) < 1e-12);
      CHECK(std::abs(unconditional_exceed_prob_re(z, t, effects_model(0.0, 0.0, 0.0, -0.2)) - closed) < 1e-12);
    }
  }
  CHECK(unconditional_exceed_prob_cov(3.0, 1.0 - 1e-12, section4_model(-0.2), h) < 1e-10);
  // With xi > 0 the lower endpoint 2.5 s - 7.5 passes z = 3 for s > 4.2, where
  // any remaining time exceeds z surely, so the limit is P(S > 4.2), not 0.
  const double beyond = 0.5 * std::erfc(4.2 / std::sqrt(2.0));
  CHECK(unconditional_exceed_prob_cov(3.0, 1.0 - 1e-12, section4_model(0.2), h) ==
        doctest::Approx(beyond).epsilon(0.02));
  CHECK(unconditional_exceed_prob_re(3.0, 1.0 - 1e-12, effects_model(2.5, 0.3, 0.62)) < 1e-10);
}

TEST_CASE("numerator and denominator are non-increasing in z_star and t") {
  const auto h = CovariateDensity::normal(0.0, 1.0);
  const CovariateNhpp m = section4_model(-0.2);
  const double z_T = 6.0;
  for (double t : {0.2, 0.5, 0.8}) {
    double prev_n = 2.0;
    double prev_d = 2.0;
    for (double z = 0.0; z < 12.0; z += 0.5) {
      const double n = conditional_exceed_prob_cov(z, z_T, t, m, h);
      const double d = unconditional_exceed_prob_cov(z, t, m, h);
      CHECK(n <= prev_n + 1e-14);
      CHECK(d <= prev_d + 1e-14);
      CHECK(n >= 0.0);
      CHECK(d >= 0.0);
      prev_n = n;
      prev_d = d;
    }
  }
  const RandomEffectsModel re = effects_model(2.5, 0.3, 0.62, 0.1);
  for (double z : {2.0, 6.0, 10.0}) {
    double prev_n = 2.0;
    double prev_d = 2.0;
    for (double t = 0.1; t < 0.95; t += 0.1) {
      const double n = conditional_exceed_prob_re(z, 6.0, t, re);
      const double d = unconditional_exceed_prob_re(z, t, re);
      CHECK(n <= prev_n + 1e-14);
      CHECK(d <= prev_d + 1e-14);
      prev_n = n;
      prev_d = d;
    }
  }
}

TEST_CASE("R is the exact ratio of the reported probabilities") {
  const auto h = CovariateDensity::normal(0.0, 1.0);
  const auto curve = risk_measure_cov(query(0.4, 100.0, default_T_star_grid()), section4_model(0.2), h);
  for (const auto& p : curve.points) {
    CHECK(p.status == RiskStatus::Ok);
    CHECK(p.R == p.numerator / p.denominator);
    CHECK(p.R >= 0.0);
  }
}

TEST_CASE("levels above every upper endpoint") {
  // Bounded covariate, xi < 0 everywhere: the largest upper endpoint is finite.
  ParamMixture mix;
  mix.params = {{0.0, 1.0, -0.5}, {1.0, 1.0, -0.5}};
  mix.weights = {0.5, 0.5};
  // Upper endpoints 2 and 3.
  const RiskPoint p = risk_at(3.5, 2.5, 0.4, mix);
  CHECK(p.status == RiskStatus::Undefined);
  CHECK(std::isnan(p.R));
  CHECK(p.numerator == 0.0);
  CHECK(p.denominator == 0.0);
  CHECK_THROWS_AS((void)conditioning_weights(3.5, 0.4, mix), UnsupportedConditioningValue);
  CHECK_THROWS_AS((void)risk_at(2.0, 3.5, 0.4, mix), UnsupportedConditioningValue);
  // Conditioning at 2.5 rules out the first component entirely.
  const auto w = conditioning_weights(2.5, 0.4, mix);
  CHECK(w[0] == 0.0);
  CHECK(w[1] == doctest::Approx(1.0));
}

TEST_CASE("query validation") {
  RiskQuery q = query(0.0, 100.0, {2.0, 10.0});
  CHECK_THROWS_AS(q.validate(), InvalidArgument);
  q = query(0.4, 1.0, {2.0, 10.0});
  CHECK_THROWS_AS(q.validate(), InvalidArgument);
  q = query(0.4, 100.0, {10.0, 2.0});
  CHECK_THROWS_AS(q.validate(), InvalidArgument);
  q = query(0.4, 100.0, {1.0, 2.0});
  CHECK_THROWS_AS(q.validate(), InvalidArgument);
}

TEST_CASE("conditioning on a large event shifts the covariate upwards") {
  const auto h = CovariateDensity::normal(0.0, 1.0);
  const CovariateNhpp m = section4_model(-0.2);
  const double z_T = return_level_covariate(100.0, m, h);
  const double post = conditional_covariate_mean(z_T, 0.4, m, h);
  MESSAGE("E[S | z_100] = " << post);
  CHECK(post > h.mean() + 0.5);
}

TEST_CASE("design-scale curves: R above one, rising in T*, and larger for the bounded tail") {
  const auto h = CovariateDensity::normal(0.0, 1.0);
  const std::vector<double> grid = default_T_star_grid(1.01, 100.0, 40);
  const auto lower = risk_measure_cov(query(0.4, 100.0, grid), section4_model(-0.2), h);
  const auto upper = risk_measure_cov(query(0.4, 100.0, grid), section4_model(0.2), h);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK(lower.points[j].R > 1.0);
    CHECK(upper.points[j].R > 1.0);
    if (j > 0) {
      CHECK(lower.points[j].R > lower.points[j - 1].R);
    }
  }
  CHECK(lower.points.back().R > upper.points.back().R);
  // A 1-in-50 event behaves like a 1-in-2 event: T*/R within a factor 2 of 2.
  const auto at50 = risk_measure_cov(query(0.4, 100.0, {50.0}), section4_model(-0.2), h);
  const double effective = 50.0 / at50.points[0].R;
  MESSAGE("effective return period of the 50-block level: " << effective);
  CHECK(effective >= 1.0);
  CHECK(effective <= 4.0);
}

TEST_CASE("random-effects curves: later times lower, larger conditioning higher") {
  const RandomEffectsModel m = effects_model(2.5, 0.3, 0.62, 0.05);
  const std::vector<double> grid = default_T_star_grid(1.5, 1000.0, 30);
  const auto early = risk_measure_re(query(0.2, 100.0, grid), m);
  const auto late = risk_measure_re(query(0.8, 100.0, grid), m);
  const auto small = risk_measure_re(query(0.2, 10.0, grid), m);
  const auto large = risk_measure_re(query(0.2, 1000.0, grid), m);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK(late.points[j].numerator <= early.points[j].numerator);
    CHECK(large.points[j].R >= small.points[j].R - 1e-12);
    if (grid[j] >= 100.0) {
      CHECK(late.points[j].R <= early.points[j].R);
    }
  }
}

TEST_CASE("for levels well below the conditioning level a later event time can raise R") {
  // Conditional and unconditional probabilities both shrink with less season
  // left, but the unconditional one shrinks faster here. Checked by simulation.
  const RandomEffectsModel m = effects_model(2.5, 0.3, 0.62, 0.05);
  const Eigen::MatrixXd lower = m.correlation.llt().matrixL();
  const double z_T = marginal_return_level(100.0, m);
  const double z_star = marginal_return_level(2.0, m);
  auto draw = [&](CounterRng& rng) {
    Eigen::Vector2d w(standard_normal(rng), standard_normal(rng));
    return m.at(lower * w);
  };
  const RiskPoint early = risk_at(z_star, z_T, 0.2, effect_mixture(m));
  const RiskPoint late = risk_at(z_star, z_T, 0.8, effect_mixture(m));
  CHECK(late.R > early.R + 0.5);
  const auto mc_early = oracle::conditional_risk(draw, z_star, z_T, 0.2, 0.01, 1000000, 41);
  const auto mc_late = oracle::conditional_risk(draw, z_star, z_T, 0.8, 0.01, 1000000, 42);
  MESSAGE("R early " << early.R << " (MC " << mc_early.R << " +/- " << mc_early.R_se << "), late " << late.R
                     << " (MC " << mc_late.R << " +/- " << mc_late.R_se << ")");
  CHECK(std::abs(early.R - mc_early.R) < 3.0 * mc_early.R_se);
  CHECK(std::abs(late.R - mc_late.R) < 3.0 * mc_late.R_se);
  CHECK(mc_late.R - mc_early.R > 2.0 * std::hypot(mc_early.R_se, mc_late.R_se));
}

TEST_CASE("tiny slopes with conditioning at the median give a ratio near one") {
  const RandomEffectsModel m = effects_model(1e-3, 1e-3, 0.3, 0.1);
  const auto curve = risk_measure_re(query(0.4, 2.0, default_T_star_grid()), m);
  for (const auto& p : curve.points) {
    CHECK(std::abs(p.R - 1.0) < 0.05);
  }
}

TEST_CASE("analytic probabilities agree with conditional simulation") {
  SUBCASE("observed covariate, bounded tail") {
    const auto h = CovariateDensity::normal(0.0, 1.0);
    const CovariateNhpp m = section4_model(-0.2);
    const double z_T = return_level_covariate(100.0, m, h);
    const double z_star = return_level_covariate(10.0, m, h);
    const RiskPoint a = risk_at(z_star, z_T, 0.4, covariate_mixture(m, h));
    const auto mc = oracle::conditional_risk([&](CounterRng& rng) { return m.at(standard_normal(rng)); }, z_star,
                                             z_T, 0.4, 0.005, 1000000, 31);
    MESSAGE("N " << a.numerator << " vs " << mc.numerator << " +/- " << mc.numerator_se << " (" << mc.in_bin
                 << " seasons in bin); D " << a.denominator << " vs " << mc.denominator);
    CHECK(mc.in_bin > 100);
    CHECK(std::abs(a.numerator - mc.numerator) < 3.0 * mc.numerator_se);
    CHECK(std::abs(a.denominator - mc.denominator) < 3.0 * mc.denominator_se);
    CHECK(std::abs(a.R - mc.R) < 3.0 * mc.R_se);
  }
  SUBCASE("latent effects, Gumbel tail") {
    const RandomEffectsModel m = effects_model(2.5, 0.3, 0.62, 0.0);
    const Eigen::MatrixXd lower = m.correlation.llt().matrixL();
    const double z_T = marginal_return_level(10.0, m);
    const double z_star = marginal_return_level(20.0, m);
    const RiskPoint a = risk_at(z_star, z_T, 0.2, effect_mixture(m));
    const auto mc = oracle::conditional_risk(
        [&](CounterRng& rng) {
          Eigen::Vector2d w(standard_normal(rng), standard_normal(rng));
          return m.at(lower * w);
        },
        z_star, z_T, 0.2, 0.005, 1000000, 32);
    MESSAGE("N " << a.numerator << " vs " << mc.numerator << " +/- " << mc.numerator_se << " (" << mc.in_bin
                 << " seasons in bin); D " << a.denominator << " vs " << mc.denominator);
    CHECK(std::abs(a.numerator - mc.numerator) < 3.0 * mc.numerator_se);
    CHECK(std::abs(a.denominator - mc.denominator) < 3.0 * mc.denominator_se);
    CHECK(std::abs(a.R - mc.R) < 3.0 * mc.R_se);
  }
}

TEST_CASE("bands: contain the point estimate, reproducible, thread independent") {
  const auto h = CovariateDensity::normal(0.0, 1.0);
  const CovariateNhpp m = section4_model(0.2);
  Eigen::Matrix<double, 6, 6> cov = Eigen::Matrix<double, 6, 6>::Zero();
  cov.diagonal() << 0.05, 0.05, 0.01, 0.0, 0.005, 0.0;
  RiskQuery q = query(0.4, 100.0, {2.0, 10.0, 50.0, 100.0});
  q.band_draws = 300;
  const auto one = risk_measure_cov(q, m, h, cov);
  q.threads = 4;
  const auto four = risk_measure_cov(q, m, h, cov);
  CHECK(one.band_draws_used > 290);
  for (std::size_t j = 0; j < one.points.size(); ++j) {
    CHECK(one.points[j].lo <= one.points[j].R);
    CHECK(one.points[j].R <= one.points[j].hi);
    CHECK(one.points[j].lo < one.points[j].hi);
    CHECK(one.points[j].lo == four.points[j].lo);
    CHECK(one.points[j].hi == four.points[j].hi);
  }
  // No covariance: degenerate bands at the point estimate.
  const auto none = risk_measure_cov(q, m, h);
  for (const auto& p : none.points) {
    CHECK(p.lo == p.R);
    CHECK(p.hi == p.R);
  }
}

TEST_CASE("posterior bands are draw-wise percentiles around the posterior-mean curve") {
  // A hand-built posterior: slopes spread around the design values.
  PosteriorSamples post;
  CounterRng rng(77);
  for (int i = 0; i < 200; ++i) {
    RandomEffectsModel m = effects_model(2.5 + 0.2 * standard_normal(rng), 0.3 + 0.03 * standard_normal(rng), 0.62);
    post.models.push_back(RegionalModel::from_single(m));
    post.effects.push_back(Eigen::MatrixXd::Zero(5, 2));
    post.log_posterior.push_back(0.0);
  }
  RiskQuery q = query(0.4, 100.0, {2.0, 10.0, 100.0});
  q.band_draws = 100;
  const auto curve = risk_measure_re(q, post);
  const auto at_mean = risk_measure_re(query(0.4, 100.0, {2.0, 10.0, 100.0}), post.mean_model().site(0));
  CHECK(curve.band_draws_used == 100);
  for (std::size_t j = 0; j < curve.points.size(); ++j) {
    CHECK(curve.points[j].R == at_mean.points[j].R);
    CHECK(curve.points[j].lo <= curve.points[j].R);
    CHECK(curve.points[j].R <= curve.points[j].hi);
  }
  CHECK_THROWS_AS((void)risk_measure_re(q, PosteriorSamples{}), InvalidArgument);
}
