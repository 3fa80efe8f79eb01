#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "stormrisk/error.hpp"
#include "stormrisk/evt.hpp"
#include "stormrisk/rng.hpp"
#include "stormrisk/simulation.hpp"

using namespace stormrisk;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Written directly from the point-process likelihood, product form, without
// any of the library's helpers or the Gumbel branch. [x]_+ is max(x, 0).
double literal_nll(const ThresholdedData& d, const NhppParams& p) {
  if (p.xi <= -1.0) {
    return kInf;
  }
  const double bu = std::max(1.0 + p.xi * (d.threshold - p.mu) / p.sigma, 0.0);
  double like = std::exp(-d.n_blocks * std::pow(bu, -1.0 / p.xi));
  double log_scale = 0.0;
  for (double z : d.exceedances) {
    const double b = std::max(1.0 + p.xi * (z - p.mu) / p.sigma, 0.0);
    const double term = std::pow(b, -1.0 / p.xi - 1.0) / p.sigma;
    like *= term;
    // Rescale to stay in range for long samples.
    if (like < 1e-250) {
      like *= 1e250;
      log_scale -= 250.0 * std::log(10.0);
    }
  }
  const double nll = -(std::log(like) + log_scale);
  return std::isnan(nll) ? kInf : nll;
}

ThresholdedData simulate_stationary(const NhppParams& p, double u, int n_blocks, CounterRng& rng) {
  ThresholdedData d;
  d.threshold = u;
  d.n_blocks = n_blocks;
  for (int b = 0; b < n_blocks; ++b) {
    const auto block = simulate_block(p, u, {0.0, 1.0}, rng);
    d.exceedances.insert(d.exceedances.end(), block.magnitudes.begin(), block.magnitudes.end());
  }
  return d;
}

}  // namespace

TEST_CASE("gev_cdf values") {
  CHECK(gev_cdf(0.0, {0, 1, 0}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  const NhppParams bounded{0.0, 1.0, -0.2};
  CHECK(gev_cdf(*bounded.upper_endpoint(), bounded) == 1.0);
  CHECK(gev_cdf(*bounded.upper_endpoint() + 1.0, bounded) == 1.0);
  const NhppParams heavy{0.0, 1.0, 0.2};
  CHECK(gev_cdf(*heavy.lower_endpoint() - 0.5, heavy) == 0.0);
}

TEST_CASE("gev_cdf equals adaptive quadrature of gev_pdf") {
  const NhppParams p{0.0, 1.0, 0.2};
  const double lo = *p.lower_endpoint();
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double z) { return gev_pdf(z, p); }, lo, 2.0, 20, 1e-14);
  CHECK(std::abs(integral - gev_cdf(2.0, p)) < 1e-8);
}

TEST_CASE("gev_pdf values and finite-difference check") {
  CHECK(gev_pdf(0.0, {0, 1, 0}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  const NhppParams p{0.0, 1.0, -0.5};
  CHECK(gev_pdf(*p.upper_endpoint() + 0.1, p) == 0.0);
  const NhppParams q{0.5, 2.0, 0.1};
  const double h = 1e-5;
  const double fd = (gev_cdf(1.3 + h, q) - gev_cdf(1.3 - h, q)) / (2 * h);
  CHECK(std::abs(fd - gev_pdf(1.3, q)) < 1e-6);
}

TEST_CASE("gev_pdf integrates to one at random parameter vectors") {
  CounterRng rng(5);
  for (int i = 0; i < 20; ++i) {
    const NhppParams p{4.0 * rng.uniform() - 2.0, 0.2 + 3.0 * rng.uniform(), 0.8 * rng.uniform() - 0.4};
    const double lo = p.lower_endpoint().value_or(p.mu - 40.0 * p.sigma);
    const double hi = p.upper_endpoint().value_or(p.mu + 1e4 * p.sigma);
    const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double z) { return gev_pdf(z, p); }, lo, hi, 30, 1e-13);
    CHECK(std::abs(mass - 1.0) < 1e-6);
  }
}

TEST_CASE("gev_cdf is monotone on a grid") {
  for (double xi : {-0.6, -0.2, -1e-9, 0.0, 1e-9, 0.2, 0.7}) {
    const NhppParams p{1.0, 2.0, xi};
    double prev = 0.0;
    for (double z = -30.0; z <= 30.0; z += 0.01) {
      const double c = gev_cdf(z, p);
      REQUIRE(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("continuity at the shape switch") {
  for (double z = -3.0; z <= 8.0; z += 0.05) {
    const double gumbel = gev_cdf(z, {0, 1, 0});
    CHECK(std::abs(gev_cdf(z, {0, 1, 1e-8}) - gumbel) < 1e-6);
    CHECK(std::abs(gev_cdf(z, {0, 1, -1e-8}) - gumbel) < 1e-6);
    CHECK(std::abs(gev_cdf(z, {0, 1, 2e-8}) - gumbel) < 1e-6);
    CHECK(std::abs(gev_cdf(z, {0, 1, 5e-9}) - gumbel) < 1e-6);
  }
}

TEST_CASE("nhpp intensity") {
  const NhppParams p{0.3, 1.7, 0.15};
  CHECK(nhpp_intensity(p.mu, {0, 1}, p) == doctest::Approx(1.0 / p.sigma));
  const NhppParams b{0.0, 1.0, -0.25};
  CHECK(nhpp_intensity(*b.upper_endpoint() + 0.5, {0, 1}, b) == 0.0);
  for (const NhppParams& q : {p, b, NhppParams{0, 1, 0}}) {
    const double z = 1.1;
    const double h = 1e-5;
    const double fd = -(integrated_intensity(z + h, {0, 1}, q) - integrated_intensity(z - h, {0, 1}, q)) / (2 * h);
    CHECK(std::abs(fd - nhpp_intensity(z, {0, 1}, q)) < 1e-6);
  }
}

TEST_CASE("integrated intensity: trivial values and additivity") {
  const NhppParams p{0.0, 1.5, 0.2};
  CHECK(integrated_intensity(p.mu, {0, 1}, p) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(integrated_intensity(0.7, {0.4, 0.4}, p) == 0.0);
  const double whole = integrated_intensity(2.0, {0.1, 0.9}, p);
  const double parts = integrated_intensity(2.0, {0.1, 0.35}, p) + integrated_intensity(2.0, {0.35, 0.9}, p);
  CHECK(std::abs(whole - parts) < 1e-14);
  CHECK_THROWS_AS((void)integrated_intensity(1.0, {0.6, 0.2}, p), InvalidArgument);
}

TEST_CASE("integrated intensity matches the simulated mean event count") {
  const NhppParams p{0.0, 1.5, 0.2};
  const double u = 1.0;
  const TimeWindow w{0.2, 0.7};
  const double expected = integrated_intensity(u, w, p);
  CounterRng rng(17);
  const int n = 1000000;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    total += static_cast<double>(simulate_block(p, u, w, rng).times.size());
  }
  const double se = std::sqrt(expected / n);
  CHECK(std::abs(total / n - expected) < 3.0 * se);
}

TEST_CASE("level_for_tail inverts the tail term") {
  for (const NhppParams& p : {NhppParams{0, 1, 0}, NhppParams{1, 2, 0.3}, NhppParams{-1, 0.5, -0.4}}) {
    for (double c : {1e-6, 0.01, 0.5, 1.0, 3.0}) {
      const double z = level_for_tail(c, p);
      CHECK(tail_term(z, p) == doctest::Approx(c).epsilon(1e-12));
    }
  }
}

TEST_CASE("stationary nll: trivial value and literal transcription") {
  const ThresholdedData empty{{}, 0.0, 1};
  CHECK(stationary_nll(empty, {0.0, 1.0, 0.1}) == doctest::Approx(1.0).epsilon(1e-15));

  CounterRng rng(23);
  const NhppParams truth{0.0, 1.5, 0.2};
  const ThresholdedData d = simulate_stationary(truth, 1.0, 30, rng);
  for (int i = 0; i < 50; ++i) {
    const NhppParams a{rng.uniform() - 0.5, 1.0 + rng.uniform(), 0.5 * rng.uniform() - 0.2};
    const NhppParams b{rng.uniform() - 0.5, 1.0 + rng.uniform(), 0.5 * rng.uniform() - 0.2};
    const double la = stationary_nll(d, a);
    const double lb = stationary_nll(d, b);
    const double oa = literal_nll(d, a);
    const double ob = literal_nll(d, b);
    CHECK((la < lb) == (oa < ob));
    if (std::isfinite(oa)) {
      CHECK(std::abs(la - oa) < 1e-10 * (1.0 + std::abs(oa)));
    } else {
      CHECK(la == kInf);
    }
  }
  // Threshold below the lower endpoint.
  CHECK(stationary_nll(d, {5.0, 1.0, 0.5}) == kInf);
}

TEST_CASE("stationary nll: scaling n_blocks shifts only the exponent term") {
  CounterRng rng(31);
  const NhppParams p{0.0, 1.5, 0.2};
  ThresholdedData d = simulate_stationary(p, 1.0, 10, rng);
  const double base = stationary_nll(d, p);
  const double exponent = tail_term(d.threshold, p);
  for (int k : {2, 3, 7}) {
    ThresholdedData scaled = d;
    scaled.n_blocks = d.n_blocks * k;
    CHECK(stationary_nll(scaled, p) - base == doctest::Approx((k - 1) * d.n_blocks * exponent).epsilon(1e-12));
  }
}

TEST_CASE("coarse grid argmin lands near the truth and next to the simplex optimum") {
  const NhppParams truth{0.0, 1.5, 0.2};
  const double u = level_for_tail(3.0, truth);
  CounterRng rng(101);
  const ThresholdedData d = simulate_stationary(truth, u, 30, rng);
  NhppParams best{};
  double best_val = kInf;
  for (double mu = -1.0; mu <= 1.0001; mu += 0.1) {
    for (double sigma = 0.8; sigma <= 2.5001; sigma += 0.1) {
      for (double xi = -0.2; xi <= 0.6001; xi += 0.05) {
        const double v = stationary_nll(d, {mu, sigma, xi});
        if (v < best_val) {
          best_val = v;
          best = {mu, sigma, xi};
        }
      }
    }
  }
  CHECK(std::abs(best.mu - truth.mu) < 0.6);
  CHECK(std::abs(best.sigma - truth.sigma) < 0.6);
  CHECK(std::abs(best.xi - truth.xi) < 0.25);
  const StationaryFit fit = fit_stationary(d, {u, 1.0, 0.1});
  CHECK(fit.converged);
  CHECK(fit.nll <= best_val + 1e-9);
  CHECK(std::abs(fit.params.mu - best.mu) < 0.1);
  CHECK(std::abs(fit.params.sigma - best.sigma) < 0.1);
  CHECK(std::abs(fit.params.xi - best.xi) < 0.05);
}

TEST_CASE("fit started at the optimum stays there") {
  const NhppParams truth{0.0, 1.5, 0.2};
  CounterRng rng(7);
  const ThresholdedData d = simulate_stationary(truth, 1.0, 30, rng);
  const StationaryFit first = fit_stationary(d, {1.0, 1.0, 0.1});
  const StationaryFit again = fit_stationary(d, first.params);
  CHECK(again.params.mu == doctest::Approx(first.params.mu).epsilon(1e-4));
  CHECK(again.params.sigma == doctest::Approx(first.params.sigma).epsilon(1e-4));
  CHECK(again.params.xi == doctest::Approx(first.params.xi).epsilon(1e-3));
  CHECK(again.nll <= first.nll + 1e-9);
}

TEST_CASE("single exceedance is flagged, never silently answered") {
  const ThresholdedData d{{2.0}, 1.0, 5};
  const StationaryFit fit = fit_stationary(d, {1.0, 1.0, 0.1});
  CHECK((!fit.converged || fit.degenerate_hessian()));
}

TEST_CASE("wald intervals cover the truth in about 95% of replicates") {
  const NhppParams truth{0.0, 1.5, 0.2};
  const double u = level_for_tail(3.0, truth);
  const double zq = boost::math::quantile(boost::math::normal(), 0.975);
  std::array<int, 3> covered{0, 0, 0};
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    CounterRng rng(2024, static_cast<std::uint64_t>(r));
    const ThresholdedData d = simulate_stationary(truth, u, 30, rng);
    const StationaryFit fit = fit_stationary(d, {u, 1.0, 0.1});
    REQUIRE(fit.covariance);
    const std::array<double, 3> est{fit.params.mu, fit.params.sigma, fit.params.xi};
    const std::array<double, 3> tru{truth.mu, truth.sigma, truth.xi};
    for (int j = 0; j < 3; ++j) {
      if (std::abs(est[j] - tru[j]) <= zq * std::sqrt((*fit.covariance)(j, j))) {
        ++covered[j];
      }
    }
  }
  MESSAGE("coverage mu/sigma/xi: " << covered[0] << "/" << covered[1] << "/" << covered[2]);
  for (int c : covered) {
    CHECK(c >= 43);
  }
}

TEST_CASE("stationary return levels") {
  CHECK(return_level_stationary(100.0, {0, 1, 0}) == doctest::Approx(4.6001).epsilon(1e-4));
  CHECK(return_level_stationary(100.0, {0, 1, 0}) == doctest::Approx(-std::log(-std::log(0.99))).epsilon(1e-14));
  CHECK(return_level_stationary(2.0, {0, 1, 0}) == doctest::Approx(0.3665).epsilon(1e-3));
  CounterRng rng(3);
  for (int i = 0; i < 200; ++i) {
    const NhppParams p{2.0 * rng.uniform() - 1.0, 0.1 + 3.0 * rng.uniform(), rng.uniform() - 0.5};
    const double T = 1.0 + 1.0 / rng.uniform();
    CHECK(std::abs(gev_cdf(return_level_stationary(T, p), p) - (1.0 - 1.0 / T)) < 1e-10);
  }
  double prev = -kInf;
  for (double T = 1.01; T < 1e5; T *= 1.3) {
    const double z = return_level_stationary(T, {0, 1, -0.3});
    CHECK(z > prev);
    prev = z;
  }
  CHECK_THROWS_AS((void)return_level_stationary(1.0, {0, 1, 0}), InvalidArgument);
}

TEST_CASE("return period counting all exceedances") {
  CHECK(return_period_all_exceedances(100.0) == doctest::Approx(99.499).epsilon(1e-5));
  CHECK(std::abs(return_period_all_exceedances(21.0) - 20.5) < 0.51);
  CHECK(std::abs(return_period_all_exceedances(1e6) / 1e6 - 1.0) < 1e-5);
}

TEST_CASE("iid GEV block-maxima fit recovers simulated parameters") {
  const NhppParams truth{10.0, 2.0, 0.1};
  CounterRng rng(8);
  std::vector<double> maxima;
  for (int i = 0; i < 2000; ++i) {
    maxima.push_back(simulate_window_maximum(truth, 1.0, rng));
  }
  const StationaryFit fit = fit_gev_block_maxima(maxima);
  CHECK(fit.converged);
  REQUIRE(fit.covariance);
  CHECK(std::abs(fit.params.mu - truth.mu) < 4.0 * std::sqrt((*fit.covariance)(0, 0)));
  CHECK(std::abs(fit.params.sigma - truth.sigma) < 4.0 * std::sqrt((*fit.covariance)(1, 1)));
  CHECK(std::abs(fit.params.xi - truth.xi) < 4.0 * std::sqrt((*fit.covariance)(2, 2)));
  const std::vector<double> two{1.0, 2.0};
  CHECK_THROWS_AS((void)fit_gev_block_maxima(two), TooFewEvents);
  const std::vector<double> flat{3.0, 3.0, 3.0, 3.0};
  CHECK_THROWS_AS((void)fit_gev_block_maxima(flat), DegenerateSample);
}

TEST_CASE("mixture return level solves the mixture cdf and reduces to one component") {
  const NhppParams p{0.0, 1.5, 0.1};
  const ParamMixture one{{p}, {1.0}};
  CHECK(std::abs(mixture_return_level(50.0, one) - return_level_stationary(50.0, p)) < 1e-9);
  const ParamMixture two{{p, {2.0, 1.0, -0.1}}, {0.3, 0.7}};
  for (double T : {1.5, 10.0, 100.0, 1000.0}) {
    const double z = mixture_return_level(T, two);
    CHECK(std::abs(mixture_max_cdf(z, two) - (1.0 - 1.0 / T)) < 1e-9);
  }
  CHECK_THROWS_AS((void)mixture_return_level(10.0, ParamMixture{}), InvalidArgument);
}
