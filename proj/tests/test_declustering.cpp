#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "declustering_oracle.hpp"
#include "stormrisk/declustering.hpp"
#include "stormrisk/error.hpp"
#include "stormrisk/rng.hpp"
#include "stormrisk/simulation.hpp"

using namespace stormrisk;
using namespace std::chrono;

using oracle::brute_force_clusters;
using oracle::daily;

TEST_CASE("hand-traced six-value fixture") {
  const EventSet es = decluster(daily({5, 1, 6, 1, 1, 7}), 4.0, 2);
  REQUIRE(es.events.size() == 2);
  CHECK(es.events[0].magnitude == 6.0);
  CHECK(es.events[1].magnitude == 7.0);
  CHECK(es.events[0].source_index == 2);
  CHECK(es.events[1].source_index == 5);
  CHECK(es.events[0].time_in_block == doctest::Approx(3.0 / 7.0));
  CHECK(es.events[1].time_in_block == doctest::Approx(6.0 / 7.0));
  CHECK(es.blocks == std::vector<int>{2000});
}

TEST_CASE("w = 1 keeps every maximal run of exceedances") {
  const EventSet es = decluster(daily({5, 6, 1, 7, 1, 1, 9, 8}), 4.0, 1);
  REQUIRE(es.events.size() == 3);
  CHECK(es.events[0].magnitude == 6.0);
  CHECK(es.events[1].magnitude == 7.0);
  CHECK(es.events[2].magnitude == 9.0);
}

TEST_CASE("all values below the threshold give an empty event set") {
  const EventSet es = decluster(daily({1, 2, 3, 2, 1}), 4.0, 3);
  CHECK(es.events.empty());
  CHECK(es.n_blocks() == 1);
}

TEST_CASE("ties inside a cluster go to the earliest occurrence") {
  const EventSet es = decluster(daily({1, 8, 5, 8, 1}), 4.0, 2);
  REQUIRE(es.events.size() == 1);
  CHECK(es.events[0].source_index == 1);
}

TEST_CASE("missing days count as below-threshold observations") {
  TimeSeries ts = daily({5, 1, 6});
  // Five missing days between the 1 and the 6: the gap of six now splits at w = 3.
  ts.times[2] = ts.times[1] + days{6};
  CHECK(decluster(ts, 4.0, 3).events.size() == 2);
  CHECK(decluster(daily({5, 1, 6}), 4.0, 3).events.size() == 1);
  CHECK(ts.missing_days() == 5);
}

TEST_CASE("water-year and calendar block labels") {
  const BlockRule water = BlockRule::water_year();
  CHECK(water.block_of(sys_days{year{1957} / October / 1}) == 1957);
  CHECK(water.block_of(sys_days{year{1958} / September / 30}) == 1957);
  CHECK(water.block_of(sys_days{year{1958} / October / 1}) == 1958);
  CHECK(BlockRule::calendar_year().block_of(sys_days{year{1958} / September / 30}) == 1958);
}

TEST_CASE("1000-point randomized fixture matches the brute-force scanner exactly") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    CounterRng rng(seed);
    std::vector<double> values(1000);
    for (auto& v : values) {
      // Coarse values so ties inside clusters occur.
      v = std::floor(10.0 * rng.uniform());
    }
    TimeSeries ts = daily(values, sys_days{year{2001} / March / 1});
    // Sprinkle gaps.
    Date cursor = ts.times.front();
    for (std::size_t i = 1; i < ts.times.size(); ++i) {
      cursor += days{rng.uniform() < 0.03 ? 1 + static_cast<int>(6 * rng.uniform()) : 1};
      ts.times[i] = cursor;
    }
    for (double u : {6.5, 7.5, 8.5}) {
      for (int w : {1, 2, 3, 5, 8}) {
        const EventSet es = decluster(ts, u, w);
        const auto oracle = brute_force_clusters(ts, u, w);
        REQUIRE(es.events.size() == oracle.size());
        for (std::size_t k = 0; k < oracle.size(); ++k) {
          CHECK(es.events[k].source_index == oracle[k].source_index);
          CHECK(es.events[k].block == oracle[k].block);
          CHECK(es.events[k].magnitude == oracle[k].magnitude);
          CHECK(es.events[k].time_in_block == oracle[k].time_in_block);
        }
      }
    }
  }
}

TEST_CASE("event count is non-increasing in w; exceedances are non-increasing in the threshold") {
  CounterRng rng(77);
  std::vector<double> values(2000);
  for (auto& v : values) {
    v = rng.uniform();
  }
  const TimeSeries ts = daily(values);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (int w = 1; w <= 20; ++w) {
    const auto n = decluster(ts, 0.9, w).events.size();
    CHECK(n <= prev);
    prev = n;
  }
  // With w at least the record length every exceedance joins one cluster.
  CHECK(decluster(ts, 0.9, 5000).events.size() == 1);
  prev = std::numeric_limits<std::size_t>::max();
  for (double u = 0.5; u < 1.0; u += 0.02) {
    const auto n = static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [&](double v) { return v > u; }));
    CHECK(decluster(ts, u, 4).events.size() <= n);
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("raising the threshold can split a cluster") {
  // The value 3 joins the two 5s at u = 2 but separates them at u = 4.
  CHECK(decluster(daily({5, 3, 5}), 2.0, 1).events.size() == 1);
  CHECK(decluster(daily({5, 3, 5}), 4.0, 1).events.size() == 2);
}

TEST_CASE("event invariants: above threshold, increasing times, cluster separation") {
  CounterRng rng(5);
  std::vector<double> values(3000);
  for (auto& v : values) {
    v = rng.uniform();
  }
  const TimeSeries ts = daily(values);
  const int w = 4;
  const EventSet es = decluster(ts, 0.85, w);
  for (std::size_t k = 0; k < es.events.size(); ++k) {
    const auto& e = es.events[k];
    CHECK(e.magnitude > es.threshold);
    CHECK(e.magnitude == ts.values[e.source_index]);
    CHECK(e.time_in_block > 0.0);
    CHECK(e.time_in_block < 1.0);
    if (k > 0 && es.events[k - 1].block == e.block) {
      CHECK(es.events[k - 1].time_in_block < e.time_in_block);
      int below = 0;
      for (std::size_t i = es.events[k - 1].source_index + 1; i < e.source_index; ++i) {
        below += ts.values[i] > es.threshold ? 0 : 1;
      }
      CHECK(below >= w);
    }
  }
}

TEST_CASE("quantile thresholds") {
  CHECK(quantile_threshold(daily({3, 1, 2}), 0.5) == 2.0);
  CounterRng rng(6);
  std::vector<double> values(500);
  for (auto& v : values) {
    v = standard_normal(rng);
  }
  const TimeSeries ts = daily(values);
  CHECK(quantile_threshold(ts, 0.7) <= quantile_threshold(ts, 0.8));
  CHECK(quantile_threshold(ts, 0.8) <= quantile_threshold(ts, 0.9));
  CHECK_THROWS_AS((void)quantile_threshold(ts, 1.0), InvalidArgument);
}

TEST_CASE("0.97 quantile on storm-driven daily data yields about three events a year") {
  // Background noise plus three storms a year on average, each lasting a few days.
  CounterRng rng(99);
  const int n_days = 365 * 40;
  std::vector<double> values(n_days);
  for (auto& v : values) {
    v = standard_normal(rng);
  }
  for (int d = 0; d < n_days; ++d) {
    if (rng.uniform() < 3.0 / 365.0) {
      const double peak = 6.0 - std::log(rng.uniform());
      for (int k = 0; k < 6 && d + k < n_days; ++k) {
        values[static_cast<std::size_t>(d + k)] += peak * std::exp(-0.15 * k);
      }
    }
  }
  const TimeSeries ts = daily(values);
  const EventSet es = decluster(ts, quantile_threshold(ts, 0.97), 7);
  const double per_block = static_cast<double>(es.events.size()) / static_cast<double>(es.n_blocks());
  MESSAGE("events per block: " << per_block);
  CHECK(per_block > 1.5);
  CHECK(per_block < 6.0);
}

TEST_CASE("inter-arrival P-P: two events and monotone model probabilities") {
  EventSet two;
  two.blocks = {0, 1};
  two.events = {{0, 0.5, 3.0}, {1, 0.25, 4.0}};
  const PpDiagnostic pp = interarrival_pp(two, {200});
  REQUIRE(pp.points.size() == 1);
  CHECK(pp.points[0].empirical == 0.5);
  CHECK(pp.points[0].interarrival == doctest::Approx(0.75));
  CHECK(pp.rate == doctest::Approx(1.0 / 0.75));

  EventSet one;
  one.blocks = {0};
  one.events = {{0, 0.5, 3.0}};
  CHECK_THROWS_AS((void)interarrival_pp(one), TooFewEvents);

  SimDesign d;
  d.stationary = {0.0, 1.0, 0.0};
  d.thresholds = {level_for_tail(3.0, d.stationary)};
  d.n_blocks = 30;
  const auto es = simulate_replicate(d, 0).event_set();
  const PpDiagnostic many = interarrival_pp(es, {300});
  for (std::size_t i = 1; i < many.points.size(); ++i) {
    CHECK(many.points[i].model >= many.points[i - 1].model);
    CHECK(many.points[i].empirical > many.points[i - 1].empirical);
    CHECK(many.points[i].lower <= many.points[i].upper);
  }
}

TEST_CASE("inter-arrival bands under the null and under block effects") {
  SimDesign null_design;
  null_design.stationary = {0.0, 1.0, 0.0};
  null_design.thresholds = {level_for_tail(3.0, null_design.stationary)};
  null_design.n_blocks = 30;
  null_design.seed = 404;

  SimDesign effects = null_design;
  effects.model_class = ModelClass::RandomEffects;
  effects.random_effects.coef = {0.0, 2.5, 0.0, 0.0, 0.0, 0.0};
  effects.random_effects.dims = {true, false, false};
  effects.random_effects.correlation = Eigen::MatrixXd::Identity(1, 1);
  effects.thresholds = {2.5};

  const int reps = 40;
  double outside = 0.0;
  int inside_95 = 0;
  int excess = 0;
  for (int r = 0; r < reps; ++r) {
    const PpDiagnostic pp0 = interarrival_pp(simulate_replicate(null_design, r).event_set(), {500, 0.95, 1000ULL + r});
    outside += pp0.fraction_outside_band() / reps;
    inside_95 += pp0.fraction_outside_band() <= 0.05 ? 1 : 0;

    const PpDiagnostic pp1 = interarrival_pp(simulate_replicate(effects, r).event_set(), {200});
    const auto at = std::lower_bound(pp1.points.begin(), pp1.points.end(), 0.1,
                                     [](const PpPoint& p, double q) { return p.empirical < q; });
    excess += at != pp1.points.end() && at->empirical > at->model ? 1 : 0;
  }
  MESSAGE("null: mean outside " << outside << ", replicates with >= 95% inside " << inside_95 << "/" << reps);
  MESSAGE("block effects: short inter-arrival excess in " << excess << "/" << reps);
  // Pointwise bands: each point falls outside with probability about 5%.
  CHECK(outside >= 0.03);
  CHECK(outside <= 0.07);
  CHECK(excess >= 36);
}
