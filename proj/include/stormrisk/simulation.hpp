#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "stormrisk/covariate.hpp"
#include "stormrisk/declustering.hpp"
#include "stormrisk/evt.hpp"
#include "stormrisk/random_effects.hpp"
#include "stormrisk/rng.hpp"

namespace stormrisk {

/// Points of one block above the threshold, times ascending.
struct SimulatedBlock {
  std::vector<double> times;
  std::vector<double> magnitudes;
};

inline constexpr double kMaxExpectedEvents = 1e5;

/// Poisson number of points with mean window.length() * tail(u), uniform
/// times, and sizes by inversion of P(Z > z | Z > u) = tail(z) / tail(u).
/// Throws InvalidArgument when the threshold is below the lower endpoint or
/// the expected count exceeds kMaxExpectedEvents.
[[nodiscard]] SimulatedBlock simulate_block(const NhppParams& p, double threshold, TimeWindow window,
                                            CounterRng& rng);

/// Maximum of the whole process over a window of the given length, drawn
/// from exp{-length tail(z)}. -inf for a zero-length window.
[[nodiscard]] double simulate_window_maximum(const NhppParams& p, double length, CounterRng& rng);

/// Maximum of a block given its points above the threshold; when there are
/// none, one uniform draw from the law of the maximum below the threshold.
[[nodiscard]] double block_maximum(const SimulatedBlock& block, const NhppParams& p, double threshold,
                                   double length, CounterRng& rng);

enum class ModelClass { Stationary, Covariate, RandomEffects, Regional };

struct SimDesign {
  ModelClass model_class = ModelClass::Stationary;
  NhppParams stationary{};
  /// Covariate class: one S ~ N(covariate_mean, covariate_sd^2) per block.
  CovariateNhpp covariate{};
  double covariate_mean = 0.0;
  double covariate_sd = 1.0;
  RandomEffectsModel random_effects{};
  RegionalModel regional{};
  /// One threshold for single-site classes; one per site for Regional.
  std::vector<double> thresholds{0.0};
  int n_blocks = 30;
  int replicates = 1;
  std::uint64_t seed = 1;

  void validate() const;
  [[nodiscard]] std::size_t n_sites() const;
  /// Parameters of site d in a block with the given covariate / effect row.
  [[nodiscard]] NhppParams block_params(std::size_t site, double covariate, const Eigen::VectorXd& effect) const;
};

struct SimulatedSite {
  double threshold = 0.0;
  std::vector<SimulatedBlock> blocks;
  std::vector<double> block_maxima;
};

struct SimulatedDataset {
  std::vector<SimulatedSite> sites;
  /// Per-block covariate (Covariate class), else empty.
  std::vector<double> covariates;
  /// Per-block effects, n_blocks x n_effects (random-effects classes), else empty.
  Eigen::MatrixXd effects;

  [[nodiscard]] BlockedSeries blocked(std::size_t site = 0) const;
  [[nodiscard]] PerBlockData per_block(std::size_t site = 0) const;
  [[nodiscard]] ThresholdedData pooled(std::size_t site = 0) const;
  /// Blocks labelled 0..n-1, event times as time_in_block.
  [[nodiscard]] EventSet event_set(std::size_t site = 0) const;
};

/// One replicate; replicate r uses substream r of the design seed.
[[nodiscard]] SimulatedDataset simulate_replicate(const SimDesign& design, int replicate);
[[nodiscard]] std::vector<SimulatedDataset> simulate_design(const SimDesign& design);

}  // namespace stormrisk
