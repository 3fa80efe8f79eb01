#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stormrisk/covariate.hpp"
#include "stormrisk/evt.hpp"

namespace stormrisk {

/// Which of (mu, sigma, xi) carry a block effect, in that order.
using EffectDims = std::array<bool, 3>;
inline constexpr EffectDims kLocationScaleEffects{true, true, false};
inline constexpr EffectDims kAllEffects{true, true, true};

/// Slope coefficient driven by effect dimension j.
inline constexpr std::array<Coef, 3> kSlopeOf{kMu1, kSigma1, kXi1};

/// Number of included dimensions and their positions in (mu, sigma, xi).
[[nodiscard]] std::vector<int> included_dims(const EffectDims& dims);

/// log density of N(0, correlation) at r; -inf when correlation is not positive definite.
[[nodiscard]] double log_mvn_density(const Eigen::VectorXd& r, const Eigen::MatrixXd& correlation);

/// Single-site model: block i has mu = mu0 + mu1 r_mu,i, log sigma = sigma0 +
/// sigma1 r_sigma,i, xi = xi0 + xi1 r_xi,i, with r_i ~ N(0, correlation) over
/// the included dimensions.
struct RandomEffectsModel {
  Coefficients coef{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  EffectDims dims = kLocationScaleEffects;
  /// Square, one row per included dimension.
  Eigen::MatrixXd correlation = Eigen::MatrixXd::Identity(2, 2);

  [[nodiscard]] int n_effects() const;
  /// Block parameters for an effect vector over the included dimensions.
  [[nodiscard]] NhppParams at(const Eigen::VectorXd& effect) const;
  /// Throws InvalidArgument for a malformed correlation matrix or a nonzero
  /// slope on an excluded dimension.
  void validate() const;
};

/// Intercepts of one site: mu0, log sigma0, xi0.
using SiteIntercepts = std::array<double, 3>;

/// Sites sharing slopes, correlation and one effect vector per block.
struct RegionalModel {
  std::vector<SiteIntercepts> intercepts;
  /// mu1, sigma1, xi1.
  std::array<double, 3> slopes{0.0, 0.0, 0.0};
  EffectDims dims = kLocationScaleEffects;
  Eigen::MatrixXd correlation = Eigen::MatrixXd::Identity(2, 2);

  [[nodiscard]] static RegionalModel from_single(const RandomEffectsModel& m);
  [[nodiscard]] std::size_t n_sites() const { return intercepts.size(); }
  [[nodiscard]] RandomEffectsModel site(std::size_t d) const;
  void validate() const;
};

/// Exceedances of one site grouped by block. Blocks where the site was not
/// recording contribute nothing to the likelihood.
struct BlockedSeries {
  std::vector<std::vector<double>> magnitudes;
  /// Empty means every block was recorded.
  std::vector<bool> recorded;
  double threshold = 0.0;

  [[nodiscard]] std::size_t n_blocks() const { return magnitudes.size(); }
  [[nodiscard]] bool is_recorded(std::size_t block) const { return recorded.empty() || recorded[block]; }
  void validate() const;
};

/// Likelihood contribution of one block: -tail(u) + sum log intensity.
/// -inf when the threshold or an exceedance is outside the support.
[[nodiscard]] double block_log_likelihood(std::span<const double> magnitudes, double threshold,
                                          const NhppParams& p);

/// log likelihood of one site including the effect density factors.
/// `effects` has one row per block and one column per included dimension.
[[nodiscard]] double re_log_likelihood(const BlockedSeries& data, const RandomEffectsModel& model,
                                       const Eigen::MatrixXd& effects);

/// log likelihood over sites with one shared effect density factor per block.
[[nodiscard]] double regional_log_likelihood(const std::vector<BlockedSeries>& data, const RegionalModel& model,
                                             const Eigen::MatrixXd& effects);

/// Weakly informative priors. Location coefficients are scaled by
/// `location_scale` (typically the spread of the exceedances).
struct Priors {
  double location_scale = 1.0;
  double location_sd_factor = 100.0;
  double log_scale_sd = 10.0;
  double shape_sd = 0.25;
  /// xi0 is truncated to (-shape_bound, shape_bound).
  double shape_bound = 0.5;
  /// Restrict slopes to be non-negative. The likelihood is invariant under
  /// (slope, effect) -> (-slope, -effect), so without this the posterior has
  /// mirror-image modes.
  bool nonnegative_slopes = true;
};

struct McmcConfig {
  int iterations = 200000;
  int burn_in = 50000;
  int thin = 1;
  std::uint64_t seed = 1;
  double target_acceptance = 0.44;
};

/// Draws after burn-in (and thinning), one entry per retained iteration.
struct PosteriorSamples {
  std::vector<RegionalModel> models;
  /// One n_blocks x n_effects matrix per draw.
  std::vector<Eigen::MatrixXd> effects;
  std::vector<double> log_posterior;
  /// Names and post burn-in acceptance rates of each updated component.
  std::vector<std::string> components;
  std::vector<double> acceptance;
  /// Some component accepted fewer than 1% of proposals after burn-in.
  bool chain_stuck = false;
  McmcConfig config;

  [[nodiscard]] std::size_t size() const { return models.size(); }
  /// Posterior mean effects, n_blocks x n_effects.
  [[nodiscard]] Eigen::MatrixXd effect_means() const;
  /// Componentwise posterior mean model.
  [[nodiscard]] RegionalModel mean_model() const;
  /// Values of a scalar across draws.
  [[nodiscard]] std::vector<double> slope_draws(int dim) const;
  [[nodiscard]] std::vector<double> correlation_draws(int a, int b) const;
};

/// Adaptive componentwise random-walk Metropolis-Hastings. Proposal scales are
/// tuned during burn-in with Robbins-Monro steps towards the target acceptance
/// rate and frozen afterwards. Correlations move on the atanh scale and
/// proposals that are not positive definite are rejected. Throws PriorMismatch
/// when `init` lies outside the prior support. Deterministic in the seed.
[[nodiscard]] PosteriorSamples fit_bayes(const std::vector<BlockedSeries>& data, const RegionalModel& init,
                                         const Priors& priors, const McmcConfig& config);
[[nodiscard]] PosteriorSamples fit_bayes(const BlockedSeries& data, const RandomEffectsModel& init,
                                         const Priors& priors, const McmcConfig& config);

/// Return level for one block given its effect vector.
[[nodiscard]] double block_return_level(double T, const RandomEffectsModel& model, const Eigen::VectorXd& effect);

/// Gauss-Hermite product rule over the effects after Cholesky whitening of
/// the correlation, as a parameter mixture.
[[nodiscard]] ParamMixture effect_mixture(const RandomEffectsModel& model, int nodes_per_dim = 32);

/// Level whose effect-averaged block-maximum cdf equals 1 - 1/T.
[[nodiscard]] double marginal_return_level(double T, const RandomEffectsModel& model, int nodes_per_dim = 32);

}  // namespace stormrisk
