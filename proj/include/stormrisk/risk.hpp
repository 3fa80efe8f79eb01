#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "stormrisk/covariate.hpp"
#include "stormrisk/evt.hpp"
#include "stormrisk/random_effects.hpp"

namespace stormrisk {

/// Log-spaced return periods, by default 50 points over [1.5, 1000].
[[nodiscard]] std::vector<double> default_T_star_grid(double lo = 1.5, double hi = 1000.0, int points = 50);

struct RiskQuery {
  /// Time within the season of the conditioning event, in (0, 1).
  double t = 0.4;
  /// Return period of the conditioning event.
  double T = 100.0;
  /// Return periods of the further event, ascending, each > 1.
  std::vector<double> T_star = default_T_star_grid();
  /// Parameter draws behind the bands; 0 disables bands.
  int band_draws = 500;
  double band_level = 0.95;
  std::uint64_t seed = 7;
  unsigned threads = 1;

  void validate() const;
};

enum class RiskStatus {
  Ok,
  /// Both probabilities are 0, so the ratio is not defined.
  Undefined,
};

struct RiskPoint {
  double T_star = 0.0;
  double z_star = 0.0;
  /// numerator / denominator; NaN when Undefined.
  double R = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  RiskStatus status = RiskStatus::Ok;
};

struct RiskCurve {
  double t = 0.0;
  double T = 0.0;
  double z_T = 0.0;
  std::vector<RiskPoint> points;
  /// Parameter draws that contributed to the bands.
  int band_draws_used = 0;
};

// Mixture forms shared by the covariate and random-effects cases. A block
// draws its parameters from `mix`; the season maximum up to t equals z_T.

/// P(max over (t, 1] > z) = 1 - sum_k w_k exp{-(1 - t) tail(z; k)}.
[[nodiscard]] double unconditional_exceed_prob(double z, double t, const ParamMixture& mix);

/// Component weights given that the maximum over [0, t] equals z_T:
/// proportional to w_k t lambda(z_T; k) exp{-t tail(z_T; k)}.
/// Throws UnsupportedConditioningValue when z_T is impossible under every component.
[[nodiscard]] std::vector<double> conditioning_weights(double z_T, double t, const ParamMixture& mix);

/// P(max over (t, 1] > z_star | max over [0, t] = z_T).
[[nodiscard]] double conditional_exceed_prob(double z_star, double z_T, double t, const ParamMixture& mix);

/// Ratio of conditional to unconditional probability at one pair of levels.
[[nodiscard]] RiskPoint risk_at(double z_star, double z_T, double t, const ParamMixture& mix);

/// Point curve for a mixture: z_T and each z_star from the mixture return level.
[[nodiscard]] RiskCurve risk_curve(const RiskQuery& q, const ParamMixture& mix);

// Observed covariate, constant within a season, with density h.

[[nodiscard]] double unconditional_exceed_prob_cov(double z, double t, const CovariateNhpp& model,
                                                   const CovariateDensity& h);
[[nodiscard]] double conditional_exceed_prob_cov(double z_star, double z_T, double t, const CovariateNhpp& model,
                                                 const CovariateDensity& h);
/// E[S | max over [0, t] = z_T].
[[nodiscard]] double conditional_covariate_mean(double z_T, double t, const CovariateNhpp& model,
                                                const CovariateDensity& h);

/// Curve at the given coefficients; when a covariance is supplied, bands are
/// pointwise percentiles over coefficient vectors drawn from N(coef, covariance).
[[nodiscard]] RiskCurve risk_measure_cov(const RiskQuery& q, const CovariateNhpp& model, const CovariateDensity& h,
                                         const std::optional<Eigen::Matrix<double, 6, 6>>& covariance = {});

// Latent block effects.

[[nodiscard]] double unconditional_exceed_prob_re(double z, double t, const RandomEffectsModel& model,
                                                  int nodes_per_dim = 32);
[[nodiscard]] double conditional_exceed_prob_re(double z_star, double z_T, double t, const RandomEffectsModel& model,
                                                int nodes_per_dim = 32);

/// Curve at fixed parameters, without bands.
[[nodiscard]] RiskCurve risk_measure_re(const RiskQuery& q, const RandomEffectsModel& model, int nodes_per_dim = 32);

/// Curve at the posterior mean model of `site`, with bands from the ratio
/// evaluated per posterior draw (q.band_draws draws evenly spaced through the chain).
[[nodiscard]] RiskCurve risk_measure_re(const RiskQuery& q, const PosteriorSamples& posterior, std::size_t site = 0,
                                        int nodes_per_dim = 32);

}  // namespace stormrisk
