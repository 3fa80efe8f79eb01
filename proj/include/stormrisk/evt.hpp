#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace stormrisk {

/// Below this |xi| the Gumbel limit (with a second-order series correction) is used.
inline constexpr double kShapeSwitch = 1e-8;

/// GEV / NHPP parameters in data units.
struct NhppParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;

  [[nodiscard]] bool valid() const;
  /// Finite only when xi > 0.
  [[nodiscard]] std::optional<double> lower_endpoint() const;
  /// Finite only when xi < 0.
  [[nodiscard]] std::optional<double> upper_endpoint() const;
  /// True when 1 + xi (z - mu) / sigma > 0.
  [[nodiscard]] bool in_support(double z) const;
};

/// At or below this shape the density diverges at the upper endpoint and the
/// likelihood is unbounded, so every likelihood treats it as infeasible.
inline constexpr double kMinLikelihoodShape = -1.0;

[[nodiscard]] inline bool likelihood_regular(const NhppParams& p) {
  return p.valid() && p.xi > kMinLikelihoodShape;
}

/// Scaled-time window [start, end] inside [0, 1].
struct TimeWindow {
  double start = 0.0;
  double end = 1.0;

  [[nodiscard]] double length() const { return end - start; }
};

/// Exceedances of a single threshold pooled over `n_blocks` blocks (years, seasons).
struct ThresholdedData {
  std::vector<double> exceedances;
  double threshold = 0.0;
  int n_blocks = 1;

  /// Throws InvalidArgument when an exceedance is not above the threshold or n_blocks < 1.
  void validate() const;
};

// Pointwise functions. "Tail term" is the expected number of points above z
// per unit of scaled time, [1 + xi (z - mu)/sigma]_+^(-1/xi); it is +inf below
// the lower endpoint (xi > 0) and 0 above the upper endpoint (xi < 0).

[[nodiscard]] double log_tail_term(double z, const NhppParams& p);
[[nodiscard]] double tail_term(double z, const NhppParams& p);
/// log of (1/sigma)[1 + xi (z - mu)/sigma]_+^(-1/xi - 1); -inf outside the support.
[[nodiscard]] double log_intensity(double z, const NhppParams& p);
/// Inverse of tail_term: the level z with tail_term(z) == count (count > 0).
[[nodiscard]] double level_for_tail(double count, const NhppParams& p);

[[nodiscard]] double gev_cdf(double z, const NhppParams& p);
[[nodiscard]] double gev_pdf(double z, const NhppParams& p);

/// Intensity of the limiting point process. It does not depend on time; the
/// window is accepted so call sites read like the integrated form.
[[nodiscard]] double nhpp_intensity(double z, TimeWindow window, const NhppParams& p);
/// Expected number of points in window x [u, inf).
[[nodiscard]] double integrated_intensity(double u, TimeWindow window, const NhppParams& p);

/// Negative log-likelihood of the stationary point-process model. Returns
/// +inf when the threshold or any exceedance lies outside the support.
[[nodiscard]] double stationary_nll(const ThresholdedData& data, const NhppParams& p);

struct FitOptions {
  int max_iterations = 20000;
  /// Simplex function-value spread at convergence.
  double value_tolerance = 1e-9;
  /// Simplex diameter above which an iteration-capped run counts as non-converged.
  double diameter_tolerance = 1e-5;
  int restarts = 5;
  double restart_jitter = 0.1;
  std::uint64_t seed = 0x5eedULL;
};

struct StationaryFit {
  NhppParams params;
  double nll = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Inverse observed information for (mu, sigma, xi); absent when the
  /// numerically differenced Hessian is not positive definite.
  std::optional<Eigen::Matrix3d> covariance;

  [[nodiscard]] bool degenerate_hessian() const { return !covariance.has_value(); }
};

/// Maximum likelihood fit by Nelder-Mead over (mu, log sigma, xi) with jittered
/// restarts. Never throws on numerical trouble; inspect `converged` and `covariance`.
[[nodiscard]] StationaryFit fit_stationary(const ThresholdedData& data, const NhppParams& init,
                                           const FitOptions& options = {});

/// Negative log-likelihood of iid GEV block maxima; +inf outside the support.
[[nodiscard]] double gev_block_maxima_nll(std::span<const double> maxima, const NhppParams& p);

/// Maximum likelihood GEV fit to block maxima, started from moment estimates
/// with xi = 0.1. Used as the covariate-blind baseline.
[[nodiscard]] StationaryFit fit_gev_block_maxima(std::span<const double> maxima, const FitOptions& options = {});

/// Level exceeded by the block maximum with probability 1/T.
[[nodiscard]] double return_level_stationary(double T, const NhppParams& p);

/// Expected waiting time between exceedances of the T-block return level when
/// all points, not just block maxima, are counted: -1 / log(1 - 1/T).
[[nodiscard]] double return_period_all_exceedances(double T);

/// Block whose parameters are drawn once per block from a discrete law:
/// component k has parameters params[k] with probability weights[k].
struct ParamMixture {
  std::vector<NhppParams> params;
  std::vector<double> weights;
};

/// P(max over a window of the given length <= z) = sum_k w_k exp{-window tail(z; k)}.
[[nodiscard]] double mixture_max_cdf(double z, const ParamMixture& mix, double window = 1.0);

/// Level whose mixture block-maximum cdf equals 1 - 1/T. The bracket starts at
/// the stationary level of the heaviest component. Throws BracketFailure.
[[nodiscard]] double mixture_return_level(double T, const ParamMixture& mix);

}  // namespace stormrisk
