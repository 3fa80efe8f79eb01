#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "stormrisk/evt.hpp"

namespace stormrisk {

/// Coefficient order shared by the covariate and random-effects models:
/// mu(s) = mu0 + mu1 s, log sigma(s) = sigma0 + sigma1 s, xi(s) = xi0 + xi1 s.
enum Coef : std::size_t { kMu0 = 0, kMu1, kSigma0, kSigma1, kXi0, kXi1, kCoefCount };

using Coefficients = std::array<double, kCoefCount>;
using CoefMask = std::array<bool, kCoefCount>;

inline constexpr CoefMask kAllFree{true, true, true, true, true, true};
/// Location-only covariate effect with constant scale and shape.
inline constexpr CoefMask kLocationEffectOnly{true, true, true, false, true, false};

struct CovariateNhpp {
  Coefficients coef{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  [[nodiscard]] static CovariateNhpp stationary(const NhppParams& p) {
    return {{p.mu, 0.0, std::log(p.sigma), 0.0, p.xi, 0.0}};
  }
  [[nodiscard]] NhppParams at(double s) const {
    return {coef[kMu0] + coef[kMu1] * s, std::exp(coef[kSigma0] + coef[kSigma1] * s), coef[kXi0] + coef[kXi1] * s};
  }
  [[nodiscard]] bool has_covariate_effect() const {
    return coef[kMu1] != 0.0 || coef[kSigma1] != 0.0 || coef[kXi1] != 0.0;
  }
};

/// Density of the covariate held on a grid, with quadrature weights such that
/// integrate(f) = sum_k weights[k] f(grid[k]) approximates the integral of f h.
struct CovariateDensity {
  std::vector<double> sample;
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> weights;

  /// Analytic normal density on `points` nodes over mean +/- span sd.
  [[nodiscard]] static CovariateDensity normal(double mean, double sd, int points = 1025, double span = 8.0);
  /// Point mass at s, for blocks sharing one covariate value.
  [[nodiscard]] static CovariateDensity point_mass(double s);

  [[nodiscard]] double mean() const;
  /// Linear interpolation of the grid density; 0 outside the grid.
  [[nodiscard]] double density_at(double s) const;
  /// Trapezoid integral of the grid density (1 up to rounding).
  [[nodiscard]] double total_mass() const;

  template <class F>
  [[nodiscard]] double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (weights[k] > 0.0) {
        acc += weights[k] * f(grid[k]);
      }
    }
    return acc;
  }
};

/// Gaussian kernel density with Silverman's rule-of-thumb bandwidth
/// 0.9 min(sd, IQR / 1.34) n^(-1/5), on a grid over [min - 3 bw, max + 3 bw],
/// renormalised so the trapezoid integral is 1. Throws DegenerateSample for
/// fewer than two points or zero spread.
[[nodiscard]] CovariateDensity kde(std::span<const double> sample, int grid_points = 512);

/// Exceedances each carrying the covariate observed with it.
struct PerObservationData {
  std::vector<double> magnitudes;
  std::vector<double> covariates;
  double threshold = 0.0;
  int n_blocks = 1;

  void validate() const;
};

/// Exceedances grouped by block with one covariate value per block.
struct PerBlockData {
  std::vector<std::vector<double>> magnitudes;
  std::vector<double> covariates;
  /// Block length as a fraction of a full block; empty means all 1.
  std::vector<double> weights;
  double threshold = 0.0;

  void validate() const;
  [[nodiscard]] double weight(std::size_t block) const { return weights.empty() ? 1.0 : weights[block]; }
  [[nodiscard]] std::size_t n_exceedances() const;
};

/// Negative log-likelihood with a per-observation covariate: the exponent term
/// n_y * integral tail(u; s) h(s) ds by quadrature on h, plus the intensity
/// product at each exceedance's own covariate. +inf when infeasible.
[[nodiscard]] double covariate_nll_per_obs(const PerObservationData& data, const CovariateNhpp& model,
                                           const CovariateDensity& h);

/// Negative log-likelihood with a block-constant covariate.
[[nodiscard]] double covariate_nll_per_block(const PerBlockData& data, const CovariateNhpp& model);

struct CovariateFit {
  CovariateNhpp model;
  double nll = 0.0;
  bool converged = false;
  int iterations = 0;
  CoefMask free = kAllFree;
  /// Inverse observed information over the coefficient vector; rows and
  /// columns of fixed coefficients are zero. Absent when not positive definite.
  std::optional<Eigen::Matrix<double, 6, 6>> covariance;
};

/// Maximum likelihood over the coefficients flagged in `free`; the others stay at `init`.
[[nodiscard]] CovariateFit fit_covariate(const PerObservationData& data, const CovariateDensity& h,
                                         const CovariateNhpp& init, const CoefMask& free = kAllFree,
                                         const FitOptions& options = {});
[[nodiscard]] CovariateFit fit_covariate(const PerBlockData& data, const CovariateNhpp& init,
                                         const CoefMask& free = kAllFree, const FitOptions& options = {});

/// How the covariate varies relative to the block maximum.
enum class CovariateScope {
  /// Covariate changes at every observation: block maximum cdf is
  /// exp{-integral tail(z; s) h(s) ds}.
  PerObservation,
  /// Covariate constant over a block: block maximum cdf is
  /// integral exp{-tail(z; s)} h(s) ds.
  PerBlock,
};

/// The covariate law as a parameter mixture over the grid of h.
[[nodiscard]] ParamMixture covariate_mixture(const CovariateNhpp& model, const CovariateDensity& h);

/// Distribution function of the maximum over a window of the given length.
[[nodiscard]] double covariate_max_cdf(double z, const CovariateNhpp& model, const CovariateDensity& h,
                                       CovariateScope scope, double window = 1.0);

/// Level z_T whose block-maximum cdf equals 1 - 1/T, with the covariate
/// integrated out. Throws BracketFailure when no root exists.
[[nodiscard]] double return_level_covariate(double T, const CovariateNhpp& model, const CovariateDensity& h,
                                            CovariateScope scope = CovariateScope::PerObservation);

}  // namespace stormrisk
