#include "stormrisk/evt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "stormrisk/error.hpp"
#include "stormrisk/numerics.hpp"

namespace stormrisk {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

bool NhppParams::valid() const {
  return std::isfinite(mu) && std::isfinite(sigma) && sigma > 0.0 && std::isfinite(xi);
}

std::optional<double> NhppParams::lower_endpoint() const {
  if (xi > 0.0) {
    return mu - sigma / xi;
  }
  return std::nullopt;
}

std::optional<double> NhppParams::upper_endpoint() const {
  if (xi < 0.0) {
    return mu - sigma / xi;
  }
  return std::nullopt;
}

bool NhppParams::in_support(double z) const {
  if (std::abs(xi) < kShapeSwitch) {
    return std::isfinite(z);
  }
  return 1.0 + xi * (z - mu) / sigma > 0.0;
}

void ThresholdedData::validate() const {
  if (n_blocks < 1) {
    throw InvalidArgument("ThresholdedData: n_blocks must be at least 1");
  }
  for (double z : exceedances) {
    if (!(z > threshold)) {
      throw InvalidArgument("ThresholdedData: exceedance not above the threshold");
    }
  }
}

double log_tail_term(double z, const NhppParams& p) {
  const double y = (z - p.mu) / p.sigma;
  if (std::abs(p.xi) < kShapeSwitch) {
    // -log1p(xi y)/xi expanded to second order in xi.
    return -y + p.xi * y * y / 2.0 - p.xi * p.xi * y * y * y / 3.0;
  }
  const double arg = p.xi * y;
  if (!(arg > -1.0)) {
    return p.xi > 0.0 ? kInf : -kInf;
  }
  return -std::log1p(arg) / p.xi;
}

double tail_term(double z, const NhppParams& p) { return std::exp(log_tail_term(z, p)); }

double log_intensity(double z, const NhppParams& p) {
  const double lt = log_tail_term(z, p);
  if (!std::isfinite(lt)) {
    return -kInf;
  }
  return -std::log(p.sigma) + (1.0 + p.xi) * lt;
}

double level_for_tail(double count, const NhppParams& p) {
  if (!(count > 0.0)) {
    throw InvalidArgument("level_for_tail: expected count must be positive");
  }
  const double lc = std::log(count);
  if (std::abs(p.xi) < kShapeSwitch) {
    return p.mu + p.sigma * (-lc + p.xi * lc * lc / 2.0);
  }
  return p.mu + p.sigma * std::expm1(-p.xi * lc) / p.xi;
}

double gev_cdf(double z, const NhppParams& p) { return std::exp(-tail_term(z, p)); }

double gev_pdf(double z, const NhppParams& p) {
  const double li = log_intensity(z, p);
  if (!std::isfinite(li)) {
    return 0.0;
  }
  return std::exp(li - tail_term(z, p));
}

double nhpp_intensity(double z, TimeWindow /*window*/, const NhppParams& p) {
  return std::exp(log_intensity(z, p));
}

double integrated_intensity(double u, TimeWindow window, const NhppParams& p) {
  if (!(window.start <= window.end) || window.start < 0.0 || window.end > 1.0) {
    throw InvalidArgument("integrated_intensity: window must satisfy 0 <= t1 <= t2 <= 1");
  }
  const double len = window.length();
  if (len == 0.0) {
    return 0.0;
  }
  return len * tail_term(u, p);
}

double stationary_nll(const ThresholdedData& data, const NhppParams& p) {
  if (!likelihood_regular(p)) {
    return kInf;
  }
  const double exponent = static_cast<double>(data.n_blocks) * tail_term(data.threshold, p);
  if (!std::isfinite(exponent)) {
    return kInf;
  }
  double nll = exponent;
  for (double z : data.exceedances) {
    const double li = log_intensity(z, p);
    if (!std::isfinite(li)) {
      return kInf;
    }
    nll -= li;
  }
  return nll;
}

StationaryFit fit_stationary(const ThresholdedData& data, const NhppParams& init,
                             const FitOptions& options) {
  data.validate();
  if (!init.valid()) {
    throw InvalidArgument("fit_stationary: initial parameters are invalid");
  }
  auto objective = [&](std::span<const double> th) {
    return stationary_nll(data, {th[0], std::exp(th[1]), th[2]});
  };
  const std::array<double, 3> start{init.mu, std::log(init.sigma), init.xi};
  const std::array<double, 3> step{0.1 * init.sigma, 0.1, 0.05};

  numerics::SimplexOptions simplex;
  simplex.max_iterations = options.max_iterations;
  simplex.value_tolerance = options.value_tolerance;
  simplex.diameter_tolerance = options.diameter_tolerance;
  const auto best = numerics::minimize_with_restarts(objective, start, step, simplex, options.restarts,
                                                     options.restart_jitter, options.seed);

  StationaryFit fit;
  fit.params = {best.x[0], std::exp(best.x[1]), best.x[2]};
  fit.nll = best.value;
  fit.converged = best.converged && std::isfinite(best.value);
  fit.iterations = best.iterations;

  // Fewer points than parameters: the information matrix is not trustworthy.
  if (data.exceedances.size() < 3 || !std::isfinite(best.value)) {
    return fit;
  }
  auto natural = [&](std::span<const double> th) {
    return stationary_nll(data, {th[0], th[1], th[2]});
  };
  const std::array<double, 3> at{fit.params.mu, fit.params.sigma, fit.params.xi};
  if (auto inv = numerics::spd_inverse(numerics::numeric_hessian(natural, at))) {
    fit.covariance = Eigen::Matrix3d(*inv);
  }
  return fit;
}

double gev_block_maxima_nll(std::span<const double> maxima, const NhppParams& p) {
  if (!likelihood_regular(p)) {
    return kInf;
  }
  double nll = 0.0;
  for (double z : maxima) {
    const double li = log_intensity(z, p);
    if (!std::isfinite(li)) {
      return kInf;
    }
    nll += tail_term(z, p) - li;
  }
  return nll;
}

StationaryFit fit_gev_block_maxima(std::span<const double> maxima, const FitOptions& options) {
  if (maxima.size() < 3) {
    throw TooFewEvents("fit_gev_block_maxima: need at least three maxima");
  }
  double mean = 0.0;
  for (double z : maxima) {
    mean += z / static_cast<double>(maxima.size());
  }
  double ss = 0.0;
  for (double z : maxima) {
    ss += (z - mean) * (z - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(maxima.size() - 1));
  if (!(sd > 0.0)) {
    throw DegenerateSample("fit_gev_block_maxima: maxima have zero spread");
  }
  constexpr double kEulerGamma = 0.5772156649015329;
  const double sigma0 = sd * std::sqrt(6.0) / std::numbers::pi;
  NhppParams init{mean - kEulerGamma * sigma0, sigma0, 0.1};
  if (!std::isfinite(gev_block_maxima_nll(maxima, init))) {
    init.xi = 0.0;
  }
  auto objective = [&](std::span<const double> th) {
    return gev_block_maxima_nll(maxima, {th[0], std::exp(th[1]), th[2]});
  };
  const std::array<double, 3> start{init.mu, std::log(init.sigma), init.xi};
  const std::array<double, 3> step{0.1 * init.sigma, 0.1, 0.05};
  numerics::SimplexOptions simplex;
  simplex.max_iterations = options.max_iterations;
  simplex.value_tolerance = options.value_tolerance;
  simplex.diameter_tolerance = options.diameter_tolerance;
  const auto best = numerics::minimize_with_restarts(objective, start, step, simplex, options.restarts,
                                                     options.restart_jitter, options.seed);
  StationaryFit fit;
  fit.params = {best.x[0], std::exp(best.x[1]), best.x[2]};
  fit.nll = best.value;
  fit.converged = best.converged && std::isfinite(best.value);
  fit.iterations = best.iterations;
  if (std::isfinite(best.value)) {
    auto natural = [&](std::span<const double> th) { return gev_block_maxima_nll(maxima, {th[0], th[1], th[2]}); };
    const std::array<double, 3> at{fit.params.mu, fit.params.sigma, fit.params.xi};
    if (auto inv = numerics::spd_inverse(numerics::numeric_hessian(natural, at))) {
      fit.covariance = Eigen::Matrix3d(*inv);
    }
  }
  return fit;
}

double return_level_stationary(double T, const NhppParams& p) {
  if (!(T > 1.0)) {
    throw InvalidArgument("return period must exceed 1");
  }
  return level_for_tail(-std::log1p(-1.0 / T), p);
}

double return_period_all_exceedances(double T) {
  if (!(T > 1.0)) {
    throw InvalidArgument("return period must exceed 1");
  }
  return -1.0 / std::log1p(-1.0 / T);
}

double mixture_max_cdf(double z, const ParamMixture& mix, double window) {
  double acc = 0.0;
  for (std::size_t k = 0; k < mix.params.size(); ++k) {
    if (mix.weights[k] > 0.0) {
      acc += mix.weights[k] * std::exp(-window * tail_term(z, mix.params[k]));
    }
  }
  return acc;
}

double mixture_return_level(double T, const ParamMixture& mix) {
  if (!(T > 1.0)) {
    throw InvalidArgument("return period must exceed 1");
  }
  if (mix.params.empty() || mix.params.size() != mix.weights.size()) {
    throw InvalidArgument("mixture_return_level: empty or mismatched mixture");
  }
  const auto heaviest = static_cast<std::size_t>(
      std::max_element(mix.weights.begin(), mix.weights.end()) - mix.weights.begin());
  const NhppParams& centre = mix.params[heaviest];
  const double target = 1.0 - 1.0 / T;
  return numerics::solve_increasing([&](double z) { return mixture_max_cdf(z, mix) - target; },
                                    return_level_stationary(T, centre), centre.sigma);
}

}  // namespace stormrisk
