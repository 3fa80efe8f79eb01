#include "stormrisk/covariate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "stormrisk/error.hpp"
#include "stormrisk/numerics.hpp"

namespace stormrisk {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Trapezoid weights times density, scaled to sum to one.
void fill_weights(CovariateDensity& h) {
  const std::size_t n = h.grid.size();
  h.weights.assign(n, 0.0);
  if (n == 1) {
    h.weights[0] = 1.0;
    return;
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double half = 0.5 * (h.grid[k + 1] - h.grid[k]);
    h.weights[k] += half * h.density[k];
    h.weights[k + 1] += half * h.density[k + 1];
  }
  const double total = std::accumulate(h.weights.begin(), h.weights.end(), 0.0);
  for (auto& w : h.weights) {
    w /= total;
  }
  for (auto& d : h.density) {
    d /= total;
  }
}

double neg_log_intensity_sum(std::span<const double> z, const NhppParams& p) {
  double acc = 0.0;
  for (double x : z) {
    const double li = log_intensity(x, p);
    if (!std::isfinite(li)) {
      return kInf;
    }
    acc -= li;
  }
  return acc;
}

template <class Nll>
CovariateFit fit_impl(Nll&& nll, const CovariateNhpp& init, const CoefMask& free, const FitOptions& options,
                      double location_scale) {
  std::vector<std::size_t> index;
  for (std::size_t k = 0; k < kCoefCount; ++k) {
    if (free[k]) {
      index.push_back(k);
    }
  }
  if (index.empty()) {
    throw InvalidArgument("fit_covariate: no free coefficients");
  }
  auto expand = [&](std::span<const double> x) {
    CovariateNhpp m = init;
    for (std::size_t i = 0; i < index.size(); ++i) {
      m.coef[index[i]] = x[i];
    }
    return m;
  };
  auto objective = [&](std::span<const double> x) { return nll(expand(x)); };

  std::vector<double> start, step;
  for (auto k : index) {
    start.push_back(init.coef[k]);
    step.push_back(k == kMu0 || k == kMu1 ? 0.1 * location_scale : (k == kXi0 || k == kXi1 ? 0.05 : 0.1));
  }
  if (!std::isfinite(objective(start))) {
    throw InvalidArgument("fit_covariate: likelihood is infeasible at the initial coefficients");
  }
  numerics::SimplexOptions simplex;
  simplex.max_iterations = options.max_iterations;
  simplex.value_tolerance = options.value_tolerance;
  simplex.diameter_tolerance = options.diameter_tolerance;
  const auto best = numerics::minimize_with_restarts(objective, start, step, simplex, options.restarts,
                                                     options.restart_jitter, options.seed);
  CovariateFit fit;
  fit.model = expand(best.x);
  fit.nll = best.value;
  fit.converged = best.converged && std::isfinite(best.value);
  fit.iterations = best.iterations;
  fit.free = free;
  if (std::isfinite(best.value)) {
    if (auto inv = numerics::spd_inverse(numerics::numeric_hessian(objective, best.x))) {
      Eigen::Matrix<double, 6, 6> cov = Eigen::Matrix<double, 6, 6>::Zero();
      for (std::size_t i = 0; i < index.size(); ++i) {
        for (std::size_t j = 0; j < index.size(); ++j) {
          cov(static_cast<Eigen::Index>(index[i]), static_cast<Eigen::Index>(index[j])) =
              (*inv)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
      }
      fit.covariance = cov;
    }
  }
  return fit;
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) {
    return 1.0;
  }
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) {
    ss += (x - mean) * (x - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return sd > 0.0 ? sd : 1.0;
}

}  // namespace

CovariateDensity CovariateDensity::normal(double mean, double sd, int points, double span) {
  if (!(sd > 0.0) || points < 3) {
    throw InvalidArgument("CovariateDensity::normal: need sd > 0 and at least 3 points");
  }
  CovariateDensity h;
  h.grid.resize(static_cast<std::size_t>(points));
  h.density.resize(h.grid.size());
  const double mid = 0.5 * (static_cast<double>(points) - 1.0);
  const double dx = span * sd / mid;
  for (std::size_t k = 0; k < h.grid.size(); ++k) {
    const double off = (static_cast<double>(k) - mid) * dx;
    h.grid[k] = mean + off;
    const double y = off / sd;
    h.density[k] = std::exp(-0.5 * y * y) / (sd * std::sqrt(2.0 * std::numbers::pi));
  }
  fill_weights(h);
  return h;
}

CovariateDensity CovariateDensity::point_mass(double s) {
  CovariateDensity h;
  h.sample = {s};
  h.grid = {s};
  h.density = {1.0};
  h.weights = {1.0};
  return h;
}

double CovariateDensity::mean() const {
  return integrate([](double s) { return s; });
}

double CovariateDensity::density_at(double s) const {
  if (grid.size() < 2 || s < grid.front() || s > grid.back()) {
    return 0.0;
  }
  const auto it = std::upper_bound(grid.begin(), grid.end(), s);
  const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - grid.begin()), grid.size() - 1);
  const std::size_t lo = hi - 1;
  const double f = (s - grid[lo]) / (grid[hi] - grid[lo]);
  return density[lo] + f * (density[hi] - density[lo]);
}

double CovariateDensity::total_mass() const {
  if (grid.size() == 1) {
    return 1.0;
  }
  return numerics::trapezoid(grid, density);
}

CovariateDensity kde(std::span<const double> sample, int grid_points) {
  if (sample.size() < 2) {
    throw DegenerateSample("kde: need at least two observations");
  }
  if (grid_points < 3) {
    throw InvalidArgument("kde: need at least three grid points");
  }
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : sorted) {
    ss += (x - mean) * (x - mean);
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) {
    throw DegenerateSample("kde: sample has zero variance");
  }
  const double iqr = numerics::quantile_sorted(sorted, 0.75) - numerics::quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double bw = 0.9 * spread * std::pow(n, -0.2);

  CovariateDensity h;
  h.sample = sorted;
  h.bandwidth = bw;
  const double lo = sorted.front() - 3.0 * bw;
  const double hi = sorted.back() + 3.0 * bw;
  const double centre = 0.5 * (lo + hi);
  const double mid = 0.5 * (static_cast<double>(grid_points) - 1.0);
  const double dx = (hi - lo) / (static_cast<double>(grid_points) - 1.0);
  h.grid.resize(static_cast<std::size_t>(grid_points));
  h.density.resize(h.grid.size());
  const double norm = 1.0 / (n * bw * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t k = 0; k < h.grid.size(); ++k) {
    const double s = centre + (static_cast<double>(k) - mid) * dx;
    h.grid[k] = s;
    double acc = 0.0;
    for (double x : sorted) {
      const double y = (s - x) / bw;
      acc += std::exp(-0.5 * y * y);
    }
    h.density[k] = acc * norm;
  }
  fill_weights(h);
  return h;
}

void PerObservationData::validate() const {
  if (magnitudes.size() != covariates.size()) {
    throw InvalidArgument("PerObservationData: every exceedance needs a covariate value");
  }
  if (n_blocks < 1) {
    throw InvalidArgument("PerObservationData: n_blocks must be at least 1");
  }
  for (double z : magnitudes) {
    if (!(z > threshold)) {
      throw InvalidArgument("PerObservationData: exceedance not above the threshold");
    }
  }
}

void PerBlockData::validate() const {
  if (magnitudes.size() != covariates.size()) {
    throw InvalidArgument("PerBlockData: need one covariate value per block");
  }
  if (!weights.empty() && weights.size() != covariates.size()) {
    throw InvalidArgument("PerBlockData: need one weight per block");
  }
  for (const auto& block : magnitudes) {
    for (double z : block) {
      if (!(z > threshold)) {
        throw InvalidArgument("PerBlockData: exceedance not above the threshold");
      }
    }
  }
}

std::size_t PerBlockData::n_exceedances() const {
  std::size_t n = 0;
  for (const auto& b : magnitudes) {
    n += b.size();
  }
  return n;
}

double covariate_nll_per_obs(const PerObservationData& data, const CovariateNhpp& model,
                             const CovariateDensity& h) {
  const double integral = h.integrate([&](double s) { return tail_term(data.threshold, model.at(s)); });
  if (!std::isfinite(integral)) {
    return kInf;
  }
  double nll = static_cast<double>(data.n_blocks) * integral;
  for (std::size_t i = 0; i < data.magnitudes.size(); ++i) {
    const NhppParams p = model.at(data.covariates[i]);
    const double li = log_intensity(data.magnitudes[i], p);
    if (!std::isfinite(li) || !likelihood_regular(p)) {
      return kInf;
    }
    nll -= li;
  }
  return nll;
}

double covariate_nll_per_block(const PerBlockData& data, const CovariateNhpp& model) {
  double nll = 0.0;
  for (std::size_t i = 0; i < data.covariates.size(); ++i) {
    const NhppParams p = model.at(data.covariates[i]);
    const double exponent = data.weight(i) * tail_term(data.threshold, p);
    if (!std::isfinite(exponent) || !likelihood_regular(p)) {
      return kInf;
    }
    nll += exponent + neg_log_intensity_sum(data.magnitudes[i], p);
    if (!std::isfinite(nll)) {
      return kInf;
    }
  }
  return nll;
}

CovariateFit fit_covariate(const PerObservationData& data, const CovariateDensity& h, const CovariateNhpp& init,
                           const CoefMask& free, const FitOptions& options) {
  data.validate();
  return fit_impl([&](const CovariateNhpp& m) { return covariate_nll_per_obs(data, m, h); }, init, free, options,
                  sample_sd(data.magnitudes));
}

CovariateFit fit_covariate(const PerBlockData& data, const CovariateNhpp& init, const CoefMask& free,
                           const FitOptions& options) {
  data.validate();
  std::vector<double> all;
  for (const auto& b : data.magnitudes) {
    all.insert(all.end(), b.begin(), b.end());
  }
  return fit_impl([&](const CovariateNhpp& m) { return covariate_nll_per_block(data, m); }, init, free, options,
                  sample_sd(all));
}

ParamMixture covariate_mixture(const CovariateNhpp& model, const CovariateDensity& h) {
  ParamMixture mix;
  for (std::size_t k = 0; k < h.grid.size(); ++k) {
    if (h.weights[k] > 0.0) {
      mix.params.push_back(model.at(h.grid[k]));
      mix.weights.push_back(h.weights[k]);
    }
  }
  return mix;
}

double covariate_max_cdf(double z, const CovariateNhpp& model, const CovariateDensity& h, CovariateScope scope,
                         double window) {
  if (scope == CovariateScope::PerObservation) {
    const double integral = h.integrate([&](double s) { return tail_term(z, model.at(s)); });
    return std::exp(-window * integral);
  }
  return h.integrate([&](double s) { return std::exp(-window * tail_term(z, model.at(s))); });
}

double return_level_covariate(double T, const CovariateNhpp& model, const CovariateDensity& h,
                              CovariateScope scope) {
  if (!(T > 1.0)) {
    throw InvalidArgument("return period must exceed 1");
  }
  const NhppParams centre = model.at(h.mean());
  const double start = return_level_stationary(T, centre);
  const double target = 1.0 - 1.0 / T;
  auto residual = [&](double z) { return covariate_max_cdf(z, model, h, scope) - target; };
  return numerics::solve_increasing(residual, start, centre.sigma);
}

}  // namespace stormrisk
