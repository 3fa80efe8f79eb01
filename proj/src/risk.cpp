#include "stormrisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "stormrisk/error.hpp"
#include "stormrisk/numerics.hpp"
#include "stormrisk/parallel.hpp"
#include "stormrisk/rng.hpp"

namespace stormrisk {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Fills lo/hi from curves evaluated at parameter draws; draws whose
/// evaluation fails numerically are dropped.
template <class MakeMixture>
void fill_bands(RiskCurve& curve, const RiskQuery& q, std::size_t n_draws, MakeMixture&& make_mixture) {
  const std::size_t n_points = curve.points.size();
  std::vector<std::vector<double>> values(n_draws, std::vector<double>(n_points, kNaN));
  std::vector<char> ok(n_draws, 0);
  parallel_for(n_draws, q.threads, [&](std::size_t i) {
    try {
      const RiskCurve c = risk_curve(q, make_mixture(i));
      for (std::size_t j = 0; j < n_points; ++j) {
        values[i][j] = c.points[j].R;
      }
      ok[i] = 1;
    } catch (const Error&) {
      // Root or conditioning failure for an extreme draw.
    }
  });
  curve.band_draws_used = static_cast<int>(std::count(ok.begin(), ok.end(), 1));
  const double alpha = 0.5 * (1.0 - q.band_level);
  for (std::size_t j = 0; j < n_points; ++j) {
    std::vector<double> col;
    for (std::size_t i = 0; i < n_draws; ++i) {
      if (ok[i] && std::isfinite(values[i][j])) {
        col.push_back(values[i][j]);
      }
    }
    auto& p = curve.points[j];
    if (col.empty()) {
      p.lo = p.hi = kNaN;
      continue;
    }
    std::sort(col.begin(), col.end());
    p.lo = numerics::quantile_sorted(col, alpha);
    p.hi = numerics::quantile_sorted(col, 1.0 - alpha);
  }
}

void no_bands(RiskCurve& curve) {
  for (auto& p : curve.points) {
    p.lo = p.hi = p.R;
  }
}

}  // namespace

std::vector<double> default_T_star_grid(double lo, double hi, int points) {
  if (!(lo > 1.0) || !(hi > lo) || points < 2) {
    throw InvalidArgument("default_T_star_grid: need 1 < lo < hi and at least two points");
  }
  std::vector<double> out(static_cast<std::size_t>(points));
  const double step = std::log(hi / lo) / static_cast<double>(points - 1);
  for (int k = 0; k < points; ++k) {
    out[static_cast<std::size_t>(k)] = lo * std::exp(step * k);
  }
  out.back() = hi;
  return out;
}

void RiskQuery::validate() const {
  if (!(t > 0.0 && t < 1.0)) {
    throw InvalidArgument("RiskQuery: t must lie in (0, 1)");
  }
  if (!(T > 1.0)) {
    throw InvalidArgument("RiskQuery: T must exceed 1");
  }
  if (T_star.empty() || !std::is_sorted(T_star.begin(), T_star.end()) || !(T_star.front() > 1.0)) {
    throw InvalidArgument("RiskQuery: T_star grid must be non-empty, ascending and above 1");
  }
  if (band_draws < 0 || !(band_level > 0.0 && band_level < 1.0)) {
    throw InvalidArgument("RiskQuery: need band_draws >= 0 and band_level in (0, 1)");
  }
}

double unconditional_exceed_prob(double z, double t, const ParamMixture& mix) {
  // 1 - sum w exp(-x) written as sum w (1 - exp(-x)) to keep small values accurate.
  double acc = 0.0;
  for (std::size_t k = 0; k < mix.params.size(); ++k) {
    acc += mix.weights[k] * -std::expm1(-(1.0 - t) * tail_term(z, mix.params[k]));
  }
  return acc;
}

std::vector<double> conditioning_weights(double z_T, double t, const ParamMixture& mix) {
  const std::size_t n = mix.params.size();
  std::vector<double> logw(n, -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    if (!(mix.weights[k] > 0.0)) {
      continue;
    }
    const double li = log_intensity(z_T, mix.params[k]);
    if (!std::isfinite(li)) {
      continue;
    }
    logw[k] = std::log(mix.weights[k]) + std::log(t) + li - t * tail_term(z_T, mix.params[k]);
    top = std::max(top, logw[k]);
  }
  if (!std::isfinite(top)) {
    throw UnsupportedConditioningValue("conditioning level is impossible under every parameter value");
  }
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = std::exp(logw[k] - top);
    total += w[k];
  }
  for (double& x : w) {
    x /= total;
  }
  return w;
}

double conditional_exceed_prob(double z_star, double z_T, double t, const ParamMixture& mix) {
  const auto w = conditioning_weights(z_T, t, mix);
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] > 0.0) {
      acc += w[k] * -std::expm1(-(1.0 - t) * tail_term(z_star, mix.params[k]));
    }
  }
  return acc;
}

RiskPoint risk_at(double z_star, double z_T, double t, const ParamMixture& mix) {
  RiskPoint p;
  p.z_star = z_star;
  p.numerator = conditional_exceed_prob(z_star, z_T, t, mix);
  p.denominator = unconditional_exceed_prob(z_star, t, mix);
  if (p.denominator > 0.0) {
    p.R = p.numerator / p.denominator;
  } else {
    p.R = kNaN;
    p.status = RiskStatus::Undefined;
  }
  p.lo = p.hi = p.R;
  return p;
}

RiskCurve risk_curve(const RiskQuery& q, const ParamMixture& mix) {
  q.validate();
  RiskCurve curve;
  curve.t = q.t;
  curve.T = q.T;
  curve.z_T = mixture_return_level(q.T, mix);
  for (double Ts : q.T_star) {
    RiskPoint p = risk_at(mixture_return_level(Ts, mix), curve.z_T, q.t, mix);
    p.T_star = Ts;
    curve.points.push_back(p);
  }
  return curve;
}

double unconditional_exceed_prob_cov(double z, double t, const CovariateNhpp& model, const CovariateDensity& h) {
  return unconditional_exceed_prob(z, t, covariate_mixture(model, h));
}

double conditional_exceed_prob_cov(double z_star, double z_T, double t, const CovariateNhpp& model,
                                   const CovariateDensity& h) {
  return conditional_exceed_prob(z_star, z_T, t, covariate_mixture(model, h));
}

double conditional_covariate_mean(double z_T, double t, const CovariateNhpp& model, const CovariateDensity& h) {
  std::vector<double> s;
  for (std::size_t k = 0; k < h.grid.size(); ++k) {
    if (h.weights[k] > 0.0) {
      s.push_back(h.grid[k]);
    }
  }
  const auto w = conditioning_weights(z_T, t, covariate_mixture(model, h));
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    acc += w[k] * s[k];
  }
  return acc;
}

RiskCurve risk_measure_cov(const RiskQuery& q, const CovariateNhpp& model, const CovariateDensity& h,
                           const std::optional<Eigen::Matrix<double, 6, 6>>& covariance) {
  RiskCurve curve = risk_curve(q, covariate_mixture(model, h));
  if (!covariance || q.band_draws == 0) {
    no_bands(curve);
    return curve;
  }
  // Symmetric square root tolerates zero rows for fixed coefficients.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(*covariance);
  const Eigen::Matrix<double, 6, 1> root_values = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Matrix<double, 6, 6> root = eig.eigenvectors() * root_values.asDiagonal();
  const CounterRng base(q.seed);
  fill_bands(curve, q, static_cast<std::size_t>(q.band_draws), [&](std::size_t i) {
    CounterRng rng = base.substream(i);
    Eigen::Matrix<double, 6, 1> white;
    for (int a = 0; a < 6; ++a) {
      white(a) = standard_normal(rng);
    }
    const Eigen::Matrix<double, 6, 1> shift = root * white;
    CovariateNhpp m = model;
    for (std::size_t a = 0; a < kCoefCount; ++a) {
      m.coef[a] += shift(static_cast<Eigen::Index>(a));
    }
    return covariate_mixture(m, h);
  });
  return curve;
}

double unconditional_exceed_prob_re(double z, double t, const RandomEffectsModel& model, int nodes_per_dim) {
  return unconditional_exceed_prob(z, t, effect_mixture(model, nodes_per_dim));
}

double conditional_exceed_prob_re(double z_star, double z_T, double t, const RandomEffectsModel& model,
                                  int nodes_per_dim) {
  return conditional_exceed_prob(z_star, z_T, t, effect_mixture(model, nodes_per_dim));
}

RiskCurve risk_measure_re(const RiskQuery& q, const RandomEffectsModel& model, int nodes_per_dim) {
  RiskCurve curve = risk_curve(q, effect_mixture(model, nodes_per_dim));
  no_bands(curve);
  return curve;
}

RiskCurve risk_measure_re(const RiskQuery& q, const PosteriorSamples& posterior, std::size_t site,
                          int nodes_per_dim) {
  if (posterior.size() == 0) {
    throw InvalidArgument("risk_measure_re: empty posterior");
  }
  RiskCurve curve = risk_curve(q, effect_mixture(posterior.mean_model().site(site), nodes_per_dim));
  if (q.band_draws == 0) {
    no_bands(curve);
    return curve;
  }
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(q.band_draws), posterior.size());
  fill_bands(curve, q, n, [&](std::size_t i) {
    const std::size_t idx = i * posterior.size() / n;
    return effect_mixture(posterior.models[idx].site(site), nodes_per_dim);
  });
  return curve;
}

}  // namespace stormrisk
