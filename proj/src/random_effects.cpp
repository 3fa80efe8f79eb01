#include "stormrisk/random_effects.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

#include "stormrisk/error.hpp"
#include "stormrisk/numerics.hpp"
#include "stormrisk/rng.hpp"

namespace stormrisk {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::array<const char*, 3> kDimName{"mu", "sigma", "xi"};

void check_correlation(const Eigen::MatrixXd& c, int k, const char* who) {
  if (c.rows() != k || c.cols() != k) {
    throw InvalidArgument(std::string(who) + ": correlation must be square with one row per included effect");
  }
  for (int a = 0; a < k; ++a) {
    if (std::abs(c(a, a) - 1.0) > 1e-12) {
      throw InvalidArgument(std::string(who) + ": correlation diagonal must be 1");
    }
    for (int b = 0; b < a; ++b) {
      if (c(a, b) != c(b, a)) {
        throw InvalidArgument(std::string(who) + ": correlation must be symmetric");
      }
    }
  }
  if (k > 0 && Eigen::LLT<Eigen::MatrixXd>(c).info() != Eigen::Success) {
    throw InvalidArgument(std::string(who) + ": correlation must be positive definite");
  }
}

/// Block parameters for a site's intercepts, shared slopes and an effect row.
NhppParams site_params(const SiteIntercepts& icpt, const std::array<double, 3>& slopes, const std::vector<int>& cols,
                       const double* effect) {
  std::array<double, 3> shift{0.0, 0.0, 0.0};
  for (std::size_t j = 0; j < 3; ++j) {
    if (cols[j] >= 0) {
      shift[j] = slopes[j] * effect[cols[j]];
    }
  }
  return {icpt[0] + shift[0], std::exp(icpt[1] + shift[1]), icpt[2] + shift[2]};
}

/// Column of each dimension in the effect matrix, -1 when excluded.
std::vector<int> effect_columns(const EffectDims& dims) {
  std::vector<int> cols(3, -1);
  int next = 0;
  for (std::size_t j = 0; j < 3; ++j) {
    if (dims[j]) {
      cols[j] = next++;
    }
  }
  return cols;
}

/// log N(0, Sigma) density from a precomputed Cholesky factor.
double log_mvn_from_factor(const Eigen::VectorXd& r, const Eigen::MatrixXd& lower, double log_det) {
  const auto k = static_cast<double>(r.size());
  const Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(r);
  return -0.5 * k * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * y.squaredNorm();
}

struct Factor {
  Eigen::MatrixXd lower;
  double log_det = 0.0;
  bool ok = false;
};

Factor factorise(const Eigen::MatrixXd& c) {
  Factor f;
  if (c.rows() == 0) {
    f.ok = true;
    return f;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    return f;
  }
  f.lower = llt.matrixL();
  f.log_det = 2.0 * f.lower.diagonal().array().log().sum();
  f.ok = std::isfinite(f.log_det);
  return f;
}

double normal_log_kernel(double x, double sd) { return -0.5 * (x / sd) * (x / sd); }

}  // namespace

std::vector<int> included_dims(const EffectDims& dims) {
  std::vector<int> out;
  for (int j = 0; j < 3; ++j) {
    if (dims[static_cast<std::size_t>(j)]) {
      out.push_back(j);
    }
  }
  return out;
}

double log_mvn_density(const Eigen::VectorXd& r, const Eigen::MatrixXd& correlation) {
  if (r.size() == 0) {
    return 0.0;
  }
  const Factor f = factorise(correlation);
  if (!f.ok) {
    return -kInf;
  }
  return log_mvn_from_factor(r, f.lower, f.log_det);
}

int RandomEffectsModel::n_effects() const { return static_cast<int>(included_dims(dims).size()); }

NhppParams RandomEffectsModel::at(const Eigen::VectorXd& effect) const {
  const auto cols = effect_columns(dims);
  return site_params({coef[kMu0], coef[kSigma0], coef[kXi0]}, {coef[kMu1], coef[kSigma1], coef[kXi1]}, cols,
                     effect.data());
}

void RandomEffectsModel::validate() const {
  for (std::size_t j = 0; j < 3; ++j) {
    if (!dims[j] && coef[kSlopeOf[j]] != 0.0) {
      throw InvalidArgument(std::string("RandomEffectsModel: slope on excluded dimension ") + kDimName[j] +
                            " must be 0");
    }
  }
  check_correlation(correlation, n_effects(), "RandomEffectsModel");
}

RegionalModel RegionalModel::from_single(const RandomEffectsModel& m) {
  RegionalModel r;
  r.intercepts = {{m.coef[kMu0], m.coef[kSigma0], m.coef[kXi0]}};
  r.slopes = {m.coef[kMu1], m.coef[kSigma1], m.coef[kXi1]};
  r.dims = m.dims;
  r.correlation = m.correlation;
  return r;
}

RandomEffectsModel RegionalModel::site(std::size_t d) const {
  RandomEffectsModel m;
  const auto& i = intercepts.at(d);
  m.coef = {i[0], slopes[0], i[1], slopes[1], i[2], slopes[2]};
  m.dims = dims;
  m.correlation = correlation;
  return m;
}

void RegionalModel::validate() const {
  if (intercepts.empty()) {
    throw InvalidArgument("RegionalModel: need at least one site");
  }
  for (std::size_t j = 0; j < 3; ++j) {
    if (!dims[j] && slopes[j] != 0.0) {
      throw InvalidArgument(std::string("RegionalModel: slope on excluded dimension ") + kDimName[j] +
                            " must be 0");
    }
  }
  check_correlation(correlation, static_cast<int>(included_dims(dims).size()), "RegionalModel");
}

void BlockedSeries::validate() const {
  if (!recorded.empty() && recorded.size() != magnitudes.size()) {
    throw InvalidArgument("BlockedSeries: recorded flags must match the block count");
  }
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    if (!is_recorded(i) && !magnitudes[i].empty()) {
      throw InvalidArgument("BlockedSeries: exceedances in a block marked as not recorded");
    }
    for (double z : magnitudes[i]) {
      if (!(z > threshold)) {
        throw InvalidArgument("BlockedSeries: exceedance not above the threshold");
      }
    }
  }
}

double block_log_likelihood(std::span<const double> magnitudes, double threshold, const NhppParams& p) {
  const double exponent = tail_term(threshold, p);
  if (!std::isfinite(exponent) || !likelihood_regular(p)) {
    return -kInf;
  }
  double acc = -exponent;
  for (double z : magnitudes) {
    const double li = log_intensity(z, p);
    if (!std::isfinite(li)) {
      return -kInf;
    }
    acc += li;
  }
  return acc;
}

double re_log_likelihood(const BlockedSeries& data, const RandomEffectsModel& model, const Eigen::MatrixXd& effects) {
  return regional_log_likelihood({data}, RegionalModel::from_single(model), effects);
}

double regional_log_likelihood(const std::vector<BlockedSeries>& data, const RegionalModel& model,
                               const Eigen::MatrixXd& effects) {
  if (data.size() != model.n_sites()) {
    throw InvalidArgument("regional_log_likelihood: one data set per site required");
  }
  const auto cols = effect_columns(model.dims);
  const auto k = static_cast<Eigen::Index>(included_dims(model.dims).size());
  const std::size_t n_blocks = data.empty() ? 0 : data.front().n_blocks();
  if (effects.rows() != static_cast<Eigen::Index>(n_blocks) || effects.cols() != k) {
    throw InvalidArgument("regional_log_likelihood: effects must be n_blocks x n_effects");
  }
  const Factor f = factorise(model.correlation);
  if (!f.ok) {
    return -kInf;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n_blocks; ++i) {
    const Eigen::VectorXd r = effects.row(static_cast<Eigen::Index>(i)).transpose();
    for (std::size_t d = 0; d < data.size(); ++d) {
      if (data[d].n_blocks() != n_blocks) {
        throw InvalidArgument("regional_log_likelihood: sites must share the block structure");
      }
      if (!data[d].is_recorded(i)) {
        continue;
      }
      total += block_log_likelihood(data[d].magnitudes[i], data[d].threshold,
                                    site_params(model.intercepts[d], model.slopes, cols, r.data()));
      if (!std::isfinite(total)) {
        return -kInf;
      }
    }
    if (k > 0) {
      total += log_mvn_from_factor(r, f.lower, f.log_det);
    }
  }
  return total;
}

Eigen::MatrixXd PosteriorSamples::effect_means() const {
  if (effects.empty()) {
    return {};
  }
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(effects.front().rows(), effects.front().cols());
  for (const auto& e : effects) {
    acc += e;
  }
  return acc / static_cast<double>(effects.size());
}

RegionalModel PosteriorSamples::mean_model() const {
  if (models.empty()) {
    throw InvalidArgument("PosteriorSamples: no draws");
  }
  RegionalModel out = models.front();
  const double n = static_cast<double>(models.size());
  for (auto& icpt : out.intercepts) {
    icpt = {0.0, 0.0, 0.0};
  }
  out.slopes = {0.0, 0.0, 0.0};
  out.correlation.setZero();
  for (const auto& m : models) {
    for (std::size_t d = 0; d < m.intercepts.size(); ++d) {
      for (std::size_t j = 0; j < 3; ++j) {
        out.intercepts[d][j] += m.intercepts[d][j] / n;
      }
    }
    for (std::size_t j = 0; j < 3; ++j) {
      out.slopes[j] += m.slopes[j] / n;
    }
    out.correlation += m.correlation / n;
  }
  return out;
}

std::vector<double> PosteriorSamples::slope_draws(int dim) const {
  std::vector<double> out;
  out.reserve(models.size());
  for (const auto& m : models) {
    out.push_back(m.slopes.at(static_cast<std::size_t>(dim)));
  }
  return out;
}

std::vector<double> PosteriorSamples::correlation_draws(int a, int b) const {
  std::vector<double> out;
  out.reserve(models.size());
  for (const auto& m : models) {
    out.push_back(m.correlation(a, b));
  }
  return out;
}

namespace {

/// Chain state with cached likelihood cells so each update only recomputes
/// the terms it touches.
class Sampler {
 public:
  Sampler(const std::vector<BlockedSeries>& data, const RegionalModel& init, const Priors& priors,
          const McmcConfig& config)
      : data_(data), priors_(priors), config_(config), model_(init), cols_(effect_columns(init.dims)),
        dims_(included_dims(init.dims)), rng_(config.seed) {
    n_sites_ = data.size();
    n_blocks_ = data.front().n_blocks();
    k_ = static_cast<int>(dims_.size());
    effects_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_blocks_), k_);
    cells_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_sites_), static_cast<Eigen::Index>(n_blocks_));
    phi_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_blocks_));
    factor_ = factorise(model_.correlation);

    const double loc = priors_.location_scale;
    for (std::size_t d = 0; d < n_sites_; ++d) {
      const std::string tag = n_sites_ == 1 ? "" : "[" + std::to_string(d) + "]";
      add_component("mu0" + tag, 0.1 * loc);
      add_component("sigma0" + tag, 0.1);
      add_component("xi0" + tag, 0.05);
    }
    for (int j : dims_) {
      add_component(std::string(kDimName[static_cast<std::size_t>(j)]) + "1",
                    j == 0 ? 0.1 * loc : 0.05);
    }
    for (int a = 0; a < k_; ++a) {
      for (int b = a + 1; b < k_; ++b) {
        add_component(std::string("rho_") + kDimName[static_cast<std::size_t>(dims_[static_cast<std::size_t>(a)])] +
                          "_" + kDimName[static_cast<std::size_t>(dims_[static_cast<std::size_t>(b)])],
                      0.2);
        pairs_.emplace_back(a, b);
      }
    }
    effects_first_ = components_.size();
    for (int j : dims_) {
      add_component(std::string("effects_") + kDimName[static_cast<std::size_t>(j)], 0.5);
    }
    rescale_first_ = components_.size();
    for (int j : dims_) {
      add_component(std::string("rescale_") + kDimName[static_cast<std::size_t>(j)] + "1", 0.1);
    }
  }

  double initial_log_posterior() {
    if (!factor_.ok) {
      throw PriorMismatch("fit_bayes: initial correlation is not positive definite");
    }
    if (!std::isfinite(log_prior())) {
      throw PriorMismatch("fit_bayes: initial values lie outside the prior support");
    }
    for (std::size_t d = 0; d < n_sites_; ++d) {
      for (std::size_t i = 0; i < n_blocks_; ++i) {
        cell(d, i) = row_cell(d, i, model_, effect_row(i));
      }
    }
    refresh_phi(factor_, phi_);
    const double lp = current();
    if (!std::isfinite(lp)) {
      throw PriorMismatch("fit_bayes: likelihood is zero at the initial values");
    }
    return lp;
  }

  PosteriorSamples run() {
    initial_log_posterior();
    PosteriorSamples out;
    out.config = config_;
    for (int it = 0; it < config_.iterations; ++it) {
      adapting_ = it < config_.burn_in;
      sweep();
      rescale_sweep();
      const int kept = it - config_.burn_in;
      if (kept >= 0 && kept % std::max(1, config_.thin) == 0) {
        out.models.push_back(model_);
        out.effects.push_back(effects_);
        out.log_posterior.push_back(current());
      }
    }
    for (const auto& c : components_) {
      out.components.push_back(c.name);
      const double rate = c.post_proposals > 0 ? static_cast<double>(c.post_accepts) / c.post_proposals : 0.0;
      out.acceptance.push_back(rate);
      if (c.post_proposals > 0 && rate < 0.01) {
        out.chain_stuck = true;
      }
    }
    return out;
  }

 private:
  struct Component {
    std::string name;
    double log_scale = 0.0;
    long proposals = 0;
    long post_proposals = 0;
    long post_accepts = 0;
  };

  void add_component(std::string name, double scale) {
    components_.push_back({std::move(name), std::log(scale), 0, 0, 0});
  }

  double& cell(std::size_t d, std::size_t i) {
    return cells_(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i));
  }

  // effects_ is column-major; gather a row before taking its address.
  NhppParams params_with(std::size_t d, const RegionalModel& m, const Eigen::VectorXd& r) const {
    return site_params(m.intercepts[d], m.slopes, cols_, r.data());
  }

  double row_cell(std::size_t d, std::size_t i, const RegionalModel& m, const Eigen::VectorXd& r) const {
    if (!data_[d].is_recorded(i)) {
      return 0.0;
    }
    return block_log_likelihood(data_[d].magnitudes[i], data_[d].threshold, params_with(d, m, r));
  }

  Eigen::VectorXd effect_row(std::size_t i) const { return effects_.row(static_cast<Eigen::Index>(i)).transpose(); }

  void refresh_phi(const Factor& f, Eigen::VectorXd& out) const {
    for (std::size_t i = 0; i < n_blocks_; ++i) {
      out(static_cast<Eigen::Index>(i)) = k_ == 0 ? 0.0 : log_mvn_from_factor(effect_row(i), f.lower, f.log_det);
    }
  }

  double current() const { return cells_.sum() + phi_.sum() + log_prior(); }

  double log_prior() const { return log_prior_of(model_); }

  double log_prior_of(const RegionalModel& m) const {
    const double loc_sd = priors_.location_sd_factor * priors_.location_scale;
    double lp = 0.0;
    for (const auto& icpt : m.intercepts) {
      if (!(std::abs(icpt[2]) < priors_.shape_bound)) {
        return -kInf;
      }
      lp += normal_log_kernel(icpt[0], loc_sd) + normal_log_kernel(icpt[1], priors_.log_scale_sd) +
            normal_log_kernel(icpt[2], priors_.shape_sd);
    }
    const std::array<double, 3> slope_sd{loc_sd, priors_.log_scale_sd, priors_.shape_sd};
    for (int j : dims_) {
      const double s = m.slopes[static_cast<std::size_t>(j)];
      if (priors_.nonnegative_slopes && s < 0.0) {
        return -kInf;
      }
      lp += normal_log_kernel(s, slope_sd[static_cast<std::size_t>(j)]);
    }
    return lp;
  }

  double draw_normal() { return standard_normal(rng_); }

  /// Accept/reject with log ratio `delta`, adapting the component's scale.
  bool decide(Component& c, double delta) {
    const double alpha = std::isnan(delta) ? 0.0 : std::min(1.0, std::exp(std::min(delta, 0.0)));
    const bool accept = delta >= 0.0 || rng_.uniform() < alpha;
    if (adapting_) {
      ++c.proposals;
      c.log_scale += std::pow(static_cast<double>(c.proposals) + 1.0, -0.6) * (alpha - config_.target_acceptance);
    } else {
      ++c.post_proposals;
      if (accept) {
        ++c.post_accepts;
      }
    }
    return accept;
  }

  void sweep() {
    std::size_t comp = 0;
    // Site intercepts: only that site's row of cells changes.
    for (std::size_t d = 0; d < n_sites_; ++d) {
      for (std::size_t j = 0; j < 3; ++j, ++comp) {
        Component& c = components_[comp];
        RegionalModel prop = model_;
        prop.intercepts[d][j] += std::exp(c.log_scale) * draw_normal();
        const double prior_new = log_prior_of(prop);
        Eigen::VectorXd row(static_cast<Eigen::Index>(n_blocks_));
        double delta = prior_new - log_prior();
        if (std::isfinite(prior_new)) {
          for (std::size_t i = 0; i < n_blocks_; ++i) {
            row(static_cast<Eigen::Index>(i)) = row_cell(d, i, prop, effect_row(i));
          }
          delta += row.sum() - cells_.row(static_cast<Eigen::Index>(d)).sum();
        }
        if (decide(c, delta)) {
          model_ = prop;
          cells_.row(static_cast<Eigen::Index>(d)) = row.transpose();
        }
      }
    }
    // Shared slopes: every cell changes.
    for (int j : dims_) {
      Component& c = components_[comp++];
      RegionalModel prop = model_;
      prop.slopes[static_cast<std::size_t>(j)] += std::exp(c.log_scale) * draw_normal();
      const double prior_new = log_prior_of(prop);
      Eigen::MatrixXd cells = cells_;
      double delta = prior_new - log_prior();
      if (std::isfinite(prior_new)) {
        for (std::size_t i = 0; i < n_blocks_; ++i) {
          const Eigen::VectorXd r = effect_row(i);
          for (std::size_t d = 0; d < n_sites_; ++d) {
            cells(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = row_cell(d, i, prop, r);
          }
        }
        delta += cells.sum() - cells_.sum();
      }
      if (decide(c, delta)) {
        model_ = prop;
        cells_ = cells;
      }
    }
    // Correlations on the atanh scale; uniform prior on rho gives the Jacobian term.
    for (const auto& [a, b] : pairs_) {
      Component& c = components_[comp++];
      const double rho = model_.correlation(a, b);
      const double z = std::atanh(rho) + std::exp(c.log_scale) * draw_normal();
      const double rho_new = std::tanh(z);
      RegionalModel prop = model_;
      prop.correlation(a, b) = prop.correlation(b, a) = rho_new;
      const Factor f = factorise(prop.correlation);
      double delta = -kInf;
      Eigen::VectorXd phi(static_cast<Eigen::Index>(n_blocks_));
      if (f.ok && std::abs(rho_new) < 1.0) {
        refresh_phi(f, phi);
        delta = phi.sum() - phi_.sum() + std::log1p(-rho_new * rho_new) - std::log1p(-rho * rho);
      }
      if (decide(c, delta)) {
        model_ = prop;
        factor_ = f;
        phi_ = phi;
      }
    }
    // Effects, one block and one dimension at a time: only that block's
    // column of cells and its density factor change.
    for (std::size_t i = 0; i < n_blocks_; ++i) {
      for (int col = 0; col < k_; ++col) {
        Component& c = components_[effects_first_ + static_cast<std::size_t>(col)];
        Eigen::VectorXd r = effect_row(i);
        r(col) += std::exp(c.log_scale) * draw_normal();
        Eigen::VectorXd column(static_cast<Eigen::Index>(n_sites_));
        for (std::size_t d = 0; d < n_sites_; ++d) {
          column(static_cast<Eigen::Index>(d)) = row_cell(d, i, model_, r);
        }
        const double phi_new = log_mvn_from_factor(r, factor_.lower, factor_.log_det);
        const auto ii = static_cast<Eigen::Index>(i);
        const double delta = column.sum() - cells_.col(ii).sum() + phi_new - phi_(ii);
        if (decide(c, delta)) {
          effects_.row(ii) = r.transpose();
          cells_.col(ii) = column;
          phi_(ii) = phi_new;
        }
      }
    }
  }

  // Slope times effect is what the likelihood sees, so slope and effect column
  // are strongly correlated a posteriori. Scale the slope by c and the column
  // by 1/c together; the Jacobian of that map is c^(1 - n_blocks).
  void rescale_sweep() {
    for (int col = 0; col < k_; ++col) {
      Component& c = components_[rescale_first_ + static_cast<std::size_t>(col)];
      const auto j = static_cast<std::size_t>(dims_[static_cast<std::size_t>(col)]);
      if (model_.slopes[j] == 0.0) {
        continue;
      }
      const double log_c = std::exp(c.log_scale) * draw_normal();
      const double factor = std::exp(log_c);
      RegionalModel prop = model_;
      prop.slopes[j] *= factor;
      Eigen::MatrixXd effects = effects_;
      effects.col(col) /= factor;
      const double prior_new = log_prior_of(prop);
      Eigen::MatrixXd cells = cells_;
      Eigen::VectorXd phi(static_cast<Eigen::Index>(n_blocks_));
      double delta = prior_new - log_prior();
      if (std::isfinite(prior_new)) {
        for (std::size_t i = 0; i < n_blocks_; ++i) {
          const Eigen::VectorXd r = effects.row(static_cast<Eigen::Index>(i)).transpose();
          for (std::size_t d = 0; d < n_sites_; ++d) {
            cells(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = row_cell(d, i, prop, r);
          }
          phi(static_cast<Eigen::Index>(i)) = log_mvn_from_factor(r, factor_.lower, factor_.log_det);
        }
        delta += cells.sum() - cells_.sum() + phi.sum() - phi_.sum() +
                 (1.0 - static_cast<double>(n_blocks_)) * log_c;
      }
      if (decide(c, delta)) {
        model_ = prop;
        effects_ = effects;
        cells_ = cells;
        phi_ = phi;
      }
    }
  }

  const std::vector<BlockedSeries>& data_;
  Priors priors_;
  McmcConfig config_;
  RegionalModel model_;
  std::vector<int> cols_;
  std::vector<int> dims_;
  CounterRng rng_;
  std::size_t n_sites_ = 0;
  std::size_t n_blocks_ = 0;
  int k_ = 0;
  Eigen::MatrixXd effects_;
  Eigen::MatrixXd cells_;
  Eigen::VectorXd phi_;
  Factor factor_;
  std::vector<Component> components_;
  std::vector<std::pair<int, int>> pairs_;
  std::size_t effects_first_ = 0;
  std::size_t rescale_first_ = 0;
  bool adapting_ = true;
};

}  // namespace

PosteriorSamples fit_bayes(const std::vector<BlockedSeries>& data, const RegionalModel& init, const Priors& priors,
                           const McmcConfig& config) {
  if (data.empty() || data.size() != init.n_sites()) {
    throw InvalidArgument("fit_bayes: one data set per site required");
  }
  for (const auto& site : data) {
    site.validate();
    if (site.n_blocks() != data.front().n_blocks()) {
      throw InvalidArgument("fit_bayes: sites must share the block structure");
    }
  }
  if (data.front().n_blocks() == 0) {
    throw InvalidArgument("fit_bayes: no blocks");
  }
  if (config.iterations <= config.burn_in || config.burn_in < 0 || config.thin < 1) {
    throw InvalidArgument("fit_bayes: need iterations > burn_in >= 0 and thin >= 1");
  }
  if (!(priors.location_scale > 0.0) || !(priors.shape_bound > 0.0)) {
    throw InvalidArgument("fit_bayes: prior scales must be positive");
  }
  try {
    init.validate();
  } catch (const InvalidArgument& e) {
    throw PriorMismatch(std::string("fit_bayes: ") + e.what());
  }
  Sampler sampler(data, init, priors, config);
  return sampler.run();
}

PosteriorSamples fit_bayes(const BlockedSeries& data, const RandomEffectsModel& init, const Priors& priors,
                           const McmcConfig& config) {
  return fit_bayes(std::vector<BlockedSeries>{data}, RegionalModel::from_single(init), priors, config);
}

double block_return_level(double T, const RandomEffectsModel& model, const Eigen::VectorXd& effect) {
  return return_level_stationary(T, model.at(effect));
}

ParamMixture effect_mixture(const RandomEffectsModel& model, int nodes_per_dim) {
  model.validate();
  const int k = model.n_effects();
  ParamMixture mix;
  if (k == 0) {
    mix.params.push_back(model.at(Eigen::VectorXd()));
    mix.weights.push_back(1.0);
    return mix;
  }
  const auto& rule = numerics::gauss_hermite(nodes_per_dim);
  const Eigen::MatrixXd lower = Eigen::LLT<Eigen::MatrixXd>(model.correlation).matrixL();
  const auto n = static_cast<std::size_t>(nodes_per_dim);
  std::vector<std::size_t> idx(static_cast<std::size_t>(k), 0);
  Eigen::VectorXd x(k);
  // Products below this contribute less than rounding to any probability here.
  constexpr double kNegligible = 1e-18;
  while (true) {
    double w = 1.0;
    for (int a = 0; a < k; ++a) {
      x(a) = rule.nodes[idx[static_cast<std::size_t>(a)]];
      w *= rule.weights[idx[static_cast<std::size_t>(a)]];
    }
    if (w > kNegligible) {
      mix.params.push_back(model.at(lower * x));
      mix.weights.push_back(w);
    }
    std::size_t a = 0;
    while (a < idx.size() && ++idx[a] == n) {
      idx[a++] = 0;
    }
    if (a == idx.size()) {
      break;
    }
  }
  double total = 0.0;
  for (double w : mix.weights) {
    total += w;
  }
  for (double& w : mix.weights) {
    w /= total;
  }
  return mix;
}

double marginal_return_level(double T, const RandomEffectsModel& model, int nodes_per_dim) {
  return mixture_return_level(T, effect_mixture(model, nodes_per_dim));
}

}  // namespace stormrisk
