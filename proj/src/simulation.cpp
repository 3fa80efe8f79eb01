#include "stormrisk/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "stormrisk/error.hpp"

namespace stormrisk {

SimulatedBlock simulate_block(const NhppParams& p, double threshold, TimeWindow window, CounterRng& rng) {
  const double expected = integrated_intensity(threshold, window, p);
  if (!std::isfinite(expected)) {
    throw InvalidArgument("simulate_block: threshold below the lower endpoint of the block parameters");
  }
  if (expected > kMaxExpectedEvents) {
    throw InvalidArgument("simulate_block: expected exceedance count exceeds the simulation limit");
  }
  SimulatedBlock out;
  const std::uint64_t count = poisson(rng, expected);
  if (count == 0) {
    return out;
  }
  const double rate = tail_term(threshold, p);
  out.times.resize(count);
  out.magnitudes.resize(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    out.times[k] = window.start + window.length() * rng.uniform();
    out.magnitudes[k] = level_for_tail(rng.uniform() * rate, p);
  }
  std::sort(out.times.begin(), out.times.end());
  return out;
}

double simulate_window_maximum(const NhppParams& p, double length, CounterRng& rng) {
  if (length < 0.0) {
    throw InvalidArgument("simulate_window_maximum: negative window");
  }
  const double v = rng.uniform();
  if (length == 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  return level_for_tail(-std::log(v) / length, p);
}

double block_maximum(const SimulatedBlock& block, const NhppParams& p, double threshold, double length,
                     CounterRng& rng) {
  const double v = rng.uniform();
  if (!block.magnitudes.empty()) {
    return *std::max_element(block.magnitudes.begin(), block.magnitudes.end());
  }
  if (length <= 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  // P(M <= z | no points above u) = exp{-length (tail(z) - tail(u))} for z <= u.
  return level_for_tail(tail_term(threshold, p) - std::log(v) / length, p);
}

void SimDesign::validate() const {
  if (n_blocks < 1 || replicates < 1) {
    throw InvalidArgument("SimDesign: need n_blocks >= 1 and replicates >= 1");
  }
  if (thresholds.size() != n_sites()) {
    throw InvalidArgument("SimDesign: need one threshold per site");
  }
  switch (model_class) {
    case ModelClass::Stationary:
      if (!stationary.valid()) {
        throw InvalidArgument("SimDesign: invalid stationary parameters");
      }
      break;
    case ModelClass::Covariate:
      if (!(covariate_sd >= 0.0)) {
        throw InvalidArgument("SimDesign: covariate_sd must be non-negative");
      }
      break;
    case ModelClass::RandomEffects:
      random_effects.validate();
      break;
    case ModelClass::Regional:
      regional.validate();
      break;
  }
}

std::size_t SimDesign::n_sites() const {
  return model_class == ModelClass::Regional ? regional.n_sites() : 1;
}

NhppParams SimDesign::block_params(std::size_t site, double s, const Eigen::VectorXd& effect) const {
  switch (model_class) {
    case ModelClass::Stationary:
      return stationary;
    case ModelClass::Covariate:
      return covariate.at(s);
    case ModelClass::RandomEffects:
      return random_effects.at(effect);
    case ModelClass::Regional:
      return regional.site(site).at(effect);
  }
  return stationary;
}

SimulatedDataset simulate_replicate(const SimDesign& design, int replicate) {
  design.validate();
  CounterRng rng(design.seed, static_cast<std::uint64_t>(replicate));
  SimulatedDataset out;
  const std::size_t n_sites = design.n_sites();
  out.sites.resize(n_sites);
  for (std::size_t d = 0; d < n_sites; ++d) {
    out.sites[d].threshold = design.thresholds[d];
  }

  Eigen::MatrixXd lower;
  int k = 0;
  if (design.model_class == ModelClass::RandomEffects || design.model_class == ModelClass::Regional) {
    const Eigen::MatrixXd& corr = design.model_class == ModelClass::RandomEffects ? design.random_effects.correlation
                                                                                    : design.regional.correlation;
    k = static_cast<int>(corr.rows());
    if (k > 0) {
      lower = corr.llt().matrixL();
    }
    out.effects.resize(design.n_blocks, k);
  }

  Eigen::VectorXd effect(k);
  for (int i = 0; i < design.n_blocks; ++i) {
    double s = 0.0;
    if (design.model_class == ModelClass::Covariate) {
      s = design.covariate_mean + design.covariate_sd * standard_normal(rng);
      out.covariates.push_back(s);
    }
    if (k > 0) {
      Eigen::VectorXd white(k);
      for (int a = 0; a < k; ++a) {
        white(a) = standard_normal(rng);
      }
      effect = lower * white;
      out.effects.row(i) = effect.transpose();
    }
    for (std::size_t d = 0; d < n_sites; ++d) {
      const NhppParams p = design.block_params(d, s, effect);
      auto& site = out.sites[d];
      site.blocks.push_back(simulate_block(p, site.threshold, {0.0, 1.0}, rng));
      site.block_maxima.push_back(block_maximum(site.blocks.back(), p, site.threshold, 1.0, rng));
    }
  }
  return out;
}

std::vector<SimulatedDataset> simulate_design(const SimDesign& design) {
  std::vector<SimulatedDataset> out;
  out.reserve(static_cast<std::size_t>(design.replicates));
  for (int r = 0; r < design.replicates; ++r) {
    out.push_back(simulate_replicate(design, r));
  }
  return out;
}

BlockedSeries SimulatedDataset::blocked(std::size_t site) const {
  const auto& s = sites.at(site);
  BlockedSeries out;
  out.threshold = s.threshold;
  for (const auto& b : s.blocks) {
    out.magnitudes.push_back(b.magnitudes);
  }
  return out;
}

PerBlockData SimulatedDataset::per_block(std::size_t site) const {
  const auto& s = sites.at(site);
  PerBlockData out;
  out.threshold = s.threshold;
  out.covariates = covariates;
  for (const auto& b : s.blocks) {
    out.magnitudes.push_back(b.magnitudes);
  }
  return out;
}

ThresholdedData SimulatedDataset::pooled(std::size_t site) const {
  const auto& s = sites.at(site);
  ThresholdedData out;
  out.threshold = s.threshold;
  out.n_blocks = static_cast<int>(s.blocks.size());
  for (const auto& b : s.blocks) {
    out.exceedances.insert(out.exceedances.end(), b.magnitudes.begin(), b.magnitudes.end());
  }
  return out;
}

EventSet SimulatedDataset::event_set(std::size_t site) const {
  const auto& s = sites.at(site);
  EventSet out;
  out.threshold = s.threshold;
  for (std::size_t i = 0; i < s.blocks.size(); ++i) {
    out.blocks.push_back(static_cast<int>(i));
    const auto& b = s.blocks[i];
    // Points are stored with sorted times and iid sizes, so pairing by index is a valid draw.
    for (std::size_t j = 0; j < b.times.size(); ++j) {
      out.events.push_back({static_cast<int>(i), b.times[j], b.magnitudes[j]});
    }
  }
  return out;
}

}  // namespace stormrisk
