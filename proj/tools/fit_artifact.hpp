#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stormrisk/covariate.hpp"
#include "stormrisk/io.hpp"
#include "stormrisk/random_effects.hpp"

namespace stormrisk::cli {

/// Everything `fit` writes for `return-levels` and `risk` to read back,
/// stored as a key = value file.
struct FitArtifact {
  std::string model;
  int first_block = 0;
  int last_block = 0;
  std::vector<std::string> sites;
  std::vector<double> thresholds;

  // stationary
  NhppParams stationary{};
  std::optional<Eigen::Matrix3d> stationary_covariance;

  // covariate
  CovariateNhpp covariate{};
  std::optional<Eigen::Matrix<double, 6, 6>> covariate_covariance;
  /// Per-block covariate values, in block order; also the KDE sample.
  std::vector<double> block_covariates;
  CovariateScope scope = CovariateScope::PerBlock;

  // random-effects / regional
  EffectDims dims = kLocationScaleEffects;
  std::filesystem::path posterior;

  [[nodiscard]] io::KeyValues to_key_values() const;
  /// Relative posterior paths are resolved against `base`.
  [[nodiscard]] static FitArtifact from_key_values(const io::KeyValues& kv, const std::filesystem::path& base);

  [[nodiscard]] std::size_t n_blocks() const { return static_cast<std::size_t>(last_block - first_block + 1); }
  [[nodiscard]] bool bayesian() const { return model == "random-effects" || model == "regional"; }
  [[nodiscard]] RegionalModel skeleton() const;
  [[nodiscard]] PosteriorSamples load_posterior() const;
};

}  // namespace stormrisk::cli
