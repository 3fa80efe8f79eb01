#include "fit_artifact.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "stormrisk/error.hpp"

namespace stormrisk::cli {
namespace {

const std::string& require(const io::KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) {
    throw InvalidArgument("fit artifact is missing '" + key + "'");
  }
  return it->second;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

template <int N>
std::optional<Eigen::Matrix<double, N, N>> read_matrix(const io::KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) {
    return std::nullopt;
  }
  const auto v = io::parse_double_list(it->second);
  if (v.size() != static_cast<std::size_t>(N * N)) {
    throw InvalidArgument(fmt::format("fit artifact '{}' needs {} entries", key, N * N));
  }
  Eigen::Matrix<double, N, N> m;
  for (int a = 0; a < N; ++a) {
    for (int b = 0; b < N; ++b) {
      m(a, b) = v[static_cast<std::size_t>(a * N + b)];
    }
  }
  return m;
}

template <int N>
std::string write_matrix(const Eigen::Matrix<double, N, N>& m) {
  std::vector<double> v;
  for (int a = 0; a < N; ++a) {
    for (int b = 0; b < N; ++b) {
      v.push_back(m(a, b));
    }
  }
  return io::format_double_list(v);
}

}  // namespace

io::KeyValues FitArtifact::to_key_values() const {
  io::KeyValues kv;
  kv["model"] = model;
  kv["first_block"] = std::to_string(first_block);
  kv["last_block"] = std::to_string(last_block);
  kv["sites"] = fmt::format("{}", fmt::join(sites, ","));
  kv["thresholds"] = io::format_double_list(thresholds);
  if (model == "stationary") {
    kv["params"] = io::format_double_list({stationary.mu, stationary.sigma, stationary.xi});
    kv["covariance"] = stationary_covariance ? write_matrix<3>(*stationary_covariance) : "";
  } else if (model == "covariate") {
    kv["coefficients"] = io::format_double_list({covariate.coef.begin(), covariate.coef.end()});
    kv["covariance"] = covariate_covariance ? write_matrix<6>(*covariate_covariance) : "";
    kv["block_covariates"] = io::format_double_list(block_covariates);
    kv["scope"] = scope == CovariateScope::PerBlock ? "per-block" : "per-observation";
  } else {
    std::vector<std::string> names;
    for (int j : included_dims(dims)) {
      names.emplace_back(std::array<const char*, 3>{"mu", "sigma", "xi"}[static_cast<std::size_t>(j)]);
    }
    kv["effect_dims"] = fmt::format("{}", fmt::join(names, ","));
    kv["posterior"] = posterior.string();
  }
  return kv;
}

FitArtifact FitArtifact::from_key_values(const io::KeyValues& kv, const std::filesystem::path& base) {
  FitArtifact a;
  a.model = require(kv, "model");
  a.first_block = io::parse_int(require(kv, "first_block"), 0);
  a.last_block = io::parse_int(require(kv, "last_block"), 0);
  a.sites = split_names(require(kv, "sites"));
  a.thresholds = io::parse_double_list(require(kv, "thresholds"));
  if (a.model == "stationary") {
    const auto p = io::parse_double_list(require(kv, "params"));
    if (p.size() != 3) {
      throw InvalidArgument("fit artifact 'params' needs 3 entries");
    }
    a.stationary = {p[0], p[1], p[2]};
    a.stationary_covariance = read_matrix<3>(kv, "covariance");
  } else if (a.model == "covariate") {
    const auto c = io::parse_double_list(require(kv, "coefficients"));
    if (c.size() != kCoefCount) {
      throw InvalidArgument("fit artifact 'coefficients' needs 6 entries");
    }
    std::copy(c.begin(), c.end(), a.covariate.coef.begin());
    a.covariate_covariance = read_matrix<6>(kv, "covariance");
    a.block_covariates = io::parse_double_list(require(kv, "block_covariates"));
    a.scope = require(kv, "scope") == "per-observation" ? CovariateScope::PerObservation : CovariateScope::PerBlock;
  } else if (a.bayesian()) {
    a.dims = {false, false, false};
    for (const auto& name : split_names(require(kv, "effect_dims"))) {
      if (name == "mu") {
        a.dims[0] = true;
      } else if (name == "sigma") {
        a.dims[1] = true;
      } else if (name == "xi") {
        a.dims[2] = true;
      } else {
        throw InvalidArgument("fit artifact: unknown effect dimension '" + name + "'");
      }
    }
    a.posterior = require(kv, "posterior");
    if (a.posterior.is_relative()) {
      a.posterior = base / a.posterior;
    }
  } else {
    throw InvalidArgument("fit artifact: unknown model '" + a.model + "'");
  }
  return a;
}

RegionalModel FitArtifact::skeleton() const {
  RegionalModel m;
  m.dims = dims;
  m.intercepts.assign(sites.size(), {0.0, 0.0, 0.0});
  const auto k = static_cast<Eigen::Index>(included_dims(dims).size());
  m.correlation = Eigen::MatrixXd::Identity(k, k);
  return m;
}

PosteriorSamples FitArtifact::load_posterior() const {
  std::ifstream in(posterior);
  if (!in) {
    throw InvalidArgument("cannot open posterior " + posterior.string());
  }
  return io::read_posterior(in, skeleton(), n_blocks());
}

}  // namespace stormrisk::cli
