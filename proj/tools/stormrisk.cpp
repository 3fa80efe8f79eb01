// Command-line front end: decluster, fit, return-levels, risk, simulate.

#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "fit_artifact.hpp"
#include "stormrisk/covariate.hpp"
#include "stormrisk/declustering.hpp"
#include "stormrisk/error.hpp"
#include "stormrisk/evt.hpp"
#include "stormrisk/io.hpp"
#include "stormrisk/random_effects.hpp"
#include "stormrisk/risk.hpp"
#include "stormrisk/simulation.hpp"

namespace fs = std::filesystem;
using namespace stormrisk;

namespace {

enum ExitCode : int { kSuccess = 0, kInputError = 2, kEmptyResult = 3, kNumericalWarning = 4 };

constexpr std::uint64_t kDefaultSeed = 20240101;
constexpr std::array<const char*, 3> kDimName{"mu", "sigma", "xi"};

/// Outcome details echoed into the manifest.
struct Report {
  io::KeyValues results;
  std::vector<std::string> warnings;
  bool empty = false;

  void warn(std::string text) {
    std::cerr << "warning: " << text << '\n';
    warnings.push_back(std::move(text));
  }
  [[nodiscard]] int exit_code() const {
    if (empty) {
      return kEmptyResult;
    }
    return warnings.empty() ? kSuccess : kNumericalWarning;
  }
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw InvalidArgument("cannot write " + path.string());
  }
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidArgument("cannot open " + path.string());
  }
  return in;
}

/// Flag value, else the STORMRISK_SEED environment variable, else the built-in default.
std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value) {
  if (opt->count() > 0) {
    return flag_value;
  }
  if (const char* env = std::getenv("STORMRISK_SEED"); env != nullptr && *env != '\0') {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string("STORMRISK_SEED is not an unsigned integer: ") + env);
    }
  }
  return kDefaultSeed;
}

void write_manifest(const fs::path& path, const CLI::App& cmd, std::uint64_t seed, const Report& report) {
  io::KeyValues kv;
  for (const CLI::Option* opt : cmd.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") {
      continue;
    }
    if (opt->count() > 0) {
      const auto& res = opt->results();
      kv["config." + name] = fmt::format("{}", fmt::join(res, ","));
    } else {
      kv["config." + name] = opt->get_default_str();
    }
  }
  kv["config.seed"] = std::to_string(seed);
  for (const auto& [k, v] : report.results) {
    kv["result." + k] = v;
  }
  kv["status"] = report.empty ? "empty" : (report.warnings.empty() ? "ok" : "warning");
  for (std::size_t i = 0; i < report.warnings.size(); ++i) {
    kv[fmt::format("warning.{}", i)] = report.warnings[i];
  }
  auto out = open_output(path);
  fmt::print(out, "# stormrisk {} run manifest\n", cmd.get_name());
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::array<char, 32> stamp{};
  std::strftime(stamp.data(), stamp.size(), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  fmt::print(out, "# created {}\n", stamp.data());
  io::write_key_values(out, kv);
}

BlockRule parse_block_rule(const std::string& name) {
  if (name == "water-year") {
    return BlockRule::water_year();
  }
  if (name == "calendar") {
    return BlockRule::calendar_year();
  }
  throw InvalidArgument("unknown block rule '" + name + "'");
}

double mean_excess(const std::vector<double>& z, double u) {
  double acc = 0.0;
  for (double x : z) {
    acc += x - u;
  }
  return z.empty() ? 1.0 : std::max(acc / static_cast<double>(z.size()), 1e-6);
}

/// Starting point whose exponent term matches the observed exceedance rate.
NhppParams moment_start(const std::vector<double>& z, double u, int n_blocks) {
  const double sigma = mean_excess(z, u);
  const double rate = std::max(static_cast<double>(z.size()), 0.5) / static_cast<double>(n_blocks);
  return {u + sigma * std::log(rate), sigma, 0.05};
}

std::vector<double> parse_T_star_grid(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::size_t start = 0;
    while (true) {
      const auto colon = text.find(':', start);
      parts.push_back(io::parse_double(text.substr(start, colon - start), 0));
      if (colon == std::string::npos) {
        break;
      }
      start = colon + 1;
    }
    if (parts.size() != 3) {
      throw InvalidArgument("T* grid must be 'lo:hi:points' or a comma list");
    }
    return default_T_star_grid(parts[0], parts[1], static_cast<int>(parts[2]));
  }
  return io::parse_double_list(text);
}

// ---------------------------------------------------------------- decluster

struct DeclusterArgs {
  std::string input;
  std::string output;
  std::string diagnostics;
  std::string manifest;
  std::string config;
  std::string block_rule = "water-year";
  double quantile = 0.97;
  double threshold = 0.0;
  int run_length = 7;
  int resamples = 1000;
  std::uint64_t seed = kDefaultSeed;
};

int run_decluster(const DeclusterArgs& a, const CLI::App& cmd) {
  const std::uint64_t seed = resolve_seed(cmd.get_option("--seed"), a.seed);
  auto in = open_input(a.input);
  const TimeSeries ts = io::read_series(in, parse_block_rule(a.block_rule));
  if (ts.values.empty()) {
    throw ParseError("no observations", 2);
  }
  const bool fixed = cmd.get_option("--threshold")->count() > 0;
  const double u = fixed ? a.threshold : quantile_threshold(ts, a.quantile);
  const EventSet es = decluster(ts, u, a.run_length);

  Report report;
  report.results["threshold"] = io::format_double(u);
  report.results["events"] = std::to_string(es.events.size());
  report.results["blocks"] = std::to_string(es.n_blocks());
  report.results["first_block"] = std::to_string(es.blocks.front());
  report.results["last_block"] = std::to_string(es.blocks.back());
  report.results["missing_days"] = std::to_string(ts.missing_days());
  {
    auto out = open_output(a.output);
    io::write_event_set(out, es);
  }
  if (es.events.empty()) {
    std::cerr << fmt::format("no values exceed the threshold {}\n", u);
    report.empty = true;
  } else if (!a.diagnostics.empty()) {
    if (es.events.size() < 2) {
      report.warn("fewer than two events; inter-arrival diagnostic skipped");
    } else {
      PpOptions opts;
      opts.resamples = a.resamples;
      opts.seed = seed;
      const PpDiagnostic pp = interarrival_pp(es, opts);
      auto out = open_output(a.diagnostics);
      io::write_pp_diagnostic(out, pp);
      report.results["interarrival_rate"] = io::format_double(pp.rate);
      report.results["fraction_outside_band"] = io::format_double(pp.fraction_outside_band());
    }
  }
  write_manifest(a.manifest.empty() ? fs::path(a.output + ".manifest") : fs::path(a.manifest), cmd, seed, report);
  return report.exit_code();
}

// ---------------------------------------------------------------------- fit

struct FitArgs {
  std::string model = "stationary";
  std::vector<std::string> events;
  std::string covariates;
  std::string site_table;
  std::string output;
  std::string posterior;
  std::string manifest;
  std::string config;
  std::string scope = "per-block";
  std::string block_rule = "water-year";
  double threshold = 0.0;
  int first_block = 0;
  int last_block = 0;
  bool xi_effects = false;
  bool location_only = false;
  int iterations = 200000;
  int burn_in = 50000;
  int thin = 1;
  std::uint64_t seed = kDefaultSeed;
};

EventSet load_events(const std::string& path, double threshold, std::optional<std::pair<int, int>> span) {
  auto in = open_input(path);
  return io::read_event_set(in, threshold, span);
}

std::optional<std::pair<int, int>> explicit_span(const FitArgs& a, const CLI::App& cmd) {
  const bool first = cmd.get_option("--first-block")->count() > 0;
  const bool last = cmd.get_option("--last-block")->count() > 0;
  if (first != last) {
    throw InvalidArgument("--first-block and --last-block go together");
  }
  if (!first) {
    return std::nullopt;
  }
  return std::pair{a.first_block, a.last_block};
}

/// Covariate per block over [first, last], averaging date-keyed values within blocks.
std::vector<double> block_covariates(const io::CovariateTable& table, int first, int last, BlockRule rule) {
  std::map<int, std::pair<double, int>> acc;
  if (table.keyed_by_date()) {
    for (const auto& [date, s] : table.by_date) {
      auto& slot = acc[rule.block_of(date)];
      slot.first += s;
      ++slot.second;
    }
  } else {
    for (const auto& [block, s] : table.by_block) {
      acc[block] = {s, 1};
    }
  }
  std::vector<double> out;
  for (int b = first; b <= last; ++b) {
    const auto it = acc.find(b);
    if (it == acc.end()) {
      throw InvalidArgument(fmt::format("no covariate value for block {}", b));
    }
    out.push_back(it->second.first / it->second.second);
  }
  return out;
}

RegionalModel bayes_start(const std::vector<BlockedSeries>& sites, const EffectDims& dims, Priors& priors) {
  RegionalModel init;
  init.dims = dims;
  double scale = 0.0;
  for (const auto& site : sites) {
    ThresholdedData pooled;
    pooled.threshold = site.threshold;
    pooled.n_blocks = 0;
    for (std::size_t i = 0; i < site.n_blocks(); ++i) {
      if (site.is_recorded(i)) {
        ++pooled.n_blocks;
        pooled.exceedances.insert(pooled.exceedances.end(), site.magnitudes[i].begin(), site.magnitudes[i].end());
      }
    }
    if (pooled.exceedances.size() < 3) {
      throw TooFewEvents("each site needs at least three exceedances");
    }
    const StationaryFit fit =
        fit_stationary(pooled, moment_start(pooled.exceedances, pooled.threshold, pooled.n_blocks));
    const double xi = std::clamp(fit.params.xi, -0.45, 0.45);
    init.intercepts.push_back({fit.params.mu, std::log(fit.params.sigma), xi});
    scale += fit.params.sigma / static_cast<double>(sites.size());
  }
  const std::array<double, 3> slope_start{0.5 * scale, 0.1, 0.05};
  for (std::size_t j = 0; j < 3; ++j) {
    init.slopes[j] = dims[j] ? slope_start[j] : 0.0;
  }
  const auto k = static_cast<Eigen::Index>(included_dims(dims).size());
  init.correlation = Eigen::MatrixXd::Identity(k, k);
  priors.location_scale = scale;
  return init;
}

int run_fit(const FitArgs& a, const CLI::App& cmd) {
  const std::uint64_t seed = resolve_seed(cmd.get_option("--seed"), a.seed);
  Report report;
  cli::FitArtifact art;
  art.model = a.model;
  const fs::path out_path(a.output);
  const bool have_threshold = cmd.get_option("--threshold")->count() > 0;

  if (a.model == "stationary" || a.model == "covariate" || a.model == "random-effects") {
    if (a.events.size() != 1) {
      throw InvalidArgument("--events takes exactly one file for a single-site model");
    }
    if (!have_threshold) {
      throw InvalidArgument("--threshold is required for a single-site model");
    }
    const EventSet es = load_events(a.events.front(), a.threshold, explicit_span(a, cmd));
    if (es.events.empty()) {
      throw TooFewEvents("no events in " + a.events.front());
    }
    art.first_block = es.blocks.front();
    art.last_block = es.blocks.back();
    art.sites = {"site"};
    art.thresholds = {a.threshold};
    const int n_blocks = static_cast<int>(art.n_blocks());
    const auto z = es.magnitudes();
    FitOptions opts;
    opts.seed = seed;

    if (a.model == "stationary") {
      if (z.size() < 3) {
        throw TooFewEvents("a stationary fit needs at least three exceedances");
      }
      const ThresholdedData data{z, a.threshold, n_blocks};
      const StationaryFit fit = fit_stationary(data, moment_start(z, a.threshold, n_blocks), opts);
      art.stationary = fit.params;
      art.stationary_covariance = fit.covariance;
      report.results["nll"] = io::format_double(fit.nll);
      if (!fit.converged) {
        report.warn("simplex search did not converge");
      }
      if (fit.degenerate_hessian()) {
        report.warn("observed information is not positive definite; covariance omitted");
      }
    } else if (a.model == "covariate") {
      if (a.covariates.empty()) {
        throw InvalidArgument("--covariates is required for the covariate model");
      }
      auto in = open_input(a.covariates);
      const auto table = io::read_covariates(in);
      art.block_covariates = block_covariates(table, art.first_block, art.last_block, parse_block_rule(a.block_rule));
      const CovariateNhpp init = CovariateNhpp::stationary(moment_start(z, a.threshold, n_blocks));
      const CoefMask mask = a.location_only ? kLocationEffectOnly : kAllFree;
      CovariateFit fit;
      if (a.scope == "per-block") {
        art.scope = CovariateScope::PerBlock;
        PerBlockData data;
        data.threshold = a.threshold;
        data.covariates = art.block_covariates;
        data.magnitudes = es.magnitudes_by_block();
        fit = fit_covariate(data, init, mask, opts);
      } else if (a.scope == "per-observation") {
        art.scope = CovariateScope::PerObservation;
        PerObservationData data;
        data.threshold = a.threshold;
        data.n_blocks = n_blocks;
        for (const auto& e : es.events) {
          data.magnitudes.push_back(e.magnitude);
          data.covariates.push_back(art.block_covariates[static_cast<std::size_t>(e.block - art.first_block)]);
        }
        fit = fit_covariate(data, kde(art.block_covariates), init, mask, opts);
      } else {
        throw InvalidArgument("unknown covariate scope '" + a.scope + "'");
      }
      art.covariate = fit.model;
      art.covariate_covariance = fit.covariance;
      report.results["nll"] = io::format_double(fit.nll);
      if (!fit.converged) {
        report.warn("simplex search did not converge");
      }
      if (!fit.covariance) {
        report.warn("observed information is not positive definite; covariance omitted");
      }
    } else {
      art.dims = a.xi_effects ? kAllEffects : kLocationScaleEffects;
      std::vector<BlockedSeries> sites{io::to_blocked(es, art.first_block, art.last_block)};
      Priors priors;
      const RegionalModel init = bayes_start(sites, art.dims, priors);
      const PosteriorSamples post = fit_bayes(sites, init, priors, {a.iterations, a.burn_in, a.thin, seed});
      art.posterior = a.posterior.empty() ? fs::path(a.output + ".posterior.csv") : fs::path(a.posterior);
      auto out = open_output(art.posterior);
      io::write_posterior(out, post);
      for (std::size_t c = 0; c < post.components.size(); ++c) {
        report.results["acceptance." + post.components[c]] = io::format_double(post.acceptance[c]);
      }
      if (post.chain_stuck) {
        report.warn("a component accepted fewer than 1% of proposals after burn-in");
      }
    }
  } else if (a.model == "regional") {
    if (a.site_table.empty()) {
      throw InvalidArgument("--site-table is required for the regional model");
    }
    auto in = open_input(a.site_table);
    const auto table = io::read_site_table(in);
    if (table.size() != a.events.size()) {
      throw InvalidArgument(fmt::format("site table lists {} sites but {} event files were given", table.size(),
                                        a.events.size()));
    }
    art.first_block = std::numeric_limits<int>::max();
    art.last_block = std::numeric_limits<int>::min();
    for (const auto& s : table) {
      art.first_block = std::min(art.first_block, s.first_block);
      art.last_block = std::max(art.last_block, s.last_block);
      art.sites.push_back(s.site);
      art.thresholds.push_back(s.threshold);
    }
    std::vector<BlockedSeries> sites;
    for (std::size_t d = 0; d < table.size(); ++d) {
      const EventSet es = load_events(a.events[d], table[d].threshold,
                                      std::pair{table[d].first_block, table[d].last_block});
      sites.push_back(io::to_blocked(es, art.first_block, art.last_block,
                                     std::pair{table[d].first_block, table[d].last_block}));
    }
    art.dims = a.xi_effects ? kAllEffects : kLocationScaleEffects;
    Priors priors;
    const RegionalModel init = bayes_start(sites, art.dims, priors);
    const PosteriorSamples post = fit_bayes(sites, init, priors, {a.iterations, a.burn_in, a.thin, seed});
    art.posterior = a.posterior.empty() ? fs::path(a.output + ".posterior.csv") : fs::path(a.posterior);
    auto out = open_output(art.posterior);
    io::write_posterior(out, post);
    for (std::size_t c = 0; c < post.components.size(); ++c) {
      report.results["acceptance." + post.components[c]] = io::format_double(post.acceptance[c]);
    }
    if (post.chain_stuck) {
      report.warn("a component accepted fewer than 1% of proposals after burn-in");
    }
  } else {
    throw InvalidArgument("unknown model '" + a.model + "'");
  }

  if (art.bayesian() && art.posterior.is_relative()) {
    art.posterior = fs::relative(fs::absolute(art.posterior), fs::absolute(out_path).parent_path());
  }
  {
    auto out = open_output(out_path);
    fmt::print(out, "# stormrisk fit artifact\n");
    io::write_key_values(out, art.to_key_values());
  }
  write_manifest(a.manifest.empty() ? fs::path(a.output + ".manifest") : fs::path(a.manifest), cmd, seed, report);
  return report.exit_code();
}

cli::FitArtifact load_artifact(const std::string& path) {
  const fs::path p(path);
  return cli::FitArtifact::from_key_values(io::read_key_values_file(p), fs::absolute(p).parent_path());
}

// ------------------------------------------------------------ return-levels

struct ReturnLevelArgs {
  std::string fit;
  std::string T = "2,5,10,20,50,100,200,500,1000";
  std::string mode = "marginal";
  std::string compare_iid_gev;
  std::string output;
  std::string manifest;
  std::string config;
  std::size_t site = 0;
};

int run_return_levels(const ReturnLevelArgs& a, const CLI::App& cmd) {
  const auto art = load_artifact(a.fit);
  const auto periods = io::parse_double_list(a.T);
  if (periods.empty()) {
    throw InvalidArgument("--T needs at least one return period");
  }
  if (a.mode != "marginal" && a.mode != "block") {
    throw InvalidArgument("--mode must be 'marginal' or 'block'");
  }
  if (a.site >= art.sites.size()) {
    throw InvalidArgument("--site out of range");
  }
  Report report;
  std::optional<NhppParams> iid;
  if (!a.compare_iid_gev.empty()) {
    auto in = open_input(a.compare_iid_gev);
    const auto t = io::read_csv(in);
    const auto c = t.column("maximum");
    std::vector<double> maxima;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      maxima.push_back(io::parse_double(t.rows[i][c], t.lines[i]));
    }
    const StationaryFit fit = fit_gev_block_maxima(maxima);
    if (!fit.converged) {
      report.warn("iid GEV fit did not converge");
    }
    iid = fit.params;
    report.results["iid_gev"] = io::format_double_list({fit.params.mu, fit.params.sigma, fit.params.xi});
  }

  // Per-block parameters and the block-averaged level, by model class.
  std::vector<NhppParams> per_block;
  std::function<double(double)> marginal;
  std::optional<CovariateDensity> h;
  std::optional<RandomEffectsModel> re_model;
  if (art.model == "stationary") {
    per_block.assign(art.n_blocks(), art.stationary);
    marginal = [&](double T) { return return_level_stationary(T, art.stationary); };
  } else if (art.model == "covariate") {
    for (double s : art.block_covariates) {
      per_block.push_back(art.covariate.at(s));
    }
    h = kde(art.block_covariates);
    marginal = [&](double T) { return return_level_covariate(T, art.covariate, *h, art.scope); };
  } else {
    const PosteriorSamples post = art.load_posterior();
    re_model = post.mean_model().site(a.site);
    const Eigen::MatrixXd effects = post.effect_means();
    for (Eigen::Index i = 0; i < effects.rows(); ++i) {
      per_block.push_back(re_model->at(effects.row(i).transpose()));
    }
    marginal = [&](double T) { return marginal_return_level(T, *re_model); };
  }

  auto out = open_output(a.output);
  if (a.mode == "marginal") {
    fmt::print(out, "T,z_T{}\n", iid ? ",z_T_iid_gev" : "");
    for (double T : periods) {
      fmt::print(out, "{},{}", io::format_double(T), io::format_double(marginal(T)));
      if (iid) {
        fmt::print(out, ",{}", io::format_double(return_level_stationary(T, *iid)));
      }
      fmt::print(out, "\n");
    }
  } else {
    fmt::print(out, "T,block,z_T\n");
    for (double T : periods) {
      for (std::size_t i = 0; i < per_block.size(); ++i) {
        fmt::print(out, "{},{},{}\n", io::format_double(T), art.first_block + static_cast<int>(i),
                   io::format_double(return_level_stationary(T, per_block[i])));
      }
    }
  }
  write_manifest(a.manifest.empty() ? fs::path(a.output + ".manifest") : fs::path(a.manifest), cmd, 0, report);
  return report.exit_code();
}

// --------------------------------------------------------------------- risk

struct RiskArgs {
  std::string fit;
  std::string grid = "1.5:1000:50";
  std::string output;
  std::string manifest;
  std::string config;
  double t = 0.4;
  double T = 100.0;
  int bands = 500;
  std::size_t site = 0;
  unsigned threads = 1;
  std::uint64_t seed = kDefaultSeed;
};

int run_risk(const RiskArgs& a, const CLI::App& cmd) {
  const std::uint64_t seed = resolve_seed(cmd.get_option("--seed"), a.seed);
  const auto art = load_artifact(a.fit);
  if (a.site >= art.sites.size()) {
    throw InvalidArgument("--site out of range");
  }
  RiskQuery q;
  q.t = a.t;
  q.T = a.T;
  q.T_star = parse_T_star_grid(a.grid);
  q.band_draws = a.bands;
  q.seed = seed;
  q.threads = a.threads;
  q.validate();

  RiskCurve curve;
  if (art.model == "stationary") {
    curve = risk_curve(q, ParamMixture{{art.stationary}, {1.0}});
    for (auto& p : curve.points) {
      p.lo = p.hi = p.R;
    }
  } else if (art.model == "covariate") {
    curve = risk_measure_cov(q, art.covariate, kde(art.block_covariates), art.covariate_covariance);
  } else {
    curve = risk_measure_re(q, art.load_posterior(), a.site);
  }

  Report report;
  report.results["z_T"] = io::format_double(curve.z_T);
  report.results["band_draws_used"] = std::to_string(curve.band_draws_used);
  const auto undefined = std::count_if(curve.points.begin(), curve.points.end(),
                                       [](const RiskPoint& p) { return p.status == RiskStatus::Undefined; });
  if (undefined == static_cast<long>(curve.points.size())) {
    std::cerr << "risk ratio undefined at every T*: both probabilities are zero\n";
    report.empty = true;
  } else if (undefined > 0) {
    report.warn(fmt::format("risk ratio undefined at {} of {} grid points", undefined, curve.points.size()));
  }
  if (a.bands > 0 && art.model != "stationary" && curve.band_draws_used < a.bands / 2) {
    report.warn(fmt::format("only {} of {} band draws could be evaluated", curve.band_draws_used, a.bands));
  }
  auto out = open_output(a.output);
  io::write_risk_curve(out, curve);
  write_manifest(a.manifest.empty() ? fs::path(a.output + ".manifest") : fs::path(a.manifest), cmd, seed, report);
  return report.exit_code();
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string model = "covariate";
  std::string output_dir = "simulated";
  std::string config;
  std::string thresholds = "0";
  std::string site_mu0;
  std::string site_sigma0;
  std::string site_xi0;
  int n_blocks = 30;
  int replicates = 1;
  int first_block = 0;
  int n_sites = 3;
  double mu0 = 0.0;
  double mu1 = 2.5;
  double sigma0 = 1.5;
  double sigma1 = 0.0;
  double xi0 = -0.2;
  double xi1 = 0.0;
  double rho = 0.62;
  bool xi_effects = false;
  std::uint64_t seed = kDefaultSeed;
};

std::vector<double> per_site(const std::string& text, double fallback, std::size_t n, const char* what) {
  if (text.empty()) {
    return std::vector<double>(n, fallback);
  }
  auto v = io::parse_double_list(text);
  if (v.size() == 1) {
    v.assign(n, v.front());
  }
  if (v.size() != n) {
    throw InvalidArgument(fmt::format("{} needs one value per site", what));
  }
  return v;
}

int run_simulate(const SimulateArgs& a, const CLI::App& cmd) {
  const std::uint64_t seed = resolve_seed(cmd.get_option("--seed"), a.seed);
  if (!(a.sigma0 > 0.0)) {
    throw InvalidArgument("--sigma0 is a scale and must be positive");
  }
  SimDesign d;
  d.n_blocks = a.n_blocks;
  d.replicates = a.replicates;
  d.seed = seed;
  const EffectDims dims = a.xi_effects ? kAllEffects : kLocationScaleEffects;
  const auto k = static_cast<Eigen::Index>(included_dims(dims).size());
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(k, k);
  corr(0, 1) = corr(1, 0) = a.rho;
  const std::array<double, 3> slopes{a.mu1, a.sigma1, a.xi1};

  if (a.model == "stationary") {
    d.model_class = ModelClass::Stationary;
    d.stationary = {a.mu0, a.sigma0, a.xi0};
  } else if (a.model == "covariate") {
    d.model_class = ModelClass::Covariate;
    d.covariate.coef = {a.mu0, a.mu1, std::log(a.sigma0), a.sigma1, a.xi0, a.xi1};
  } else if (a.model == "random-effects") {
    d.model_class = ModelClass::RandomEffects;
    d.random_effects.coef = {a.mu0, a.mu1, std::log(a.sigma0), a.sigma1, a.xi0, dims[2] ? a.xi1 : 0.0};
    d.random_effects.dims = dims;
    d.random_effects.correlation = corr;
  } else if (a.model == "regional") {
    d.model_class = ModelClass::Regional;
    const auto n = static_cast<std::size_t>(a.n_sites);
    const auto mu0 = per_site(a.site_mu0, a.mu0, n, "--site-mu0");
    const auto sigma0 = per_site(a.site_sigma0, a.sigma0, n, "--site-sigma0");
    const auto xi0 = per_site(a.site_xi0, a.xi0, n, "--site-xi0");
    for (std::size_t s = 0; s < n; ++s) {
      if (!(sigma0[s] > 0.0)) {
        throw InvalidArgument("--site-sigma0 values must be positive");
      }
      d.regional.intercepts.push_back({mu0[s], std::log(sigma0[s]), xi0[s]});
    }
    d.regional.slopes = {slopes[0], slopes[1], dims[2] ? slopes[2] : 0.0};
    d.regional.dims = dims;
    d.regional.correlation = corr;
  } else {
    throw InvalidArgument("unknown model '" + a.model + "'");
  }
  d.thresholds = per_site(a.thresholds, 0.0, d.n_sites(), "--threshold");

  const fs::path dir(a.output_dir);
  fs::create_directories(dir);
  Report report;
  std::size_t total_events = 0;
  for (int r = 0; r < d.replicates; ++r) {
    const SimulatedDataset ds = simulate_replicate(d, r);
    const std::string tag = fmt::format("r{:03d}", r);
    for (std::size_t s = 0; s < ds.sites.size(); ++s) {
      const std::string site_tag = d.model_class == ModelClass::Regional ? fmt::format("_site{}", s) : "";
      EventSet es = ds.event_set(s);
      for (auto& e : es.events) {
        e.block += a.first_block;
      }
      total_events += es.events.size();
      auto ev = open_output(dir / fmt::format("events_{}{}.csv", tag, site_tag));
      io::write_event_set(ev, es);
      auto mx = open_output(dir / fmt::format("maxima_{}{}.csv", tag, site_tag));
      fmt::print(mx, "block,maximum\n");
      for (std::size_t i = 0; i < ds.sites[s].block_maxima.size(); ++i) {
        fmt::print(mx, "{},{}\n", a.first_block + static_cast<int>(i), io::format_double(ds.sites[s].block_maxima[i]));
      }
    }
    if (!ds.covariates.empty()) {
      auto out = open_output(dir / fmt::format("covariates_{}.csv", tag));
      fmt::print(out, "block,s\n");
      for (std::size_t i = 0; i < ds.covariates.size(); ++i) {
        fmt::print(out, "{},{}\n", a.first_block + static_cast<int>(i), io::format_double(ds.covariates[i]));
      }
    }
    if (ds.effects.size() > 0) {
      auto out = open_output(dir / fmt::format("effects_{}.csv", tag));
      fmt::print(out, "block");
      for (int j : included_dims(dims)) {
        fmt::print(out, ",r_{}", kDimName[static_cast<std::size_t>(j)]);
      }
      fmt::print(out, "\n");
      for (Eigen::Index i = 0; i < ds.effects.rows(); ++i) {
        fmt::print(out, "{}", a.first_block + static_cast<int>(i));
        for (Eigen::Index c = 0; c < ds.effects.cols(); ++c) {
          fmt::print(out, ",{}", io::format_double(ds.effects(i, c)));
        }
        fmt::print(out, "\n");
      }
    }
  }
  if (d.model_class == ModelClass::Regional) {
    auto out = open_output(dir / "site_table.csv");
    fmt::print(out, "site,threshold,first_year,last_year\n");
    for (std::size_t s = 0; s < d.n_sites(); ++s) {
      fmt::print(out, "site{},{},{},{}\n", s, io::format_double(d.thresholds[s]), a.first_block,
                 a.first_block + a.n_blocks - 1);
    }
  }
  report.results["events"] = std::to_string(total_events);
  write_manifest(dir / "manifest.txt", cmd, seed, report);
  return report.exit_code();
}

// --------------------------------------------------------------------- main

/// Inserts `--key=value` for every config-file entry ahead of the user's
/// flags; with take-last semantics the flags win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    }
  }
  if (config.empty() || args.empty()) {
    return args;
  }
  std::vector<std::string> out{args.front()};
  for (const auto& [key, value] : io::read_key_values_file(config)) {
    out.push_back("--" + key + "=" + value);
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extreme-value modelling with covariates, random effects and short-term risk"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  DeclusterArgs dc;
  auto* cmd_dc = app.add_subcommand("decluster", "extract independent events with the runs method");
  cmd_dc->add_option("--input", dc.input, "raw series CSV (date,value)")->required();
  auto* q_opt = cmd_dc->add_option("--threshold-quantile", dc.quantile, "threshold as a quantile of the values")
                    ->capture_default_str();
  auto* u_opt = cmd_dc->add_option("--threshold", dc.threshold, "threshold in data units");
  q_opt->excludes(u_opt);
  cmd_dc->add_option("--run-length", dc.run_length, "w: below-threshold run that ends a cluster")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd_dc->add_option("--block-rule", dc.block_rule)->capture_default_str()->check(
      CLI::IsMember({"water-year", "calendar"}));
  cmd_dc->add_option("--output", dc.output, "EventSet CSV")->required();
  cmd_dc->add_option("--diagnostics", dc.diagnostics, "inter-arrival P-P table CSV");
  cmd_dc->add_option("--resamples", dc.resamples)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_dc->add_option("--seed", dc.seed);
  cmd_dc->add_option("--manifest", dc.manifest);
  cmd_dc->add_option("--config", dc.config, "key = value settings file");

  FitArgs ft;
  auto* cmd_fit = app.add_subcommand("fit", "fit a stationary, covariate, random-effects or regional model");
  cmd_fit->add_option("--model", ft.model)->capture_default_str()->check(
      CLI::IsMember({"stationary", "covariate", "random-effects", "regional"}));
  cmd_fit->add_option("--events", ft.events, "EventSet CSV (one per site for regional)")
      ->required()
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  cmd_fit->add_option("--threshold", ft.threshold);
  cmd_fit->add_option("--first-block", ft.first_block);
  cmd_fit->add_option("--last-block", ft.last_block);
  cmd_fit->add_option("--covariates", ft.covariates, "covariate CSV (block,s) or (date,s)");
  cmd_fit->add_option("--covariate-scope", ft.scope)->capture_default_str()->check(
      CLI::IsMember({"per-block", "per-observation"}));
  cmd_fit->add_option("--block-rule", ft.block_rule)->capture_default_str()->check(
      CLI::IsMember({"water-year", "calendar"}));
  cmd_fit->add_option("--location-only", ft.location_only, "covariate acts on the location only")
      ->capture_default_str();
  cmd_fit->add_option("--site-table", ft.site_table, "site,threshold,first_year,last_year");
  cmd_fit->add_option("--xi-effects", ft.xi_effects, "random effect in the shape as well")->capture_default_str();
  cmd_fit->add_option("--iterations", ft.iterations)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_fit->add_option("--burn-in", ft.burn_in)->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd_fit->add_option("--thin", ft.thin)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_fit->add_option("--seed", ft.seed);
  cmd_fit->add_option("--output", ft.output, "fit artifact")->required();
  cmd_fit->add_option("--posterior", ft.posterior, "posterior draws CSV");
  cmd_fit->add_option("--manifest", ft.manifest);
  cmd_fit->add_option("--config", ft.config);

  ReturnLevelArgs rl;
  auto* cmd_rl = app.add_subcommand("return-levels", "return levels from a fit artifact");
  cmd_rl->add_option("--fit", rl.fit)->required();
  cmd_rl->add_option("--T", rl.T, "comma-separated return periods")->capture_default_str();
  cmd_rl->add_option("--mode", rl.mode)->capture_default_str()->check(CLI::IsMember({"marginal", "block"}));
  cmd_rl->add_option("--site", rl.site)->capture_default_str();
  cmd_rl->add_option("--compare-iid-gev", rl.compare_iid_gev, "block maxima CSV (block,maximum) for an iid GEV column");
  cmd_rl->add_option("--output", rl.output)->required();
  cmd_rl->add_option("--manifest", rl.manifest);
  cmd_rl->add_option("--config", rl.config);

  RiskArgs rk;
  auto* cmd_rk = app.add_subcommand("risk", "short-term risk curve over a grid of T*");
  cmd_rk->add_option("--fit", rk.fit)->required();
  cmd_rk->add_option("--t", rk.t, "time of the conditioning event within the season")->capture_default_str();
  cmd_rk->add_option("--T", rk.T, "return period of the conditioning event")->capture_default_str();
  cmd_rk->add_option("--Tstar-grid", rk.grid, "'lo:hi:points' or comma list")->capture_default_str();
  cmd_rk->add_option("--bands", rk.bands, "parameter draws for the bands, 0 for none")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd_rk->add_option("--site", rk.site)->capture_default_str();
  cmd_rk->add_option("--threads", rk.threads)->capture_default_str();
  cmd_rk->add_option("--seed", rk.seed);
  cmd_rk->add_option("--output", rk.output)->required();
  cmd_rk->add_option("--manifest", rk.manifest);
  cmd_rk->add_option("--config", rk.config);

  SimulateArgs sm;
  auto* cmd_sm = app.add_subcommand("simulate", "synthetic seasons from a model design");
  cmd_sm->add_option("--model", sm.model)->capture_default_str()->check(
      CLI::IsMember({"stationary", "covariate", "random-effects", "regional"}));
  cmd_sm->add_option("--n-blocks", sm.n_blocks)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_sm->add_option("--replicates", sm.replicates)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_sm->add_option("--first-block", sm.first_block)->capture_default_str();
  cmd_sm->add_option("--mu0", sm.mu0)->capture_default_str();
  cmd_sm->add_option("--mu1", sm.mu1)->capture_default_str();
  cmd_sm->add_option("--sigma0", sm.sigma0, "scale at zero covariate / effect, data units")->capture_default_str();
  cmd_sm->add_option("--sigma1", sm.sigma1, "log-scale slope")->capture_default_str();
  cmd_sm->add_option("--xi0", sm.xi0)->capture_default_str();
  cmd_sm->add_option("--xi1", sm.xi1)->capture_default_str();
  cmd_sm->add_option("--rho", sm.rho, "correlation of the location and scale effects")->capture_default_str();
  cmd_sm->add_option("--xi-effects", sm.xi_effects)->capture_default_str();
  cmd_sm->add_option("--threshold", sm.thresholds, "threshold, or one per site")->capture_default_str();
  cmd_sm->add_option("--n-sites", sm.n_sites)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_sm->add_option("--site-mu0", sm.site_mu0);
  cmd_sm->add_option("--site-sigma0", sm.site_sigma0);
  cmd_sm->add_option("--site-xi0", sm.site_xi0);
  cmd_sm->add_option("--seed", sm.seed);
  cmd_sm->add_option("--output-dir", sm.output_dir)->capture_default_str();
  cmd_sm->add_option("--config", sm.config);

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (cmd_dc->parsed()) {
      return run_decluster(dc, *cmd_dc);
    }
    if (cmd_fit->parsed()) {
      return run_fit(ft, *cmd_fit);
    }
    if (cmd_rl->parsed()) {
      return run_return_levels(rl, *cmd_rl);
    }
    if (cmd_rk->parsed()) {
      return run_risk(rk, *cmd_rk);
    }
    if (cmd_sm->parsed()) {
      return run_simulate(sm, *cmd_sm);
    }
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const InvalidArgument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const PriorMismatch& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const TooFewEvents& e) {
    std::cerr << "empty result: " << e.what() << '\n';
    return kEmptyResult;
  } catch (const DegenerateSample& e) {
    std::cerr << "degenerate input: " << e.what() << '\n';
    return kEmptyResult;
  } catch (const UnsupportedConditioningValue& e) {
    std::cerr << "degenerate result: " << e.what() << '\n';
    return kEmptyResult;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalWarning;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kInputError;
}
