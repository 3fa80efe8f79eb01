#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stormrisk/declustering.hpp"
#include "stormrisk/random_effects.hpp"
#include "stormrisk/risk.hpp"

namespace stormrisk::io {

/// Comma-separated table with a mandatory header row. Blank lines are
/// skipped; line numbers refer to the source text (header is line 1).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;

  /// Column index by name; throws ParseError naming the missing column.
  [[nodiscard]] std::size_t column(const std::string& name) const;
  [[nodiscard]] bool has_column(const std::string& name) const;
};

[[nodiscard]] CsvTable read_csv(std::istream& in);
[[nodiscard]] CsvTable read_csv_file(const std::filesystem::path& path);

[[nodiscard]] double parse_double(const std::string& text, int line);
[[nodiscard]] int parse_int(const std::string& text, int line);
/// ISO-8601 calendar date, YYYY-MM-DD.
[[nodiscard]] Date parse_date(const std::string& text, int line);
[[nodiscard]] std::string format_date(Date d);
/// Shortest text that reads back to the same double.
[[nodiscard]] std::string format_double(double x);

/// Raw series, columns date,value.
[[nodiscard]] TimeSeries read_series(std::istream& in, BlockRule rule = {});
void write_series(std::ostream& out, const TimeSeries& ts);

/// EventSet, columns block,time_in_block,magnitude. The covered blocks are
/// taken as every label from the smallest to the largest present unless
/// given explicitly.
[[nodiscard]] EventSet read_event_set(std::istream& in, double threshold,
                                      std::optional<std::pair<int, int>> block_span = {});
void write_event_set(std::ostream& out, const EventSet& es);

void write_pp_diagnostic(std::ostream& out, const PpDiagnostic& pp);

/// Covariates keyed by block (block,s) or by date (date,s).
struct CovariateTable {
  std::map<int, double> by_block;
  std::map<Date, double> by_date;

  [[nodiscard]] bool keyed_by_date() const { return !by_date.empty(); }
};
[[nodiscard]] CovariateTable read_covariates(std::istream& in);

/// One row of the multi-site table: site,threshold,first_year,last_year.
struct SiteInfo {
  std::string site;
  double threshold = 0.0;
  int first_block = 0;
  int last_block = 0;
};
[[nodiscard]] std::vector<SiteInfo> read_site_table(std::istream& in);

/// Groups events into blocks [first, last]; blocks outside the site's
/// recording span are marked as not recorded.
[[nodiscard]] BlockedSeries to_blocked(const EventSet& es, int first, int last,
                                       std::optional<std::pair<int, int>> recorded_span = {});

void write_risk_curve(std::ostream& out, const RiskCurve& curve);

/// One draw per row: log_posterior, intercepts, slopes, correlations, effects.
void write_posterior(std::ostream& out, const PosteriorSamples& posterior);
[[nodiscard]] PosteriorSamples read_posterior(std::istream& in, const RegionalModel& skeleton, std::size_t n_blocks);

/// `key = value` per line, `#` starts a comment. Later keys override earlier ones.
using KeyValues = std::map<std::string, std::string>;
[[nodiscard]] KeyValues read_key_values(std::istream& in);
[[nodiscard]] KeyValues read_key_values_file(const std::filesystem::path& path);
void write_key_values(std::ostream& out, const KeyValues& kv);

/// Comma-separated list of doubles.
[[nodiscard]] std::vector<double> parse_double_list(const std::string& text);
[[nodiscard]] std::string format_double_list(const std::vector<double>& values);

}  // namespace stormrisk::io
