#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace stormrisk {

using Date = std::chrono::sys_days;

/// Maps a date to an integer block label. A block starts on the first day of
/// `start_month` and is labelled by the calendar year in which it starts, so
/// the default water year running 1 Oct 1957 - 30 Sep 1958 is block 1957.
struct BlockRule {
  unsigned start_month = 10;

  [[nodiscard]] static BlockRule water_year() { return {10}; }
  [[nodiscard]] static BlockRule calendar_year() { return {1}; }
  [[nodiscard]] int block_of(Date d) const;
};

/// Daily observations of one gauge. Dates strictly increasing; gaps allowed.
struct TimeSeries {
  std::vector<Date> times;
  std::vector<double> values;
  BlockRule rule;

  /// Throws InvalidArgument on length mismatch, non-increasing dates or non-finite values.
  void validate() const;
  /// Number of calendar days missing between consecutive records.
  [[nodiscard]] std::size_t missing_days() const;
};

struct Event {
  int block = 0;
  /// Position of the cluster maximum within its block, in (0, 1).
  double time_in_block = 0.0;
  double magnitude = 0.0;
  /// Index of the cluster maximum in the source series, when there is one.
  std::size_t source_index = std::numeric_limits<std::size_t>::max();
};

struct EventSet {
  std::vector<Event> events;
  double threshold = 0.0;
  int run_length = 1;
  /// Every block covered by the record, including blocks without events. Sorted.
  std::vector<int> blocks;

  [[nodiscard]] std::size_t n_blocks() const { return blocks.size(); }
  /// Magnitudes grouped by position in `blocks`.
  [[nodiscard]] std::vector<std::vector<double>> magnitudes_by_block() const;
  [[nodiscard]] std::vector<double> magnitudes() const;
};

/// Runs declustering: exceedances (value > threshold) separated by fewer than
/// `run_length` below-threshold observations belong to one cluster, and each
/// cluster contributes its maximum (earliest on ties). Missing days count as
/// below-threshold observations. Event times are (rank + 1) / (n + 1) with the
/// rank of the maximum among the n records of its block.
[[nodiscard]] EventSet decluster(const TimeSeries& ts, double threshold, int run_length);

/// Empirical quantile of the series values, linear interpolation between order
/// statistics at h = (n - 1) q.
[[nodiscard]] double quantile_threshold(const TimeSeries& ts, double q);

struct PpPoint {
  double interarrival = 0.0;
  /// Plotting position i / (m + 1).
  double empirical = 0.0;
  /// Fitted exponential cdf at the i-th smallest inter-arrival.
  double model = 0.0;
  /// Pointwise tolerance band for `model` at this rank.
  double lower = 0.0;
  double upper = 0.0;

  [[nodiscard]] bool inside_band() const { return model >= lower && model <= upper; }
};

struct PpOptions {
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

struct PpDiagnostic {
  std::vector<PpPoint> points;
  /// Maximum likelihood exponential rate, events per block.
  double rate = 0.0;

  [[nodiscard]] double fraction_outside_band() const;
};

/// P-P diagnostic of inter-arrival times on the concatenated timeline
/// (block ordinal + time_in_block) against a fitted exponential. Bands are
/// pointwise, from a parametric bootstrap that refits the rate on each resample.
/// Throws TooFewEvents for fewer than two events.
[[nodiscard]] PpDiagnostic interarrival_pp(const EventSet& es, const PpOptions& options = {});

}  // namespace stormrisk
