#include "stormrisk/declustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "stormrisk/error.hpp"
#include "stormrisk/numerics.hpp"
#include "stormrisk/rng.hpp"

namespace stormrisk {

int BlockRule::block_of(Date d) const {
  const std::chrono::year_month_day ymd{d};
  const int year = static_cast<int>(ymd.year());
  return static_cast<unsigned>(ymd.month()) >= start_month ? year : year - 1;
}

void TimeSeries::validate() const {
  if (times.size() != values.size()) {
    throw InvalidArgument("TimeSeries: times and values differ in length");
  }
  if (rule.start_month < 1 || rule.start_month > 12) {
    throw InvalidArgument("TimeSeries: block start month must be 1-12");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw InvalidArgument("TimeSeries: non-finite value at record " + std::to_string(i));
    }
    if (i > 0 && !(times[i - 1] < times[i])) {
      throw InvalidArgument("TimeSeries: dates not strictly increasing at record " + std::to_string(i));
    }
  }
}

std::size_t TimeSeries::missing_days() const {
  std::size_t missing = 0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    missing += static_cast<std::size_t>((times[i] - times[i - 1]).count() - 1);
  }
  return missing;
}

std::vector<std::vector<double>> EventSet::magnitudes_by_block() const {
  std::map<int, std::size_t> ordinal;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    ordinal[blocks[i]] = i;
  }
  std::vector<std::vector<double>> out(blocks.size());
  for (const auto& e : events) {
    auto it = ordinal.find(e.block);
    if (it == ordinal.end()) {
      throw InvalidArgument("EventSet: event in block " + std::to_string(e.block) +
                            " outside the covered blocks");
    }
    out[it->second].push_back(e.magnitude);
  }
  return out;
}

std::vector<double> EventSet::magnitudes() const {
  std::vector<double> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    out.push_back(e.magnitude);
  }
  return out;
}

EventSet decluster(const TimeSeries& ts, double threshold, int run_length) {
  ts.validate();
  if (run_length < 1) {
    throw InvalidArgument("decluster: run length must be at least 1");
  }
  EventSet out;
  out.threshold = threshold;
  out.run_length = run_length;

  // Per-record block label, rank within block and block sizes.
  const std::size_t n = ts.values.size();
  std::vector<int> block(n);
  std::vector<std::size_t> rank(n);
  std::map<int, std::size_t> block_size;
  for (std::size_t i = 0; i < n; ++i) {
    block[i] = ts.rule.block_of(ts.times[i]);
    rank[i] = block_size[block[i]]++;
  }
  for (const auto& [label, count] : block_size) {
    out.blocks.push_back(label);
  }

  auto emit = [&](std::size_t peak) {
    const auto size = static_cast<double>(block_size[block[peak]]);
    out.events.push_back({block[peak], (static_cast<double>(rank[peak]) + 1.0) / (size + 1.0),
                          ts.values[peak], peak});
  };

  bool open = false;
  std::size_t peak = 0;
  std::size_t below = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      below += static_cast<std::size_t>((ts.times[i] - ts.times[i - 1]).count() - 1);
    }
    if (ts.values[i] > threshold) {
      if (open && below < static_cast<std::size_t>(run_length)) {
        if (ts.values[i] > ts.values[peak]) {
          peak = i;
        }
      } else {
        if (open) {
          emit(peak);
        }
        open = true;
        peak = i;
      }
      below = 0;
    } else {
      ++below;
    }
  }
  if (open) {
    emit(peak);
  }
  return out;
}

double quantile_threshold(const TimeSeries& ts, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidArgument("quantile_threshold: q must lie in (0, 1)");
  }
  std::vector<double> sorted = ts.values;
  std::sort(sorted.begin(), sorted.end());
  return numerics::quantile_sorted(sorted, q);
}

double PpDiagnostic::fraction_outside_band() const {
  if (points.empty()) {
    return 0.0;
  }
  const auto outside = std::count_if(points.begin(), points.end(), [](const PpPoint& p) { return !p.inside_band(); });
  return static_cast<double>(outside) / static_cast<double>(points.size());
}

PpDiagnostic interarrival_pp(const EventSet& es, const PpOptions& options) {
  if (es.events.size() < 2) {
    throw TooFewEvents("interarrival_pp: need at least two events");
  }
  if (options.resamples < 1 || !(options.level > 0.0 && options.level < 1.0)) {
    throw InvalidArgument("interarrival_pp: need resamples >= 1 and level in (0, 1)");
  }
  std::map<int, double> ordinal;
  if (es.blocks.empty()) {
    const int first = std::min_element(es.events.begin(), es.events.end(),
                                       [](const Event& a, const Event& b) { return a.block < b.block; })
                          ->block;
    for (const auto& e : es.events) {
      ordinal[e.block] = static_cast<double>(e.block - first);
    }
  } else {
    for (std::size_t i = 0; i < es.blocks.size(); ++i) {
      ordinal[es.blocks[i]] = static_cast<double>(i);
    }
  }
  std::vector<double> when;
  when.reserve(es.events.size());
  for (const auto& e : es.events) {
    auto it = ordinal.find(e.block);
    if (it == ordinal.end()) {
      throw InvalidArgument("interarrival_pp: event outside the covered blocks");
    }
    when.push_back(it->second + e.time_in_block);
  }
  std::sort(when.begin(), when.end());
  std::vector<double> gaps(when.size() - 1);
  for (std::size_t i = 1; i < when.size(); ++i) {
    gaps[i - 1] = when[i] - when[i - 1];
  }
  std::sort(gaps.begin(), gaps.end());
  const std::size_t m = gaps.size();
  double mean = 0.0;
  for (double g : gaps) {
    mean += g / static_cast<double>(m);
  }

  PpDiagnostic out;
  out.rate = mean > 0.0 ? 1.0 / mean : std::numeric_limits<double>::infinity();
  out.points.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto& p = out.points[i];
    p.interarrival = gaps[i];
    p.empirical = static_cast<double>(i + 1) / static_cast<double>(m + 1);
    p.model = mean > 0.0 ? -std::expm1(-gaps[i] / mean) : 1.0;
  }

  // The refitted exponential cdf at sorted resampled values is scale free, so
  // resamples are drawn from a unit-rate exponential.
  std::vector<std::vector<double>> by_rank(m, std::vector<double>(static_cast<std::size_t>(options.resamples)));
  const CounterRng base(options.seed);
  std::vector<double> sample(m);
  for (int b = 0; b < options.resamples; ++b) {
    CounterRng rng = base.substream(static_cast<std::uint64_t>(b));
    double total = 0.0;
    for (auto& x : sample) {
      x = -std::log(rng.uniform());
      total += x;
    }
    std::sort(sample.begin(), sample.end());
    const double mb = total / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      by_rank[i][static_cast<std::size_t>(b)] = -std::expm1(-sample[i] / mb);
    }
  }
  const double alpha = (1.0 - options.level) / 2.0;
  for (std::size_t i = 0; i < m; ++i) {
    auto& col = by_rank[i];
    std::sort(col.begin(), col.end());
    out.points[i].lower = numerics::quantile_sorted(col, alpha);
    out.points[i].upper = numerics::quantile_sorted(col, 1.0 - alpha);
  }
  return out;
}

}  // namespace stormrisk
