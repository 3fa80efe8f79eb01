#include "stormrisk/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "stormrisk/error.hpp"

namespace stormrisk::io {
namespace {

constexpr std::array<const char*, 3> kDimName{"mu", "sigma", "xi"};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) {
    out.push_back(trim(field));
  }
  if (!line.empty() && line.back() == sep) {
    out.emplace_back();
  }
  return out;
}

std::string site_tag(std::size_t d, std::size_t n_sites) {
  return n_sites == 1 ? std::string() : fmt::format("[{}]", d);
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw ParseError("missing column '" + name + "'", 1);
  }
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) {
      continue;
    }
    auto fields = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ParseError(fmt::format("expected {} fields, found {}", t.header.size(), fields.size()), number);
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(number);
  }
  if (t.header.empty()) {
    throw ParseError("missing header row", 1);
  }
  return t;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidArgument("cannot open " + path.string());
  }
  return read_csv(in);
}

double parse_double(const std::string& text, int line) {
  const std::string s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("not a number: '" + s + "'", line);
  }
  return value;
}

int parse_int(const std::string& text, int line) {
  const std::string s = trim(text);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("not an integer: '" + s + "'", line);
  }
  return value;
}

Date parse_date(const std::string& text, int line) {
  const std::string s = trim(text);
  const auto parts = split(s, '-');
  if (parts.size() != 3 || parts[0].size() != 4 || parts[1].size() != 2 || parts[2].size() != 2) {
    throw ParseError("not an ISO-8601 date: '" + s + "'", line);
  }
  const std::chrono::year_month_day ymd{std::chrono::year{parse_int(parts[0], line)},
                                        std::chrono::month{static_cast<unsigned>(parse_int(parts[1], line))},
                                        std::chrono::day{static_cast<unsigned>(parse_int(parts[2], line))}};
  if (!ymd.ok()) {
    throw ParseError("invalid calendar date: '" + s + "'", line);
  }
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

std::string format_double(double x) { return fmt::format("{}", x); }

TimeSeries read_series(std::istream& in, BlockRule rule) {
  const CsvTable t = read_csv(in);
  const auto c_date = t.column("date");
  const auto c_value = t.column("value");
  TimeSeries ts;
  ts.rule = rule;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const int line = t.lines[i];
    const Date d = parse_date(t.rows[i][c_date], line);
    const double v = parse_double(t.rows[i][c_value], line);
    if (!ts.times.empty() && !(ts.times.back() < d)) {
      throw ParseError("dates must be strictly increasing", line);
    }
    ts.times.push_back(d);
    ts.values.push_back(v);
  }
  ts.validate();
  return ts;
}

void write_series(std::ostream& out, const TimeSeries& ts) {
  fmt::print(out, "date,value\n");
  for (std::size_t i = 0; i < ts.values.size(); ++i) {
    fmt::print(out, "{},{}\n", format_date(ts.times[i]), format_double(ts.values[i]));
  }
}

EventSet read_event_set(std::istream& in, double threshold, std::optional<std::pair<int, int>> block_span) {
  const CsvTable t = read_csv(in);
  const auto c_block = t.column("block");
  const auto c_time = t.column("time_in_block");
  const auto c_mag = t.column("magnitude");
  EventSet es;
  es.threshold = threshold;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const int line = t.lines[i];
    Event e;
    e.block = parse_int(t.rows[i][c_block], line);
    e.time_in_block = parse_double(t.rows[i][c_time], line);
    e.magnitude = parse_double(t.rows[i][c_mag], line);
    if (!(e.time_in_block >= 0.0 && e.time_in_block <= 1.0)) {
      throw ParseError("time_in_block must lie in [0, 1]", line);
    }
    if (!(e.magnitude > threshold)) {
      throw ParseError(fmt::format("magnitude {} is not above the threshold {}", e.magnitude, threshold), line);
    }
    es.events.push_back(e);
  }
  int first = 0;
  int last = -1;
  if (block_span) {
    std::tie(first, last) = *block_span;
  } else if (!es.events.empty()) {
    const auto [lo, hi] = std::minmax_element(es.events.begin(), es.events.end(),
                                              [](const Event& a, const Event& b) { return a.block < b.block; });
    first = lo->block;
    last = hi->block;
  }
  for (const auto& e : es.events) {
    if (e.block < first || e.block > last) {
      throw InvalidArgument(fmt::format("event in block {} outside the span {}..{}", e.block, first, last));
    }
  }
  for (int b = first; b <= last; ++b) {
    es.blocks.push_back(b);
  }
  return es;
}

void write_event_set(std::ostream& out, const EventSet& es) {
  fmt::print(out, "block,time_in_block,magnitude\n");
  for (const auto& e : es.events) {
    fmt::print(out, "{},{},{}\n", e.block, format_double(e.time_in_block), format_double(e.magnitude));
  }
}

void write_pp_diagnostic(std::ostream& out, const PpDiagnostic& pp) {
  fmt::print(out, "interarrival,empirical,model,lower,upper,inside\n");
  for (const auto& p : pp.points) {
    fmt::print(out, "{},{},{},{},{},{}\n", format_double(p.interarrival), format_double(p.empirical),
               format_double(p.model), format_double(p.lower), format_double(p.upper), p.inside_band() ? 1 : 0);
  }
}

CovariateTable read_covariates(std::istream& in) {
  const CsvTable t = read_csv(in);
  const auto c_s = t.column("s");
  CovariateTable out;
  const bool by_date = t.has_column("date");
  if (!by_date && !t.has_column("block")) {
    throw ParseError("covariate table needs a 'block' or 'date' column", 1);
  }
  const auto c_key = by_date ? t.column("date") : t.column("block");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const int line = t.lines[i];
    const double s = parse_double(t.rows[i][c_s], line);
    const bool fresh = by_date ? out.by_date.emplace(parse_date(t.rows[i][c_key], line), s).second
                               : out.by_block.emplace(parse_int(t.rows[i][c_key], line), s).second;
    if (!fresh) {
      throw ParseError("duplicate covariate key", line);
    }
  }
  return out;
}

std::vector<SiteInfo> read_site_table(std::istream& in) {
  const CsvTable t = read_csv(in);
  const auto c_site = t.column("site");
  const auto c_u = t.column("threshold");
  const auto c_first = t.column("first_year");
  const auto c_last = t.column("last_year");
  std::vector<SiteInfo> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const int line = t.lines[i];
    SiteInfo s{t.rows[i][c_site], parse_double(t.rows[i][c_u], line), parse_int(t.rows[i][c_first], line),
               parse_int(t.rows[i][c_last], line)};
    if (s.last_block < s.first_block) {
      throw ParseError("last_year before first_year", line);
    }
    out.push_back(std::move(s));
  }
  return out;
}

BlockedSeries to_blocked(const EventSet& es, int first, int last, std::optional<std::pair<int, int>> recorded_span) {
  if (last < first) {
    throw InvalidArgument("to_blocked: empty block span");
  }
  BlockedSeries out;
  out.threshold = es.threshold;
  const auto n = static_cast<std::size_t>(last - first + 1);
  out.magnitudes.resize(n);
  if (recorded_span) {
    out.recorded.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int b = first + static_cast<int>(i);
      out.recorded[i] = b >= recorded_span->first && b <= recorded_span->second;
    }
  }
  for (const auto& e : es.events) {
    if (e.block < first || e.block > last) {
      throw InvalidArgument(fmt::format("to_blocked: event in block {} outside {}..{}", e.block, first, last));
    }
    out.magnitudes[static_cast<std::size_t>(e.block - first)].push_back(e.magnitude);
  }
  out.validate();
  return out;
}

void write_risk_curve(std::ostream& out, const RiskCurve& curve) {
  fmt::print(out, "T_star,R,lo95,hi95,numerator,denominator\n");
  for (const auto& p : curve.points) {
    fmt::print(out, "{},{},{},{},{},{}\n", format_double(p.T_star), format_double(p.R), format_double(p.lo),
               format_double(p.hi), format_double(p.numerator), format_double(p.denominator));
  }
}

void write_posterior(std::ostream& out, const PosteriorSamples& posterior) {
  if (posterior.size() == 0) {
    fmt::print(out, "log_posterior\n");
    return;
  }
  const RegionalModel& first = posterior.models.front();
  const auto dims = included_dims(first.dims);
  const std::size_t n_sites = first.n_sites();
  const auto n_blocks = posterior.effects.front().rows();
  std::vector<std::string> head{"log_posterior"};
  for (std::size_t d = 0; d < n_sites; ++d) {
    for (const char* name : {"mu0", "sigma0", "xi0"}) {
      head.push_back(name + site_tag(d, n_sites));
    }
  }
  for (int j : dims) {
    head.push_back(std::string(kDimName[static_cast<std::size_t>(j)]) + "1");
  }
  for (std::size_t a = 0; a < dims.size(); ++a) {
    for (std::size_t b = a + 1; b < dims.size(); ++b) {
      head.push_back(fmt::format("rho_{}_{}", kDimName[static_cast<std::size_t>(dims[a])],
                                 kDimName[static_cast<std::size_t>(dims[b])]));
    }
  }
  for (int j : dims) {
    for (Eigen::Index i = 0; i < n_blocks; ++i) {
      head.push_back(fmt::format("r_{}[{}]", kDimName[static_cast<std::size_t>(j)], i));
    }
  }
  fmt::print(out, "{}\n", fmt::join(head, ","));
  for (std::size_t k = 0; k < posterior.size(); ++k) {
    const RegionalModel& m = posterior.models[k];
    std::vector<std::string> row{format_double(posterior.log_posterior[k])};
    for (const auto& icpt : m.intercepts) {
      for (double v : icpt) {
        row.push_back(format_double(v));
      }
    }
    for (int j : dims) {
      row.push_back(format_double(m.slopes[static_cast<std::size_t>(j)]));
    }
    for (Eigen::Index a = 0; a < m.correlation.rows(); ++a) {
      for (Eigen::Index b = a + 1; b < m.correlation.cols(); ++b) {
        row.push_back(format_double(m.correlation(a, b)));
      }
    }
    const auto& e = posterior.effects[k];
    for (Eigen::Index c = 0; c < e.cols(); ++c) {
      for (Eigen::Index i = 0; i < e.rows(); ++i) {
        row.push_back(format_double(e(i, c)));
      }
    }
    fmt::print(out, "{}\n", fmt::join(row, ","));
  }
}

PosteriorSamples read_posterior(std::istream& in, const RegionalModel& skeleton, std::size_t n_blocks) {
  const CsvTable t = read_csv(in);
  const auto dims = included_dims(skeleton.dims);
  const auto k = static_cast<Eigen::Index>(dims.size());
  const std::size_t n_sites = skeleton.n_sites();
  const std::size_t expected = 1 + 3 * n_sites + dims.size() + dims.size() * (dims.size() - (dims.empty() ? 0 : 1)) / 2 +
                               dims.size() * n_blocks;
  if (t.header.size() != expected) {
    throw ParseError(fmt::format("posterior table has {} columns, expected {}", t.header.size(), expected), 1);
  }
  PosteriorSamples out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int line = t.lines[r];
    std::size_t c = 0;
    auto next = [&] { return parse_double(t.rows[r][c++], line); };
    out.log_posterior.push_back(next());
    RegionalModel m = skeleton;
    m.intercepts.assign(n_sites, {0.0, 0.0, 0.0});
    for (auto& icpt : m.intercepts) {
      for (double& v : icpt) {
        v = next();
      }
    }
    m.slopes = {0.0, 0.0, 0.0};
    for (int j : dims) {
      m.slopes[static_cast<std::size_t>(j)] = next();
    }
    m.correlation = Eigen::MatrixXd::Identity(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = a + 1; b < k; ++b) {
        m.correlation(a, b) = m.correlation(b, a) = next();
      }
    }
    Eigen::MatrixXd e(static_cast<Eigen::Index>(n_blocks), k);
    for (Eigen::Index col = 0; col < k; ++col) {
      for (Eigen::Index i = 0; i < e.rows(); ++i) {
        e(i, col) = next();
      }
    }
    out.models.push_back(std::move(m));
    out.effects.push_back(std::move(e));
  }
  return out;
}

KeyValues read_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    if (trim(line).empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected 'key = value'", number);
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ParseError("empty key", number);
    }
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidArgument("cannot open " + path.string());
  }
  return read_key_values(in);
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    fmt::print(out, "{} = {}\n", key, value);
  }
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& field : split(text, ',')) {
    if (!field.empty()) {
      out.push_back(parse_double(field, 0));
    }
  }
  return out;
}

std::string format_double_list(const std::vector<double>& values) {
  std::vector<std::string> parts;
  parts.reserve(values.size());
  for (double v : values) {
    parts.push_back(format_double(v));
  }
  return fmt::format("{}", fmt::join(parts, ","));
}

}  // namespace stormrisk::io
