#include "gazeswipe/metrics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include "gazeswipe/errors.hpp"
#include "gazeswipe/rng.hpp"

namespace gazeswipe {

double gaze_error(const Vec2& calibrated_gaze_cm, const Vec2& release_pos_cm) {
  if (!calibrated_gaze_cm.allFinite() || !release_pos_cm.allFinite()) {
    throw InvalidInput("gaze_error: non-finite coordinates");
  }
  return (release_pos_cm - calibrated_gaze_cm).norm();
}

std::vector<WindowPoint> sliding_window_error(std::span<const double> errors, int window, int step) {
  if (window < 1 || step < 1) throw InvalidInput("sliding window: window and step must be positive");
  const auto n = static_cast<std::ptrdiff_t>(errors.size());
  if (window > n) throw InvalidInput("sliding window: window longer than the series");
  std::vector<WindowPoint> series;
  for (std::ptrdiff_t start = 0; start + window <= n; start += step) {
    const double sum = std::accumulate(errors.begin() + start, errors.begin() + start + window, 0.0);
    series.push_back({static_cast<double>(start) + (window - 1) / 2.0, sum / window});
  }
  return series;
}

std::vector<WindowPoint> sliding_window_error(std::span<const TrialRecord> records, int window, int step) {
  std::vector<double> errors;
  errors.reserve(records.size());
  for (const auto& r : records) errors.push_back(r.gaze_error_cm);
  return sliding_window_error(errors, window, step);
}

MetricSummary describe(std::span<const double> values, std::uint64_t bootstrap_seed, int resamples) {
  if (values.empty()) throw InvalidInput("describe: no values");
  const auto n = values.size();
  MetricSummary m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(n - 1));
  }

  Rng rng = Rng::derive(bootstrap_seed, "bootstrap");
  std::vector<double> means(static_cast<std::size_t>(std::max(resamples, 1)));
  for (double& mean : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[rng.uniform_int(n)];
    mean = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  m.ci95 = {std::min(quantile(0.025), m.mean), std::max(quantile(0.975), m.mean)};
  return m;
}

SummaryStats summarize(std::span<const TrialRecord> records, std::uint64_t bootstrap_seed, int resamples) {
  if (records.empty()) throw InvalidInput("summarize: no records");
  using Key = std::tuple<std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) {
    Key key{r.technique, r.strategy, r.device};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }

  SummaryStats stats;
  std::uint64_t stream = 0;
  for (const auto& key : order) {
    const auto& members = groups.at(key);
    std::vector<double> err, thumb, time, success;
    for (const auto* r : members) {
      err.push_back(r->gaze_error_cm);
      thumb.push_back(r->thumb_distance_cm);
      time.push_back(r->completion_time_s);
      success.push_back(r->success ? 1.0 : 0.0);
    }
    GroupSummary g;
    std::tie(g.technique, g.strategy, g.device) = key;
    g.count = members.size();
    // Distinct bootstrap streams per metric keep the intervals independent.
    g.gaze_error_cm = describe(err, bootstrap_seed + stream++, resamples);
    g.thumb_distance_cm = describe(thumb, bootstrap_seed + stream++, resamples);
    g.completion_time_s = describe(time, bootstrap_seed + stream++, resamples);
    g.success_rate = describe(success, bootstrap_seed + stream++, resamples);
    stats.groups.push_back(std::move(g));
  }
  return stats;
}

void to_json(nlohmann::json& j, const MetricSummary& m) {
  j = nlohmann::json{{"mean", m.mean}, {"sd", m.sd}, {"ci95", {m.ci95.lo, m.ci95.hi}}};
}

void to_json(nlohmann::json& j, const GroupSummary& g) {
  j = nlohmann::json{
      {"technique", g.technique},
      {"strategy", g.strategy},
      {"device", g.device},
      {"count", g.count},
      {"gaze_error_cm", g.gaze_error_cm},
      {"thumb_distance_cm", g.thumb_distance_cm},
      {"completion_time_s", g.completion_time_s},
      {"success_rate", g.success_rate},
  };
}

void to_json(nlohmann::json& j, const SummaryStats& s) { j = nlohmann::json{{"groups", s.groups}}; }

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void require_plain_field(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) {
    throw InvalidInput("csv: text field contains a separator: '" + s + "'");
  }
}

}  // namespace

void write_csv(std::ostream& out, std::span<const TrialRecord> records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    require_plain_field(r.device);
    require_plain_field(r.strategy);
    require_plain_field(r.technique);
    require_plain_field(r.gesture);
    out << r.trial_idx << ',' << r.seed << ',' << r.device << ',' << r.strategy << ',' << r.technique << ','
        << fixed6(r.gaze_error_cm) << ',' << fixed6(r.thumb_distance_cm) << ',' << fixed6(r.completion_time_s) << ','
        << (r.success ? "true" : "false") << ',' << r.gesture << ',' << fixed6(r.timestamp_s) << '\n';
  }
}

void export_csv(std::span<const TrialRecord> records, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_csv(buf, records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << buf.str();
  out.flush();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<TrialRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw InvalidInput("csv: missing or unexpected header");
  std::vector<TrialRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    auto bad = [&](const std::string& why) {
      return InvalidInput("csv line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 11) throw bad("expected 11 fields");
    TrialRecord r;
    try {
      std::size_t used = 0;
      auto whole = [&](const std::string& s, auto parsed) {
        if (used != s.size()) throw bad("trailing characters in '" + s + "'");
        return parsed;
      };
      r.trial_idx = whole(f[0], std::stoll(f[0], &used));
      r.seed = whole(f[1], std::stoull(f[1], &used));
      r.device = f[2];
      r.strategy = f[3];
      r.technique = f[4];
      r.gaze_error_cm = whole(f[5], std::stod(f[5], &used));
      r.thumb_distance_cm = whole(f[6], std::stod(f[6], &used));
      r.completion_time_s = whole(f[7], std::stod(f[7], &used));
      r.timestamp_s = whole(f[10], std::stod(f[10], &used));
    } catch (const std::logic_error&) {
      throw bad("malformed number");
    }
    if (f[8] != "true" && f[8] != "false") throw bad("success must be true or false");
    r.success = f[8] == "true";
    r.gesture = f[9];
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace gazeswipe
