#pragma once

// Day scenarios: 24 hourly injection vectors per day.
//
// Scenario document (CSV, UTF-8, header mandatory):
//   day,hour,injection,mw
//   0,1,0,85.2
//   ...
// Hours run 1..24; every (day, hour, injection) triple must appear once.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gridplan/error.hpp"
#include "gridplan/grid.hpp"

namespace gridplan {

inline constexpr int kHours = 24;

struct DayScenario {
  int id = 0;  // ordinal date; larger ids are later in time
  std::array<std::vector<double>, kHours> hours;

  /// Injections of timestamp `hour` (1-based).
  const std::vector<double>& at(int hour) const { return hours.at(hour - 1); }
};

/// Scales generators so that total generation equals total load.
inline void balance_injections(const Grid& grid, std::vector<double>& p) {
  double gen = 0.0, load = 0.0;
  for (int k = 0; k < grid.injection_count(); ++k) {
    if (grid.injections()[k].kind == InjectionKind::Generator)
      gen += p[k];
    else
      load -= p[k];
  }
  if (std::abs(gen - load) <= 1e-13 * std::max(gen, load)) return;
  if (!(gen > 0.0)) throw ValidationError("no generation available to balance the load");
  const double scale = load / gen;
  for (int k = 0; k < grid.injection_count(); ++k)
    if (grid.injections()[k].kind == InjectionKind::Generator) p[k] *= scale;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && !s.empty();
}

}  // namespace detail

/// Parses a scenario document, validates it against `grid` and balances
/// every timestamp. Days are returned in ascending id order.
inline std::vector<DayScenario> load_day_scenarios(std::istream& in, const Grid& grid) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("scenario document is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  {
    const auto header = detail::split_csv(line);
    if (header.size() != 4 || header[0] != "day" || header[1] != "hour" || header[2] != "injection" ||
        header[3] != "mw")
      throw ValidationError("scenario header must be 'day,hour,injection,mw'");
  }
  const int n_inj = grid.injection_count();
  std::map<int, std::array<std::vector<double>, kHours>> raw;
  std::map<int, std::array<std::vector<bool>, kHours>> seen;
  std::map<int, std::string> bad;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv(line);
    int day = 0;
    if (f.empty() || !detail::parse_number(f[0], day))
      throw ValidationError("scenario line " + std::to_string(line_no) + ": bad day id");
    auto& err = bad[day];
    int hour = 0, inj = 0;
    double mw = 0.0;
    if (f.size() != 4) {
      if (err.empty()) err = "wrong field count on line " + std::to_string(line_no);
      continue;
    }
    if (!detail::parse_number(f[1], hour) || !detail::parse_number(f[2], inj) ||
        !detail::parse_number(f[3], mw) || !std::isfinite(mw)) {
      if (err.empty()) err = "non-numeric entry on line " + std::to_string(line_no);
      continue;
    }
    if (hour < 1 || hour > kHours || inj < 0 || inj >= n_inj) {
      if (err.empty()) err = "hour or injection out of range on line " + std::to_string(line_no);
      continue;
    }
    auto& hours = raw[day];
    auto& mask = seen[day];
    if (hours[hour - 1].empty()) {
      hours[hour - 1].assign(n_inj, 0.0);
      mask[hour - 1].assign(n_inj, false);
    }
    if (mask[hour - 1][inj]) {
      if (err.empty()) err = "duplicate entry on line " + std::to_string(line_no);
      continue;
    }
    mask[hour - 1][inj] = true;
    hours[hour - 1][inj] = mw;
  }
  for (const auto& [id, err] : bad)
    if (!err.empty()) throw ValidationError("day " + std::to_string(id) + ": " + err);
  std::vector<DayScenario> days;
  for (auto& [id, hours] : raw) {
    std::string err;
    for (int h = 0; h < kHours && err.empty(); ++h) {
      if (hours[h].empty())
        err = "missing timestamp " + std::to_string(h + 1);
      else if (std::count(seen[id][h].begin(), seen[id][h].end(), true) != n_inj)
        err = "wrong vector length at timestamp " + std::to_string(h + 1);
    }
    if (!err.empty()) throw ValidationError("day " + std::to_string(id) + ": " + err);
    DayScenario d;
    d.id = id;
    d.hours = std::move(hours);
    for (auto& p : d.hours) balance_injections(grid, p);
    days.push_back(std::move(d));
  }
  return days;
}

inline std::vector<DayScenario> load_day_scenarios_file(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  return load_day_scenarios(in, grid);
}

inline void write_day_scenarios(std::ostream& os, const std::vector<DayScenario>& days) {
  os << "day,hour,injection,mw\n";
  char buf[64];
  for (const auto& d : days)
    for (int h = 0; h < kHours; ++h)
      for (std::size_t k = 0; k < d.hours[h].size(); ++k) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d.hours[h][k]);
        os << d.id << ',' << (h + 1) << ',' << k << ',' << std::string_view(buf, end - buf) << '\n';
      }
}

struct SplitCounts {
  int train = 50;
  int in_distribution = 31;
  int out_of_distribution = 181;
};

struct DatasetSplit {
  std::vector<int> train;
  std::vector<int> in_distribution;
  std::vector<int> out_of_distribution;
};

/// The last `out_of_distribution` days (by id) form the later segment; the
/// earlier segment is shuffled and dealt into train / in-distribution.
inline DatasetSplit split_dataset(const std::vector<DayScenario>& days, const SplitCounts& counts,
                                  std::uint64_t seed) {
  if (counts.train < 0 || counts.in_distribution < 0 || counts.out_of_distribution < 0)
    throw ValidationError("negative split count");
  const std::size_t need =
      static_cast<std::size_t>(counts.train) + counts.in_distribution + counts.out_of_distribution;
  if (need > days.size())
    throw ValidationError("insufficient days: need " + std::to_string(need) + ", have " +
                          std::to_string(days.size()));
  std::vector<int> ids;
  for (const auto& d : days) ids.push_back(d.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ValidationError("duplicate day id");
  DatasetSplit split;
  const std::size_t first_len = ids.size() - counts.out_of_distribution;
  split.out_of_distribution.assign(ids.begin() + first_len, ids.end());
  std::vector<int> first(ids.begin(), ids.begin() + first_len);
  std::mt19937_64 rng(seed);
  std::shuffle(first.begin(), first.end(), rng);
  split.train.assign(first.begin(), first.begin() + counts.train);
  split.in_distribution.assign(first.begin() + counts.train, first.begin() + counts.train + counts.in_distribution);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.in_distribution.begin(), split.in_distribution.end());
  return split;
}

}  // namespace gridplan
