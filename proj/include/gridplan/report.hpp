#pragma once

// Evaluation report bundle: per-day and per-split tables (CSV) and static
// SVG charts (hypervolume and best-loading box plots, solved-day and
// switching bar charts). Output bytes depend only on the records.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gridplan/error.hpp"
#include "gridplan/pareto.hpp"

namespace gridplan {

struct DayRecord {
  std::string split;
  int day = 0;
  std::string approach;
  DayMetrics metrics;
  int n_plans = 0;
};

struct SplitRecord {
  std::string split;
  std::string approach;
  Summary hypervolume;
  Summary best_max_rho;
  int solved_days = 0;
  double solved_rate = 0.0;
  double mean_n_switching = 0.0;
};

/// Shortest round-trip decimal text of a double.
inline std::string fmt(double v) {
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::vector<SplitRecord> aggregate_by_split(const std::vector<DayRecord>& days,
                                                   const std::vector<std::string>& splits,
                                                   const std::vector<std::string>& approaches) {
  std::vector<SplitRecord> out;
  for (const auto& s : splits)
    for (const auto& a : approaches) {
      std::vector<double> hv, rho;
      SplitRecord r{s, a, {}, {}, 0, 0.0, 0.0};
      double nsw = 0.0;
      for (const auto& d : days) {
        if (d.split != s || d.approach != a) continue;
        hv.push_back(d.metrics.hypervolume);
        rho.push_back(d.metrics.best_max_rho);
        r.solved_days += d.metrics.solved ? 1 : 0;
        nsw += d.metrics.best_n_switching;
      }
      if (hv.empty()) continue;
      r.hypervolume = summarize(hv);
      r.best_max_rho = summarize(rho);
      r.solved_rate = static_cast<double>(r.solved_days) / static_cast<double>(hv.size());
      r.mean_n_switching = nsw / static_cast<double>(hv.size());
      out.push_back(std::move(r));
    }
  return out;
}

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d"};
  return colors[i % 7];
}

struct ChartFrame {
  double width = 960, height = 440, left = 70, right = 190, top = 50, bottom = 60;
  double lo = 0, hi = 1;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double y(double v) const { return top + plot_h() * (1.0 - (v - lo) / (hi - lo)); }
};

inline void nice_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

inline void chart_header(std::ostream& os, const ChartFrame& f, const std::string& title, const std::string& ylabel) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << f.width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  os << "<text transform=\"translate(18," << f.top + f.plot_h() / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << ylabel << "</text>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = f.lo + (f.hi - f.lo) * t / 5.0;
    const double yy = f.y(v);
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", v);
    os << "<line x1=\"" << f.left << "\" x2=\"" << f.left + f.plot_w() << "\" y1=\"" << yy << "\" y2=\"" << yy
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << f.left - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  os << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.plot_w() << "\" height=\"" << f.plot_h()
     << "\" fill=\"none\" stroke=\"black\"/>\n";
}

inline void chart_legend(std::ostream& os, const ChartFrame& f, const std::vector<std::string>& approaches) {
  for (std::size_t i = 0; i < approaches.size(); ++i) {
    const double yy = f.top + 10 + 20.0 * i;
    os << "<rect x=\"" << f.width - f.right + 16 << "\" y=\"" << yy << "\" width=\"12\" height=\"12\" fill=\""
       << palette(i) << "\"/>\n";
    os << "<text x=\"" << f.width - f.right + 34 << "\" y=\"" << yy + 10 << "\">" << approaches[i] << "</text>\n";
  }
}

/// Slot geometry: one group per split, one slot per approach.
inline std::pair<double, double> slot(const ChartFrame& f, std::size_t g, std::size_t groups, std::size_t a,
                                      std::size_t approaches) {
  const double group_w = f.plot_w() / static_cast<double>(groups);
  const double slot_w = group_w * 0.8 / static_cast<double>(approaches);
  const double x = f.left + group_w * g + group_w * 0.1 + slot_w * a;
  return {x, slot_w};
}

inline void group_labels(std::ostream& os, const ChartFrame& f, const std::vector<std::string>& splits) {
  const double group_w = f.plot_w() / static_cast<double>(splits.size());
  for (std::size_t g = 0; g < splits.size(); ++g)
    os << "<text x=\"" << f.left + group_w * (g + 0.5) << "\" y=\"" << f.top + f.plot_h() + 22
       << "\" text-anchor=\"middle\">" << splits[g] << "</text>\n";
}

inline std::string box_plot(const std::vector<SplitRecord>& rows, const std::vector<std::string>& splits,
                            const std::vector<std::string>& approaches, Summary SplitRecord::*field,
                            const std::string& title, const std::string& ylabel, const std::string& metric,
                            double threshold = std::nan("")) {
  ChartFrame f;
  bool any = false;
  for (const auto& r : rows) {
    const Summary& s = r.*field;
    f.lo = any ? std::min(f.lo, s.min) : s.min;
    f.hi = any ? std::max(f.hi, s.max) : s.max;
    any = true;
  }
  if (!std::isnan(threshold)) {
    f.lo = std::min(f.lo, threshold);
    f.hi = std::max(f.hi, threshold);
  }
  nice_range(f.lo, f.hi);
  std::ostringstream os;
  chart_header(os, f, title, ylabel);
  if (!std::isnan(threshold))
    os << "<line x1=\"" << f.left << "\" x2=\"" << f.left + f.plot_w() << "\" y1=\"" << f.y(threshold) << "\" y2=\""
       << f.y(threshold) << "\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n";
  for (std::size_t g = 0; g < splits.size(); ++g)
    for (std::size_t a = 0; a < approaches.size(); ++a) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const SplitRecord& r) { return r.split == splits[g] && r.approach == approaches[a]; });
      if (it == rows.end()) continue;
      const Summary& s = (*it).*field;
      auto [x, w] = slot(f, g, splits.size(), a, approaches.size());
      const double cx = x + w / 2, bw = w * 0.7;
      os << "<g data-split=\"" << splits[g] << "\" data-approach=\"" << approaches[a] << "\" data-metric=\"" << metric
         << "\" data-min=\"" << fmt(s.min) << "\" data-q1=\"" << fmt(s.q1) << "\" data-median=\"" << fmt(s.median)
         << "\" data-q3=\"" << fmt(s.q3) << "\" data-max=\"" << fmt(s.max) << "\">\n";
      os << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << f.y(s.min) << "\" y2=\"" << f.y(s.max)
         << "\" stroke=\"black\"/>\n";
      os << "<rect x=\"" << cx - bw / 2 << "\" y=\"" << f.y(s.q3) << "\" width=\"" << bw << "\" height=\""
         << std::max(1.0, f.y(s.q1) - f.y(s.q3)) << "\" fill=\"" << palette(a) << "\" stroke=\"black\"/>\n";
      os << "<line x1=\"" << cx - bw / 2 << "\" x2=\"" << cx + bw / 2 << "\" y1=\"" << f.y(s.median) << "\" y2=\""
         << f.y(s.median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
      os << "</g>\n";
    }
  group_labels(os, f, splits);
  chart_legend(os, f, approaches);
  os << "</svg>\n";
  return os.str();
}

template <typename Get>
std::string bar_chart(const std::vector<SplitRecord>& rows, const std::vector<std::string>& splits,
                      const std::vector<std::string>& approaches, Get get, const std::string& title,
                      const std::string& ylabel, const std::string& metric) {
  ChartFrame f;
  f.lo = 0.0;
  f.hi = 0.0;
  for (const auto& r : rows) f.hi = std::max(f.hi, get(r));
  if (!(f.hi > 0.0)) f.hi = 1.0;
  f.hi *= 1.1;
  std::ostringstream os;
  chart_header(os, f, title, ylabel);
  for (std::size_t g = 0; g < splits.size(); ++g)
    for (std::size_t a = 0; a < approaches.size(); ++a) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const SplitRecord& r) { return r.split == splits[g] && r.approach == approaches[a]; });
      if (it == rows.end()) continue;
      const double v = get(*it);
      auto [x, w] = slot(f, g, splits.size(), a, approaches.size());
      os << "<rect data-split=\"" << splits[g] << "\" data-approach=\"" << approaches[a] << "\" data-metric=\""
         << metric << "\" data-value=\"" << fmt(v) << "\" x=\"" << x + w * 0.15 << "\" y=\"" << f.y(v)
         << "\" width=\"" << w * 0.7 << "\" height=\"" << f.y(0.0) - f.y(v) << "\" fill=\"" << palette(a)
         << "\"/>\n";
    }
  group_labels(os, f, splits);
  chart_legend(os, f, approaches);
  os << "</svg>\n";
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace detail

/// Writes days.csv, splits.csv and four charts into `dir`. Returns the
/// file names written.
inline std::vector<std::string> emit_report(const std::filesystem::path& dir, const std::vector<DayRecord>& days,
                                            const std::vector<std::string>& splits,
                                            const std::vector<std::string>& approaches) {
  for (const auto& d : days)
    if (std::find(splits.begin(), splits.end(), d.split) == splits.end())
      throw ValidationError("day " + std::to_string(d.day) + " has no known split label");
  std::filesystem::create_directories(dir);
  std::vector<DayRecord> sorted = days;
  auto rank = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) - v.begin();
  };
  std::stable_sort(sorted.begin(), sorted.end(), [&](const DayRecord& a, const DayRecord& b) {
    if (a.split != b.split) return rank(splits, a.split) < rank(splits, b.split);
    if (a.day != b.day) return a.day < b.day;
    return rank(approaches, a.approach) < rank(approaches, b.approach);
  });
  std::ostringstream dcsv;
  dcsv << "split,day,approach,hypervolume,best_max_rho_n1,solved,n_switching,n_plans\n";
  for (const auto& d : sorted)
    dcsv << d.split << ',' << d.day << ',' << d.approach << ',' << fmt(d.metrics.hypervolume) << ','
         << fmt(d.metrics.best_max_rho) << ',' << (d.metrics.solved ? 1 : 0) << ',' << d.metrics.best_n_switching << ','
         << d.n_plans << '\n';
  detail::write_text(dir / "days.csv", dcsv.str());

  const auto rows = aggregate_by_split(sorted, splits, approaches);
  std::ostringstream scsv;
  scsv << "split,approach,days,hv_min,hv_q1,hv_median,hv_q3,hv_max,rho_min,rho_q1,rho_median,rho_q3,rho_max,"
          "solved_days,solved_rate,mean_n_switching\n";
  for (const auto& r : rows) {
    const auto& h = r.hypervolume;
    const auto& p = r.best_max_rho;
    scsv << r.split << ',' << r.approach << ',' << h.count << ',' << fmt(h.min) << ',' << fmt(h.q1) << ','
         << fmt(h.median) << ',' << fmt(h.q3) << ',' << fmt(h.max) << ',' << fmt(p.min) << ',' << fmt(p.q1) << ','
         << fmt(p.median) << ',' << fmt(p.q3) << ',' << fmt(p.max) << ',' << r.solved_days << ','
         << fmt(r.solved_rate) << ',' << fmt(r.mean_n_switching) << '\n';
  }
  detail::write_text(dir / "splits.csv", scsv.str());

  detail::write_text(dir / "hypervolume.svg",
                     detail::box_plot(rows, splits, approaches, &SplitRecord::hypervolume,
                                      "Per-day hypervolume by approach and split", "hypervolume", "hypervolume"));
  detail::write_text(dir / "best_max_rho.svg",
                     detail::box_plot(rows, splits, approaches, &SplitRecord::best_max_rho,
                                      "Best max N-1 loading per day", "max rho (N-1)", "best_max_rho_n1", 1.0));
  detail::write_text(dir / "solved_days.svg",
                     detail::bar_chart(
                         rows, splits, approaches, [](const SplitRecord& r) { return double(r.solved_days); },
                         "Solved days (best max N-1 loading below 1)", "days", "solved_days"));
  detail::write_text(dir / "n_switching.svg",
                     detail::bar_chart(
                         rows, splits, approaches, [](const SplitRecord& r) { return r.mean_n_switching; },
                         "Mean switching count of the best plan", "N switching", "mean_n_switching"));
  return {"days.csv", "splits.csv", "hypervolume.svg", "best_max_rho.svg", "solved_days.svg", "n_switching.svg"};
}

}  // namespace gridplan
