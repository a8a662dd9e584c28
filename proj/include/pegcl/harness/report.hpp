#pragma once

// Cross-run comparison: learning curves (mean and sample std over seeds of
// the trailing-window smoothed episode return) and a success/time table.

#include "pegcl/harness/config.hpp"
#include "pegcl/harness/csv.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pegcl::harness {

inline constexpr int kSmoothingWindow = 20;
inline constexpr int kResampleGridPoints = 200;

struct Series {
  std::vector<double> x;
  std::vector<double> y;
};

struct EvalRecord {
  std::string shape;
  double success_rate = 0.0;
  std::optional<double> avg_time;
};

struct RunData {
  std::filesystem::path dir;
  std::string method;
  Series returns;  // x = cumulative step, y = episode return
  std::vector<EvalRecord> evals;
};

inline std::vector<double> smooth_trailing(const std::vector<double>& v, int window = kSmoothingWindow) {
  if (window < 1) throw std::invalid_argument("smoothing window must be positive");
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= std::size_t(window)) sum -= v[i - std::size_t(window)];
    out[i] = sum / static_cast<double>(std::min(i + 1, std::size_t(window)));
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); zero for a single value.
inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Piecewise-linear interpolation, clamped at the ends.
inline double interpolate(const Series& s, double x) {
  if (s.x.empty()) throw std::invalid_argument("cannot interpolate an empty series");
  if (x <= s.x.front()) return s.y.front();
  if (x >= s.x.back()) return s.y.back();
  const auto it = std::upper_bound(s.x.begin(), s.x.end(), x);
  const std::size_t i = std::size_t(it - s.x.begin());
  const double t = (x - s.x[i - 1]) / (s.x[i] - s.x[i - 1]);
  return s.y[i - 1] + t * (s.y[i] - s.y[i - 1]);
}

struct Curve {
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> std;
};

/// Mean and sample std across series. Series on identical grids are combined
/// pointwise; otherwise all are resampled onto a shared uniform grid over the
/// overlapping x range and a warning is appended.
inline Curve aggregate_curves(const std::vector<Series>& runs, std::vector<std::string>* warnings = nullptr) {
  if (runs.empty()) throw std::invalid_argument("no series to aggregate");
  for (const auto& r : runs)
    if (r.x.empty() || r.x.size() != r.y.size()) throw std::invalid_argument("malformed series");
  bool same = true;
  for (const auto& r : runs) same = same && r.x == runs.front().x;

  Curve c;
  std::vector<std::vector<double>> ys;
  if (same) {
    c.x = runs.front().x;
    for (const auto& r : runs) ys.push_back(r.y);
  } else {
    if (warnings) warnings->push_back("step grids differ across runs; resampled onto a common grid");
    double lo = runs.front().x.front(), hi = runs.front().x.back();
    for (const auto& r : runs) {
      lo = std::max(lo, r.x.front());
      hi = std::min(hi, r.x.back());
    }
    if (hi < lo) hi = lo;
    const int n = hi > lo ? kResampleGridPoints : 1;
    for (int i = 0; i < n; ++i) c.x.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
    for (const auto& r : runs) {
      std::vector<double> y;
      for (double x : c.x) y.push_back(interpolate(r, x));
      ys.push_back(std::move(y));
    }
  }
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    std::vector<double> col;
    for (const auto& y : ys) col.push_back(y[i]);
    c.mean.push_back(mean_of(col));
    c.std.push_back(sample_std(col));
  }
  return c;
}

inline RunData load_run(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  RunData run;
  run.dir = dir;
  std::ifstream cfg_in(dir / "config.json");
  if (!cfg_in) throw std::runtime_error("run directory " + dir.string() + " has no config.json");
  const json cfg = json::parse(cfg_in);
  run.method = cfg.at("method").get<std::string>();
  // ablation runs are reported as their own group
  if (cfg.contains("controller") && cfg["controller"].contains("pid_scheduling") &&
      !cfg["controller"]["pid_scheduling"].get<bool>())
    run.method += "/pid-off";
  const CsvTable t = read_csv(dir / "episodes.csv");
  const std::size_t step_col = t.column("step");
  const std::size_t ret_col = t.column("return");
  std::vector<double> raw;
  for (const auto& row : t.rows) {
    run.returns.x.push_back(std::stod(row[step_col]));
    raw.push_back(std::stod(row[ret_col]));
  }
  run.returns.y = smooth_trailing(raw);
  if (run.returns.x.empty()) throw std::runtime_error(dir.string() + "/episodes.csv has no episodes");

  std::vector<fs::path> summaries;
  for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it)
    if (it->is_regular_file() && it->path().filename() == "summary.json") summaries.push_back(it->path());
  std::sort(summaries.begin(), summaries.end());
  for (const auto& p : summaries) {
    std::ifstream in(p);
    const json j = json::parse(in);
    EvalRecord e;
    e.shape = j.at("shape").get<std::string>();
    e.success_rate = j.at("success_rate").get<double>();
    if (!j.at("avg_time").is_null()) e.avg_time = j.at("avg_time").get<double>();
    run.evals.push_back(e);
  }
  return run;
}

struct MethodRow {
  std::string method;
  int runs = 0;
  double final_return_mean = 0.0;
  double final_return_std = 0.0;
  struct ShapeStats {
    int runs = 0;
    double success_mean = 0.0;
    double success_std = 0.0;
    std::optional<double> avg_time_mean;  // over runs with at least one success
  };
  std::map<std::string, ShapeStats> shapes;
  Curve curve;
};

struct Report {
  std::vector<MethodRow> rows;
  std::vector<std::string> warnings;
  std::string text;
};

inline std::string format_report(const std::vector<MethodRow>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-20s %5s %22s\n", "method", "runs", "final return");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-20s %5d %12.2f +- %7.2f\n", r.method.c_str(), r.runs, r.final_return_mean,
                  r.final_return_std);
    os << buf;
  }
  bool any_eval = false;
  for (const auto& r : rows) any_eval = any_eval || !r.shapes.empty();
  if (any_eval) {
    std::snprintf(buf, sizeof(buf), "\n%-20s %-10s %5s %16s %10s\n", "method", "shape", "runs", "success", "avg time");
    os << buf;
    for (const auto& r : rows) {
      for (const auto& [shape, s] : r.shapes) {
        const std::string t = s.avg_time_mean ? fmt_num(std::round(*s.avg_time_mean * 1000.0) / 1000.0) + " s" : "n/a";
        std::snprintf(buf, sizeof(buf), "%-20s %-10s %5d %7.3f +- %5.3f %10s\n", r.method.c_str(), shape.c_str(),
                      s.runs, s.success_mean, s.success_std, t.c_str());
        os << buf;
      }
    }
  }
  return os.str();
}

/// Groups runs by method, aggregates over seeds and, when out_dir is given,
/// writes learning_curves.csv, report.json and report.txt there.
inline Report emit_report(const std::vector<std::filesystem::path>& run_dirs,
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  if (run_dirs.empty()) throw std::invalid_argument("report needs at least one run directory");
  std::map<std::string, std::vector<RunData>> by_method;
  for (const auto& d : run_dirs) {
    RunData r = load_run(d);
    by_method[r.method].push_back(std::move(r));
  }
  Report rep;
  for (auto& [method, runs] : by_method) {
    MethodRow row;
    row.method = method;
    row.runs = static_cast<int>(runs.size());
    std::vector<Series> series;
    std::vector<double> finals;
    std::map<std::string, std::vector<EvalRecord>> evals;
    for (const auto& r : runs) {
      series.push_back(r.returns);
      finals.push_back(r.returns.y.back());
      for (const auto& e : r.evals) evals[e.shape].push_back(e);
    }
    std::vector<std::string> w;
    row.curve = aggregate_curves(series, &w);
    for (const auto& msg : w) rep.warnings.push_back(method + ": " + msg);
    row.final_return_mean = mean_of(finals);
    row.final_return_std = sample_std(finals);
    for (const auto& [shape, recs] : evals) {
      MethodRow::ShapeStats s;
      std::vector<double> rates, times;
      for (const auto& e : recs) {
        rates.push_back(e.success_rate);
        if (e.avg_time) times.push_back(*e.avg_time);
      }
      s.runs = static_cast<int>(recs.size());
      s.success_mean = mean_of(rates);
      s.success_std = sample_std(rates);
      if (!times.empty()) s.avg_time_mean = mean_of(times);
      row.shapes[shape] = s;
    }
    rep.rows.push_back(std::move(row));
  }
  rep.text = format_report(rep.rows);

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    CsvWriter curves(*out_dir / "learning_curves.csv", {"method", "step", "mean_return", "std_return"});
    json table = json::array();
    for (const auto& r : rep.rows) {
      for (std::size_t i = 0; i < r.curve.x.size(); ++i)
        curves.row({r.method, fmt_num(r.curve.x[i]), fmt_num(r.curve.mean[i]), fmt_num(r.curve.std[i])});
      json shapes = json::object();
      for (const auto& [shape, s] : r.shapes)
        shapes[shape] = {{"runs", s.runs},
                         {"success_rate_mean", s.success_mean},
                         {"success_rate_std", s.success_std},
                         {"avg_time_mean", s.avg_time_mean ? json(*s.avg_time_mean) : json(nullptr)}};
      table.push_back({{"method", r.method},
                       {"runs", r.runs},
                       {"final_return_mean", r.final_return_mean},
                       {"final_return_std", r.final_return_std},
                       {"eval", shapes}});
    }
    curves.flush();
    write_json(*out_dir / "report.json", {{"methods", table}, {"warnings", rep.warnings}});
    std::ofstream txt(*out_dir / "report.txt", std::ios::trunc);
    txt << rep.text;
    if (!txt) throw std::runtime_error("failed writing report.txt");
  }
  return rep;
}

}  // namespace pegcl::harness
