#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "multidescent/errors.hpp"
#include "multidescent/format.hpp"
#include "multidescent/nu_system.hpp"
#include "multidescent/parallel.hpp"
#include "multidescent/risk.hpp"
#include "multidescent/simulator.hpp"

namespace multidescent {

/// A one-parameter family of problems: psi_c = ratio_c * c * psi_n / sum(ratios).
struct SweepSpec {
  TheorySpec base;
  std::vector<double> ratios;
  std::vector<double> c_grid;
  std::optional<EmpiricalConfig> empirical;  // N is derived per grid point
  SolverConfig solver;
};

struct GridPoint {
  double c = 0.0;
  TheorySpec theory;
  std::optional<EmpiricalConfig> empirical;
  bool rounding_adjusted = false;  // some N_c was raised to 1
};

struct SweepRow {
  double c = 0.0;
  std::vector<double> psi;
  double psi_n = 0.0;
  double lambda = 0.0;
  double theory_risk = std::numeric_limits<double>::quiet_NaN();
  double theory_bias = std::numeric_limits<double>::quiet_NaN();
  double theory_variance = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> emp_mean;
  std::optional<double> emp_se;
  std::optional<int> replications;
  long solver_iterations = 0;
  double condition = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> N;
  bool rounding_adjusted = false;
  std::string error;  // "<ErrorClass>: message" when this point failed
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int K = 0;
};

inline void validate(const SweepSpec& s) {
  if (s.c_grid.empty()) throw EmptyGrid("c grid is empty");
  if (static_cast<int>(s.ratios.size()) != s.base.K())
    throw InvalidSpec("need one ratio per component");
  for (double r : s.ratios)
    if (!(r > 0.0)) throw InvalidSpec("ratios must be > 0");
  for (std::size_t i = 0; i < s.c_grid.size(); ++i) {
    if (!(s.c_grid[i] > 0.0)) throw InvalidSpec("c values must be > 0");
    if (i > 0 && !(s.c_grid[i] > s.c_grid[i - 1]))
      throw InvalidSpec("c grid must be strictly increasing");
  }
}

/// Evenly spaced grid start, start + step, ... <= stop, rounded to 1e-10 so
/// that accumulated floating error does not leak into the output.
inline std::vector<double> make_c_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) throw InvalidSpec("invalid c grid range");
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i)
    grid[i] = std::round((start + static_cast<double>(i) * step) * 1e10) / 1e10;
  return grid;
}

inline std::vector<GridPoint> expand_grid(const SweepSpec& s) {
  validate(s);
  const double ratio_sum = std::accumulate(s.ratios.begin(), s.ratios.end(), 0.0);
  std::vector<GridPoint> points;
  points.reserve(s.c_grid.size());
  for (double c : s.c_grid) {
    GridPoint p;
    p.c = c;
    p.theory = s.base;
    for (int k = 0; k < s.base.K(); ++k) p.theory.psi[k] = s.ratios[k] * c * s.base.psi_n / ratio_sum;
    if (s.empirical) {
      EmpiricalConfig e = *s.empirical;
      e.N.resize(s.ratios.size());
      for (std::size_t k = 0; k < s.ratios.size(); ++k) {
        const long rounded = std::lround(s.ratios[k] * c * e.n / ratio_sum);
        if (rounded < 1) p.rounding_adjusted = true;
        e.N[k] = static_cast<int>(std::max(1L, rounded));
      }
      p.empirical = std::move(e);
    }
    points.push_back(std::move(p));
  }
  return points;
}

namespace detail {

inline std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return std::string(err->kind()) + ": " + e.what();
  return std::string("Error: ") + e.what();
}

}  // namespace detail

/// Theory at every grid point (sequentially, warm-starting from the previous
/// point and falling back to a cold continuation solve), plus the empirical
/// estimate when requested. Failures are recorded per row.
inline SweepResult run_sweep(const SweepSpec& s, int workers = default_worker_count()) {
  const std::vector<GridPoint> points = expand_grid(s);
  SweepResult result;
  result.K = s.base.K();
  result.rows.resize(points.size());

  std::optional<std::vector<double>> previous_b;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const GridPoint& p = points[i];
    SweepRow& row = result.rows[i];
    row.c = p.c;
    row.psi = p.theory.psi;
    row.psi_n = p.theory.psi_n;
    row.lambda = p.theory.lambda;
    row.rounding_adjusted = p.rounding_adjusted;
    try {
      NuStar nu;
      bool solved = false;
      if (previous_b) {
        try {
          nu = solve_nu(p.theory, s.solver, &*previous_b);
          solved = true;
        } catch (const Error&) {
        }
      }
      if (!solved) nu = solve_nu(p.theory, s.solver);
      const TheoryRisk tr = risk_from_nu(p.theory, nu);
      row.theory_risk = tr.risk;
      row.theory_bias = tr.bias;
      row.theory_variance = tr.variance;
      row.solver_iterations = nu.iterations;
      row.condition = tr.condition;
      previous_b = nu.b;
    } catch (const std::exception& e) {
      row.error = detail::describe(e);
      previous_b.reset();
    }
  }

  // Empirical part: every (point, replication) pair is an independent task.
  struct Task {
    std::size_t point;
    int replication;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].empirical) continue;
    validate(*points[i].empirical);
    for (int r = 0; r < points[i].empirical->replications; ++r) tasks.push_back({i, r});
  }
  if (tasks.empty()) return result;

  std::vector<double> values(tasks.size(), 0.0);
  std::vector<std::string> errors(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    try {
      values[t] = run_replication(*points[tasks[t].point].empirical, tasks[t].replication);
    } catch (const std::exception& e) {
      errors[t] = detail::describe(e);
    }
  });

  std::size_t t = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].empirical) continue;
    const EmpiricalConfig& e = *points[i].empirical;
    SweepRow& row = result.rows[i];
    row.N = e.N;
    std::vector<double> reps(values.begin() + t, values.begin() + t + e.replications);
    std::string first_error;
    for (int r = 0; r < e.replications; ++r)
      if (first_error.empty() && !errors[t + r].empty()) first_error = errors[t + r];
    t += e.replications;
    if (!first_error.empty()) {
      if (row.error.empty()) row.error = first_error;
      continue;
    }
    const double R = static_cast<double>(e.replications);
    const double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / R;
    double ss = 0.0;
    for (double v : reps) ss += (v - mean) * (v - mean);
    row.emp_mean = mean;
    row.emp_se = e.replications > 1 ? std::sqrt(ss / (R - 1.0)) / std::sqrt(R) : 0.0;
    row.replications = e.replications;
  }
  return result;
}

inline std::vector<std::string> csv_header(int K) {
  std::vector<std::string> cols{"c"};
  for (int k = 1; k <= K; ++k) cols.push_back("psi_" + std::to_string(k));
  for (const char* name : {"psi_n", "lambda", "theory_risk", "theory_bias", "theory_variance", "emp_mean",
                           "emp_se", "replications", "solver_iterations"})
    cols.emplace_back(name);
  return cols;
}

inline std::string to_csv(const SweepResult& r) {
  std::ostringstream out;
  const auto header = csv_header(r.K);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  auto num = [](double x) { return std::isfinite(x) ? format_sig12(x) : std::string(); };
  for (const SweepRow& row : r.rows) {
    out << num(row.c);
    for (double p : row.psi) out << ',' << num(p);
    out << ',' << num(row.psi_n) << ',' << num(row.lambda) << ',' << num(row.theory_risk) << ','
        << num(row.theory_bias) << ',' << num(row.theory_variance) << ','
        << (row.emp_mean ? num(*row.emp_mean) : "") << ',' << (row.emp_se ? num(*row.emp_se) : "") << ','
        << (row.replications ? std::to_string(*row.replications) : "") << ',' << row.solver_iterations
        << '\n';
  }
  return out.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
  f.close();
  if (!f) throw IoError("failed writing " + path);
}

inline void write_csv(const SweepResult& r, const std::string& path) { write_text_file(path, to_csv(r)); }

struct SvgOptions {
  bool log_y = false;
  double y_cap = std::numeric_limits<double>::infinity();
  int width = 800;
  int height = 500;
};

/// Theory curve as a polyline, empirical means as dots with +-2 se whiskers.
/// Values above y_cap are drawn at the cap as upward triangles.
inline std::string to_svg(const SweepResult& r, const SvgOptions& opt = {}) {
  if (r.rows.empty()) throw InvalidSpec("cannot plot an empty sweep");
  const double left = 70, right = 20, top = 20, bottom = 50;
  const double plot_w = opt.width - left - right, plot_h = opt.height - top - bottom;

  auto transform = [&](double v) { return opt.log_y ? std::log10(v) : v; };
  auto plottable = [&](double v) { return std::isfinite(v) && (!opt.log_y || v > 0.0); };
  auto capped = [&](double v) { return std::min(v, opt.y_cap); };

  double xmin = r.rows.front().c, xmax = r.rows.back().c;
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  auto include = [&](double v) {
    if (!plottable(v)) return;
    const double t = transform(capped(v));
    ymin = std::min(ymin, t);
    ymax = std::max(ymax, t);
  };
  for (const auto& row : r.rows) {
    include(row.theory_risk);
    if (row.emp_mean) {
      include(*row.emp_mean);
      include(*row.emp_mean - 2.0 * row.emp_se.value_or(0.0));
      include(*row.emp_mean + 2.0 * row.emp_se.value_or(0.0));
    }
  }
  if (!std::isfinite(ymin)) ymin = 0.0, ymax = 1.0;
  if (xmax <= xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax <= ymin) {
    const double pad = ymin == 0.0 ? 1.0 : 0.5 * std::abs(ymin);
    ymin -= pad;
    ymax += pad;
  } else {
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
  }
  auto px = [&](double c) { return left + (c - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double v) { return top + (ymax - transform(capped(v))) / (ymax - ymin) * plot_h; };

  std::ostringstream s;
  auto coord = [](double v) { char b[32]; std::snprintf(b, sizeof b, "%.3f", v); return std::string(b); };
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
    << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << opt.width << "\" height=\"" << opt.height << "\" fill=\"white\"/>\n";

  // axes and ticks
  const double x0 = left, y0 = top + plot_h;
  s << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
    << "<line x1=\"" << coord(x0) << "\" y1=\"" << coord(y0) << "\" x2=\"" << coord(x0 + plot_w) << "\" y2=\""
    << coord(y0) << "\"/>\n"
    << "<line x1=\"" << coord(x0) << "\" y1=\"" << coord(top) << "\" x2=\"" << coord(x0) << "\" y2=\""
    << coord(y0) << "\"/>\n</g>\n";
  s << "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double c = xmin + (xmax - xmin) * i / 5.0;
    const double x = px(c);
    s << "<line x1=\"" << coord(x) << "\" y1=\"" << coord(y0) << "\" x2=\"" << coord(x) << "\" y2=\""
      << coord(y0 + 5) << "\" stroke=\"black\"/>"
      << "<text x=\"" << coord(x) << "\" y=\"" << coord(y0 + 18) << "\" text-anchor=\"middle\">"
      << format_sig12(std::round(c * 1000) / 1000) << "</text>\n";
    const double t = ymin + (ymax - ymin) * i / 5.0;
    const double y = top + (ymax - t) / (ymax - ymin) * plot_h;
    const double label = opt.log_y ? std::pow(10.0, t) : t;
    char lb[32];
    std::snprintf(lb, sizeof lb, "%.3g", label);
    s << "<line x1=\"" << coord(x0 - 5) << "\" y1=\"" << coord(y) << "\" x2=\"" << coord(x0) << "\" y2=\""
      << coord(y) << "\" stroke=\"black\"/>"
      << "<text x=\"" << coord(x0 - 8) << "\" y=\"" << coord(y + 4) << "\" text-anchor=\"end\">" << lb
      << "</text>\n";
  }
  s << "</g>\n";
  s << "<text class=\"xlabel\" x=\"" << coord(left + plot_w / 2) << "\" y=\"" << coord(opt.height - 10.0)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">c</text>\n"
    << "<text class=\"ylabel\" x=\"15\" y=\"" << coord(top + plot_h / 2) << "\" transform=\"rotate(-90 15 "
    << coord(top + plot_h / 2) << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
    << (opt.log_y ? "excess risk (log scale)" : "excess risk") << "</text>\n";

  // theory curve
  s << "<polyline class=\"theory\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  bool first = true;
  for (const auto& row : r.rows) {
    if (!plottable(row.theory_risk)) continue;
    s << (first ? "" : " ") << coord(px(row.c)) << ',' << coord(py(row.theory_risk));
    first = false;
  }
  s << "\"/>\n";
  for (const auto& row : r.rows) {
    if (plottable(row.theory_risk) && row.theory_risk > opt.y_cap)
      s << "<path class=\"clipped\" d=\"M" << coord(px(row.c)) << ',' << coord(py(row.theory_risk) - 2) << " l-4,8 h8 z\" fill=\"#d62728\"/>\n";
  }

  // empirical markers
  for (const auto& row : r.rows) {
    if (!row.emp_mean || !plottable(*row.emp_mean)) continue;
    const double se = row.emp_se.value_or(0.0);
    const double x = px(row.c);
    const double lo = *row.emp_mean - 2.0 * se, hi = *row.emp_mean + 2.0 * se;
    if (plottable(lo) && plottable(hi))
      s << "<line class=\"whisker\" x1=\"" << coord(x) << "\" y1=\"" << coord(py(lo)) << "\" x2=\"" << coord(x)
        << "\" y2=\"" << coord(py(hi)) << "\" stroke=\"black\"/>\n";
    if (*row.emp_mean > opt.y_cap)
      s << "<path class=\"clipped\" d=\"M" << coord(x) << ',' << coord(py(*row.emp_mean) - 2) << " l-4,8 h8 z\" fill=\"black\"/>\n";
    else
      s << "<circle class=\"empirical\" cx=\"" << coord(x) << "\" cy=\"" << coord(py(*row.emp_mean))
        << "\" r=\"3\" fill=\"black\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void render_svg(const SweepResult& r, const std::string& path, const SvgOptions& opt = {}) {
  write_text_file(path, to_svg(r, opt));
}

}  // namespace multidescent
