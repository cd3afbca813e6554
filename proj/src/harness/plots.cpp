#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "peatsim/harness.hpp"

namespace peatsim::harness {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 80, kRight = 20, kTop = 40, kBottom = 56;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string joined(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + exact(v[i]);
  return out;
}

struct Range {
  double lo = 0.0, hi = 1.0;
};

Range span_of(const std::vector<PlotSeries>& series, bool x_axis) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : series) {
    for (double v : x_axis ? s.x : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) return {};
  if (lo == hi) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.05;
    return {lo - pad, hi + pad};
  }
  return {lo, hi};
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  const Range xr = span_of(spec.series, true);
  const Range yr = span_of(spec.series, false);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(kWidth) + "\" height=\"" +
       px(kHeight) + "\" viewBox=\"0 0 " + px(kWidth) + ' ' + px(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + px(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(spec.title) + "</text>\n";
  o += "<rect x=\"" + px(kLeft) + "\" y=\"" + px(kTop) + "\" width=\"" + px(pw) + "\" height=\"" +
       px(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double x = sx(xv), y = sy(yv);
    o += "<line x1=\"" + px(x) + "\" y1=\"" + px(kTop + ph) + "\" x2=\"" + px(x) + "\" y2=\"" +
         px(kTop + ph + 5) + "\" stroke=\"black\"/>";
    o += "<text x=\"" + px(x) + "\" y=\"" + px(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
         brief(xv) + "</text>\n";
    o += "<line x1=\"" + px(kLeft - 5) + "\" y1=\"" + px(y) + "\" x2=\"" + px(kLeft) + "\" y2=\"" +
         px(y) + "\" stroke=\"black\"/>";
    o += "<text x=\"" + px(kLeft - 8) + "\" y=\"" + px(y + 4) + "\" text-anchor=\"end\">" +
         brief(yv) + "</text>\n";
  }
  o += "<text x=\"" + px(kLeft + pw / 2) + "\" y=\"" + px(kHeight - 12) +
       "\" text-anchor=\"middle\">" + escape(spec.x_label) + "</text>\n";
  o += "<text transform=\"translate(16," + px(kTop + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(spec.y_label) + "</text>\n";

  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const auto& series = spec.series[s];
    const char* color = kPalette[s % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < series.x.size() && i < series.y.size(); ++i) {
      if (!std::isfinite(series.y[i])) continue;
      points += (points.empty() ? "" : " ") + px(sx(series.x[i])) + ',' + px(sy(series.y[i]));
    }
    o += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
         "\" stroke-width=\"1.5\" data-label=\"" + escape(series.label) + "\" data-x=\"" +
         joined(series.x) + "\" data-y=\"" + joined(series.y) + "\" points=\"" + points +
         "\"/>\n";
    const double ly = kTop + 14 + 14 * static_cast<double>(s);
    o += "<line x1=\"" + px(kLeft + 10) + "\" y1=\"" + px(ly - 4) + "\" x2=\"" + px(kLeft + 28) +
         "\" y2=\"" + px(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>";
    o += "<text x=\"" + px(kLeft + 32) + "\" y=\"" + px(ly) + "\">" + escape(series.label) +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

std::vector<fs::path> export_plots(const std::vector<fs::path>& run_dirs, const fs::path& out_dir,
                                   std::ostream* log) {
  struct Metric {
    const char* file;
    const char* title;
    const char* y_label;
    double EvalSummary::*field;
  };
  static const Metric metrics[] = {
      {"reward.svg", "Evaluation reward", "mean episode reward", &EvalSummary::reward},
      {"log_delay.svg", "Round latency", "mean log(max delay / 1 s)", &EvalSummary::log_delay},
      {"exchanges.svg", "Emulator exchanges", "exchanges per device per 10 rounds",
       &EvalSummary::exchanges},
      {"perplexity.svg", "Perplexity", "mean device perplexity at episode end",
       &EvalSummary::perplexity},
  };

  std::vector<std::pair<std::string, std::vector<MetricsRow>>> runs;
  for (const auto& dir : run_dirs) {
    auto rows = read_metrics(dir / "metrics.csv");
    std::string name = dir.filename().string();
    if (name.empty()) name = dir.parent_path().filename().string();
    if (rows.empty()) {
      if (log) *log << "warning: " << dir.string() << " has no metrics rows, skipping\n";
      continue;
    }
    runs.emplace_back(name, std::move(rows));
  }
  std::vector<fs::path> written;
  if (runs.empty()) return written;
  fs::create_directories(out_dir);
  for (const auto& m : metrics) {
    PlotSpec spec{m.title, "training step (environment steps)", m.y_label, {}};
    for (const auto& [name, rows] : runs) {
      PlotSeries s{name, {}, {}};
      for (const auto& r : rows) {
        s.x.push_back(static_cast<double>(r.step));
        s.y.push_back(r.eval.*(m.field));
      }
      spec.series.push_back(std::move(s));
    }
    const fs::path path = out_dir / m.file;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << render_svg(spec);
    written.push_back(path);
  }
  return written;
}

}  // namespace peatsim::harness
