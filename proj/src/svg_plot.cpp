#include "sfn/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace sfn {

namespace {

constexpr double kWidth = 640.0, kHeight = 440.0;
constexpr double kLeft = 64.0, kRight = 16.0, kTop = 36.0, kBottom = 48.0;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};

struct Range {
  double lo = 0.0, hi = 1.0;
  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi <= lo) {
      hi = lo + 1.0;
      lo -= 1.0;
    } else {
      const double m = 0.04 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

std::vector<double> nice_ticks(double lo, double hi, int want = 5) {
  const double span = hi - lo;
  if (span <= 0.0) return {lo};
  double step = std::pow(10.0, std::floor(std::log10(span / want)));
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (span / (step * mult) <= want) {
      step *= mult;
      break;
    }
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12 * span;
       t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  }
  return ticks;
}

class SvgCanvas {
 public:
  SvgCanvas(Range xr, Range yr, const PlotOptions& opt)
      : xr_(xr), yr_(yr), opt_(opt) {
    body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
          << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
          << kHeight << "\">\n";
    if (!opt.provenance.empty()) {
      std::string safe = opt.provenance;
      size_t pos = 0;
      while ((pos = safe.find("--", pos)) != std::string::npos) {
        safe.replace(pos, 2, "- -");
      }
      body_ << "<!-- " << safe << " -->\n";
    }
    body_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  double px(double x) const {
    return kLeft + (x - xr_.lo) / (xr_.hi - xr_.lo) * kPlotW;
  }
  double py(double y) const {
    return kTop + kPlotH - (y - yr_.lo) / (yr_.hi - yr_.lo) * kPlotH;
  }

  void axes() {
    body_ << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
          << kPlotW << "\" height=\"" << kPlotH
          << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (double t : nice_ticks(xr_.lo, xr_.hi)) {
      const double x = px(t);
      body_ << "<line x1=\"" << x << "\" y1=\"" << kTop + kPlotH << "\" x2=\""
            << x << "\" y2=\"" << kTop + kPlotH + 5 << "\" stroke=\"#333\"/>\n"
            << "<text x=\"" << x << "\" y=\"" << kTop + kPlotH + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(t)
            << "</text>\n";
    }
    for (double t : nice_ticks(yr_.lo, yr_.hi)) {
      const double y = py(t);
      std::string label = opt_.log_y ? ("1e" + fmt(t)) : fmt(t);
      body_ << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\""
            << kLeft << "\" y2=\"" << y << "\" stroke=\"#333\"/>\n"
            << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << label
            << "</text>\n";
    }
    if (!opt_.title.empty()) {
      body_ << "<text x=\"" << kWidth / 2 << "\" y=\"20\" font-size=\"14\" "
               "text-anchor=\"middle\">"
            << opt_.title << "</text>\n";
    }
    if (!opt_.x_label.empty()) {
      body_ << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"" << kHeight - 10
            << "\" font-size=\"12\" text-anchor=\"middle\">" << opt_.x_label
            << "</text>\n";
    }
    if (!opt_.y_label.empty()) {
      body_ << "<text x=\"16\" y=\"" << kTop + kPlotH / 2
            << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
            << kTop + kPlotH / 2 << ")\">" << opt_.y_label << "</text>\n";
    }
  }

  void polyline(const std::vector<double>& x, const std::vector<double>& y,
                const std::string& color) {
    body_ << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < x.size(); ++i) {
      body_ << px(x[i]) << "," << py(y[i]) << " ";
    }
    body_ << "\"/>\n";
  }

  void dot(double x, double y, const std::string& fill, double r = 3.0) {
    body_ << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"" << r
          << "\" fill=\"" << fill << "\"/>\n";
  }

  void bar(double x0, double x1, double y, const std::string& fill) {
    const double top = py(y);
    body_ << "<rect x=\"" << px(x0) << "\" y=\"" << top << "\" width=\""
          << std::max(0.5, px(x1) - px(x0)) << "\" height=\""
          << std::max(0.0, kTop + kPlotH - top) << "\" fill=\"" << fill
          << "\" stroke=\"#333\" stroke-width=\"0.4\"/>\n";
  }

  void legend(const std::vector<std::string>& labels) {
    double y = kTop + 14.0;
    for (size_t s = 0; s < labels.size(); ++s) {
      if (labels[s].empty()) continue;
      const char* color = kPalette[s % 6];
      body_ << "<line x1=\"" << kLeft + 10 << "\" y1=\"" << y << "\" x2=\""
            << kLeft + 34 << "\" y2=\"" << y << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << kLeft + 40 << "\" y=\"" << y + 4
            << "\" font-size=\"11\">" << labels[s] << "</text>\n";
      y += 16.0;
    }
  }

  void save(const std::string& path) {
    body_ << "</svg>\n";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << body_.str();
  }

 private:
  Range xr_, yr_;
  PlotOptions opt_;
  std::ostringstream body_;
};

double maybe_log(double v, bool log_y) {
  return log_y ? std::log10(v) : v;
}

}  // namespace

void write_line_plot(const std::string& path,
                     const std::vector<PlotSeries>& series,
                     const PlotOptions& options) {
  Range xr{std::numeric_limits<double>::max(),
           std::numeric_limits<double>::lowest()};
  Range yr = xr;
  std::vector<PlotSeries> drawn;
  for (const PlotSeries& s : series) {
    PlotSeries d;
    d.label = s.label;
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (options.log_y && s.y[i] <= 0.0) continue;
      d.x.push_back(s.x[i]);
      d.y.push_back(maybe_log(s.y[i], options.log_y));
      xr.expand(d.x.back());
      yr.expand(d.y.back());
    }
    drawn.push_back(std::move(d));
  }
  if (xr.lo > xr.hi) {  // nothing drawable
    xr = {0.0, 1.0};
    yr = {0.0, 1.0};
  }
  xr.pad();
  yr.pad();
  SvgCanvas canvas(xr, yr, options);
  canvas.axes();
  std::vector<std::string> labels;
  for (size_t s = 0; s < drawn.size(); ++s) {
    canvas.polyline(drawn[s].x, drawn[s].y, kPalette[s % 6]);
    labels.push_back(drawn[s].label);
  }
  canvas.legend(labels);
  canvas.save(path);
}

void write_scatter_plot(const std::string& path,
                        const std::vector<ShadedPoint>& points,
                        const PlotOptions& options) {
  Range xr{std::numeric_limits<double>::max(),
           std::numeric_limits<double>::lowest()};
  Range yr = xr;
  for (const ShadedPoint& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
    if (options.log_y && p.y <= 0.0) continue;
    xr.expand(p.x);
    yr.expand(maybe_log(p.y, options.log_y));
  }
  if (xr.lo > xr.hi) {
    xr = {0.0, 1.0};
    yr = {0.0, 1.0};
  }
  xr.pad();
  yr.pad();
  SvgCanvas canvas(xr, yr, options);
  canvas.axes();
  for (const ShadedPoint& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
    if (options.log_y && p.y <= 0.0) continue;
    const int level =
        static_cast<int>(std::clamp(p.shade, 0.0, 1.0) * 200.0);
    std::ostringstream fill;
    fill << "rgb(" << level << "," << level << "," << level << ")";
    canvas.dot(p.x, maybe_log(p.y, options.log_y), fill.str());
  }
  canvas.save(path);
}

void write_histogram_plot(const std::string& path, const Histogram& histogram,
                          const PlotOptions& options) {
  require(!histogram.counts.empty(), "empty histogram");
  const bool use_log = !histogram.log_counts.empty();
  Range xr{histogram.edges(0), histogram.edges(histogram.edges.size() - 1)};
  Range yr{0.0, 0.0};
  for (size_t b = 0; b < histogram.counts.size(); ++b) {
    yr.expand(use_log ? histogram.log_counts[b]
                      : static_cast<double>(histogram.counts[b]));
  }
  xr.pad();
  yr.pad();
  yr.lo = 0.0;
  PlotOptions opt = options;
  if (use_log && opt.y_label.empty()) opt.y_label = "log10(count + 1)";
  SvgCanvas canvas(xr, yr, opt);
  canvas.axes();
  for (size_t b = 0; b < histogram.counts.size(); ++b) {
    const double y = use_log ? histogram.log_counts[b]
                             : static_cast<double>(histogram.counts[b]);
    canvas.bar(histogram.edges(static_cast<Index>(b)),
               histogram.edges(static_cast<Index>(b) + 1), y, "#7a9cc6");
  }
  canvas.save(path);
}

}  // namespace sfn
