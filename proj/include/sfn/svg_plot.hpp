#ifndef SFN_SVG_PLOT_HPP
#define SFN_SVG_PLOT_HPP

#include <string>
#include <vector>

#include "sfn/analysis.hpp"

namespace sfn {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;      // log10 axis; non-positive values are dropped
  std::string provenance;  // embedded as an XML comment
};

struct ShadedPoint {
  double x = 0.0;
  double y = 0.0;
  double shade = 0.0;  // 0 = black .. 1 = light gray
};

// Self-contained SVG files; everything plotted also exists in an emitted
// CSV, so the plots are disposable views.
void write_line_plot(const std::string& path,
                     const std::vector<PlotSeries>& series,
                     const PlotOptions& options);

void write_scatter_plot(const std::string& path,
                        const std::vector<ShadedPoint>& points,
                        const PlotOptions& options);

void write_histogram_plot(const std::string& path, const Histogram& histogram,
                          const PlotOptions& options);

}  // namespace sfn

#endif
