#pragma once

#include <string>
#include <vector>

#include "convmamba/metrics.hpp"
#include "convmamba/trainer.hpp"

namespace convmamba {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Standalone SVG with one polyline per series, axes and a legend. Non-finite
// points are skipped.
std::string SvgLinePlot(const std::string& title, const std::string& x_label,
                        const std::string& y_label, const std::vector<PlotSeries>& series);

std::string LossPlot(const TrainLog& log);
std::string AccuracyPlot(const TrainLog& log);
std::string RocPlot(const std::vector<RocPoint>& roc, double auc);

}  // namespace convmamba
