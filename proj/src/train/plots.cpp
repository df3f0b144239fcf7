#include "convmamba/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace convmamba {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string SvgLinePlot(const std::string& title, const std::string& x_label,
                        const std::string& y_label, const std::vector<PlotSeries>& series) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << Escape(title) << "</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    svg << "<text x=\"" << px(fx) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << Num(fx) << "</text>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << Num(fy) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\" font-size=\"13\">" << Escape(x_label) << "</text>\n"
      << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\""
      << " transform=\"rotate(-90 16 " << kTop + ph / 2 << ")\">" << Escape(y_label)
      << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      svg << Num(px(s.x[i])) << ',' << Num(py(s.y[i])) << ' ';
    }
    svg << "\"/>\n";
    const double ly = kTop + 16 + 18.0 * static_cast<double>(k);
    svg << "<line x1=\"" << kLeft + pw - 130 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw - 110
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kLeft + pw - 104 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
        << Escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string LossPlot(const TrainLog& log) {
  PlotSeries train{"train", {}, {}}, val{"validation", {}, {}};
  for (const auto& r : log.rows) {
    train.x.push_back(static_cast<double>(r.epoch));
    train.y.push_back(r.train_loss);
    val.x.push_back(static_cast<double>(r.epoch));
    val.y.push_back(r.val_loss);
  }
  return SvgLinePlot("Training and validation loss", "epoch", "loss", {train, val});
}

std::string AccuracyPlot(const TrainLog& log) {
  PlotSeries train{"train", {}, {}}, val{"validation", {}, {}};
  for (const auto& r : log.rows) {
    train.x.push_back(static_cast<double>(r.epoch));
    train.y.push_back(r.train_acc);
    val.x.push_back(static_cast<double>(r.epoch));
    val.y.push_back(r.val_acc);
  }
  return SvgLinePlot("Training and validation accuracy", "epoch", "accuracy", {train, val});
}

std::string RocPlot(const std::vector<RocPoint>& roc, double auc) {
  PlotSeries curve{"ROC (AUC " + Num(auc) + ")", {}, {}};
  for (const auto& p : roc) {
    curve.x.push_back(p.fpr);
    curve.y.push_back(p.tpr);
  }
  PlotSeries chance{"chance", {0.0, 1.0}, {0.0, 1.0}};
  return SvgLinePlot("ROC curve", "false positive rate", "true positive rate", {curve, chance});
}

}  // namespace convmamba
