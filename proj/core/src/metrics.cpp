#include "mprl/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mprl/error.hpp"

namespace mprl {

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write metrics file: " + path);
  out << "epoch,mode,split,ce_loss,abstract_loss,rl_loss,baseline_loss,accuracy\n";
  for (const MetricsRow& r : rows) {
    out << r.epoch << ',' << r.mode << ',' << r.split << ',' << format_value(r.ce_loss) << ','
        << format_value(r.abstract_loss) << ',' << format_value(r.rl_loss) << ','
        << format_value(r.baseline_loss) << ',' << format_value(r.accuracy) << '\n';
  }
  require(out.good(), ErrorKind::Io, "metrics write failed: " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open metrics file: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Io, "metrics file is empty");
  require(line == "epoch,mode,split,ce_loss,abstract_loss,rl_loss,baseline_loss,accuracy",
          ErrorKind::Io, "metrics file has an unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    MetricsRow r;
    std::getline(ss, field, ',');
    r.epoch = std::stoi(field);
    std::getline(ss, r.mode, ',');
    std::getline(ss, r.split, ',');
    double* slots[] = {&r.ce_loss, &r.abstract_loss, &r.rl_loss, &r.baseline_loss, &r.accuracy};
    for (double* slot : slots) {
      require(static_cast<bool>(std::getline(ss, field, ',')), ErrorKind::Io,
              "metrics file row is short");
      *slot = std::stod(field);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_accuracy_svg(const std::vector<MetricsRow>& rows, const std::string& split,
                        const std::string& path) {
  std::map<std::string, std::vector<std::pair<int, double>>> series;
  int max_epoch = 1;
  for (const MetricsRow& r : rows) {
    if (r.split != split) continue;
    series[r.mode].emplace_back(r.epoch, r.accuracy);
    max_epoch = std::max(max_epoch, r.epoch);
  }
  for (auto& [mode, points] : series) std::sort(points.begin(), points.end());

  const double width = 640, height = 420;
  const double left = 60, right = 20, top = 30, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto x_of = [&](int epoch) {
    return left + (max_epoch > 1 ? plot_w * (epoch - 1) / (max_epoch - 1) : plot_w / 2);
  };
  auto y_of = [&](double acc) { return top + plot_h * (1.0 - acc / 100.0); };

  const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};

  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write svg file: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  for (int pct = 0; pct <= 100; pct += 20) {
    double y = y_of(pct);
    out << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << pct << "</text>\n";
  }
  int tick = std::max(1, max_epoch / 10);
  for (int e = 1; e <= max_epoch; e += tick) {
    double x = x_of(e);
    out << "<line x1=\"" << x << "\" y1=\"" << top + plot_h << "\" x2=\"" << x << "\" y2=\""
        << top + plot_h + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << top + plot_h + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << e << "</text>\n";
  }
  out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";
  out << "<text x=\"16\" y=\"" << top + plot_h / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << top + plot_h / 2 << ")\">accuracy (%)</text>\n";

  int color = 0;
  double legend_y = top + 6;
  for (const auto& [mode, points] : series) {
    const char* stroke = palette[color % 4];
    out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [epoch, acc] : points) out << x_of(epoch) << ',' << y_of(acc) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << left + plot_w - 6 << "\" y=\"" << legend_y
        << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << stroke << "\">" << mode
        << "</text>\n";
    legend_y += 16;
    ++color;
  }
  out << "</svg>\n";
  require(out.good(), ErrorKind::Io, "svg write failed: " + path);
}

}  // namespace mprl
