#pragma once

#include <string>
#include <vector>

namespace mprl {

/// One row of the training curve: losses averaged over an epoch (or
/// computed forward-only for held-out splits) plus greedy accuracy.
struct MetricsRow {
  int epoch = 0;
  std::string mode;
  std::string split;
  double ce_loss = 0.0;
  double abstract_loss = 0.0;
  double rl_loss = 0.0;
  double baseline_loss = 0.0;
  double accuracy = 0.0;  // percent
};

/// CSV with the fixed header
/// epoch,mode,split,ce_loss,abstract_loss,rl_loss,baseline_loss,accuracy
/// and values printed to 9 significant digits so a reload reproduces the
/// file byte for byte.
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

/// Accuracy-vs-epoch line chart with one polyline per mode, drawn from
/// the rows of the requested split.
void write_accuracy_svg(const std::vector<MetricsRow>& rows, const std::string& split,
                        const std::string& path);

}  // namespace mprl
