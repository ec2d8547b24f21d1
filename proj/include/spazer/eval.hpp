#pragma once

#include "spazer/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spazer {

struct EvalRecord {
  int query_idx = 0;
  std::optional<double> iou;
  std::optional<bool> correct_selection;
  std::vector<std::string> splits;
};

/// Axis-aligned 3D IoU: per-axis overlap clamped at zero.
double iou_aabb(const Aabb3& a, const Aabb3& b);

struct MetricBucket {
  int count = 0;
  std::map<double, double> acc_at;  // threshold -> fraction (iou records only)
  int iou_count = 0;
  double selection_accuracy = 0.0;  // over records carrying a selection
  int selection_count = 0;
};

struct AccuracyReport {
  MetricBucket overall;
  std::map<std::string, MetricBucket> per_split;
  std::vector<double> thresholds;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Acc@t per threshold plus selection accuracy, overall and per split.
/// Throws EmptyRecords.
AccuracyReport accuracy_report(const std::vector<EvalRecord>& records,
                               const std::vector<double>& thresholds = {0.25, 0.5});

}  // namespace spazer
