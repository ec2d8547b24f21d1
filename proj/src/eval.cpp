#include "spazer/eval.hpp"

#include "spazer/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <sstream>

using nsjson = nlohmann::json;

namespace spazer {

double iou_aabb(const Aabb3& a, const Aabb3& b) {
  const Vec3 lo = a.min().cwiseMax(b.min());
  const Vec3 hi = a.max().cwiseMin(b.max());
  const Vec3 overlap = (hi - lo).cwiseMax(0.0);
  const double inter = overlap.x() * overlap.y() * overlap.z();
  // volumes via the same max-min arithmetic so iou(a, a) is exactly 1
  const Vec3 ea = a.max() - a.min();
  const Vec3 eb = b.max() - b.min();
  const double uni = ea.x() * ea.y() * ea.z() + eb.x() * eb.y() * eb.z() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

MetricBucket summarize(const std::vector<const EvalRecord*>& recs,
                       const std::vector<double>& thresholds) {
  MetricBucket b;
  b.count = static_cast<int>(recs.size());
  for (double t : thresholds) b.acc_at[t] = 0.0;

  int correct = 0;
  for (const EvalRecord* r : recs) {
    if (r->iou) {
      ++b.iou_count;
      for (double t : thresholds)
        if (*r->iou >= t) b.acc_at[t] += 1.0;
    }
    if (r->correct_selection) {
      ++b.selection_count;
      if (*r->correct_selection) ++correct;
    }
  }
  for (double t : thresholds)
    b.acc_at[t] = b.iou_count > 0 ? b.acc_at[t] / b.iou_count : 0.0;
  b.selection_accuracy = b.selection_count > 0
                             ? static_cast<double>(correct) / b.selection_count
                             : 0.0;
  return b;
}

nsjson bucket_json(const MetricBucket& b) {
  nsjson j;
  j["count"] = b.count;
  j["iou_count"] = b.iou_count;
  j["selection_count"] = b.selection_count;
  j["selection_accuracy"] = b.selection_accuracy;
  for (const auto& [t, v] : b.acc_at) {
    char key[32];
    std::snprintf(key, sizeof(key), "acc@%.2f", t);
    j[key] = v;
  }
  return j;
}

}  // namespace

nsjson AccuracyReport::to_json() const {
  nsjson j;
  j["overall"] = bucket_json(overall);
  j["splits"] = nsjson::object();
  for (const auto& [name, bucket] : per_split) j["splits"][name] = bucket_json(bucket);
  j["thresholds"] = thresholds;
  return j;
}

std::string AccuracyReport::to_text() const {
  std::ostringstream os;
  auto row = [&](const std::string& name, const MetricBucket& b) {
    char line[256];
    std::string accs;
    for (const auto& [t, v] : b.acc_at) {
      char cell[64];
      std::snprintf(cell, sizeof(cell), "  acc@%.2f %6.3f", t, v);
      accs += cell;
    }
    std::snprintf(line, sizeof(line), "%-12s n=%-5d%s  sel_acc %6.3f (n=%d)\n",
                  name.c_str(), b.count, accs.c_str(), b.selection_accuracy,
                  b.selection_count);
    os << line;
  };
  row("overall", overall);
  for (const auto& [name, bucket] : per_split) row(name, bucket);
  return os.str();
}

AccuracyReport accuracy_report(const std::vector<EvalRecord>& records,
                               const std::vector<double>& thresholds) {
  if (records.empty()) throw EmptyRecords("accuracy_report on empty record list");

  AccuracyReport rep;
  rep.thresholds = thresholds;

  std::vector<const EvalRecord*> all;
  all.reserve(records.size());
  std::map<std::string, std::vector<const EvalRecord*>> by_split;
  for (const EvalRecord& r : records) {
    all.push_back(&r);
    for (const std::string& s : r.splits) by_split[s].push_back(&r);
  }
  rep.overall = summarize(all, thresholds);
  for (const auto& [name, recs] : by_split) rep.per_split[name] = summarize(recs, thresholds);
  return rep;
}

}  // namespace spazer
