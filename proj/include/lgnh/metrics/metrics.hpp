#pragma once

#include <cstdint>
#include <vector>

#include "lgnh/core/raster.hpp"

namespace lgnh::metrics {

struct MatchPair {
  std::int32_t gt = 0;
  std::int32_t pred = 0;
  std::int64_t intersection = 0;
  std::int64_t union_area = 0;
  double iou = 0.0;
};

/// Overlaps between ground-truth and predicted instances.
struct MatchTable {
  /// Every overlapping (gt, pred) pair, sorted by (gt, pred).
  std::vector<MatchPair> pairs;
  /// Area by label; labels absent from a mask have area 0.
  std::vector<std::int64_t> gt_area;
  std::vector<std::int64_t> pred_area;
  /// Labels without any IoU > 0.5 partner.
  std::vector<std::int32_t> unmatched_gt;
  std::vector<std::int32_t> unmatched_pred;
};

MatchTable match_instances(const InstanceMask& gt, const InstanceMask& pred);

struct EvalReport {
  double dice = 0.0;
  double f1 = 0.0;
  double aji = 0.0;
  double pq = 0.0;
  double dq = 0.0;
  double sq = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct PanopticQuality {
  double pq = 0.0;
  double dq = 0.0;
  double sq = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

double dice(const InstanceMask& gt, const InstanceMask& pred);
double aji(const InstanceMask& gt, const InstanceMask& pred);
PanopticQuality pq(const InstanceMask& gt, const InstanceMask& pred);
double f1_detect(const InstanceMask& gt, const InstanceMask& pred);
EvalReport evaluate(const InstanceMask& gt, const InstanceMask& pred);

}  // namespace lgnh::metrics
