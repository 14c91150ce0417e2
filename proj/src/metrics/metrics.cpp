#include "lgnh/metrics/metrics.hpp"

#include <algorithm>
#include <map>

namespace lgnh::metrics {

MatchTable match_instances(const InstanceMask& gt, const InstanceMask& pred) {
  require_same_shape(gt, pred, "ground truth vs prediction");
  MatchTable t;
  t.gt_area.assign(static_cast<std::size_t>(std::max(0, gt.max_label())) + 1, 0);
  t.pred_area.assign(static_cast<std::size_t>(std::max(0, pred.max_label())) + 1, 0);
  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> inter;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    const auto g = gt[i], p = pred[i];
    if (g > 0) ++t.gt_area[g];
    if (p > 0) ++t.pred_area[p];
    if (g > 0 && p > 0) ++inter[{g, p}];
  }
  std::vector<std::uint8_t> gt_hit(t.gt_area.size(), 0), pred_hit(t.pred_area.size(), 0);
  for (const auto& [key, count] : inter) {
    MatchPair m;
    m.gt = key.first;
    m.pred = key.second;
    m.intersection = count;
    m.union_area = t.gt_area[m.gt] + t.pred_area[m.pred] - count;
    m.iou = static_cast<double>(count) / static_cast<double>(m.union_area);
    if (m.iou > 0.5) gt_hit[m.gt] = pred_hit[m.pred] = 1;
    t.pairs.push_back(m);
  }
  for (std::size_t l = 1; l < t.gt_area.size(); ++l) {
    if (t.gt_area[l] > 0 && !gt_hit[l]) t.unmatched_gt.push_back(static_cast<std::int32_t>(l));
  }
  for (std::size_t l = 1; l < t.pred_area.size(); ++l) {
    if (t.pred_area[l] > 0 && !pred_hit[l]) t.unmatched_pred.push_back(static_cast<std::int32_t>(l));
  }
  return t;
}

double dice(const InstanceMask& gt, const InstanceMask& pred) {
  require_same_shape(gt, pred, "ground truth vs prediction");
  std::int64_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    const bool g = gt[i] > 0, p = pred[i] > 0;
    a += g;
    b += p;
    both += g && p;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

namespace {

double aji_from(const MatchTable& t) {
  std::vector<std::uint8_t> used(t.pred_area.size(), 0);
  std::int64_t inter = 0, uni = 0;
  std::size_t k = 0;
  for (std::size_t g = 1; g < t.gt_area.size(); ++g) {
    if (t.gt_area[g] == 0) continue;
    while (k < t.pairs.size() && t.pairs[k].gt < static_cast<std::int32_t>(g)) ++k;
    const MatchPair* best = nullptr;
    for (std::size_t j = k; j < t.pairs.size() && t.pairs[j].gt == static_cast<std::int32_t>(g); ++j) {
      const auto& m = t.pairs[j];
      if (used[m.pred]) continue;
      // Pairs are in ascending pred order, so ">" keeps the lower label on ties.
      if (!best || m.iou > best->iou) best = &m;
    }
    if (best) {
      used[best->pred] = 1;
      inter += best->intersection;
      uni += best->union_area;
    } else {
      uni += t.gt_area[g];
    }
  }
  for (std::size_t p = 1; p < t.pred_area.size(); ++p) {
    if (!used[p]) uni += t.pred_area[p];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PanopticQuality pq_from(const MatchTable& t) {
  PanopticQuality q;
  double iou_sum = 0.0;
  for (const auto& m : t.pairs) {
    if (m.iou > 0.5) {
      ++q.tp;
      iou_sum += m.iou;
    }
  }
  std::int64_t n_gt = 0, n_pred = 0;
  for (std::size_t l = 1; l < t.gt_area.size(); ++l) n_gt += t.gt_area[l] > 0;
  for (std::size_t l = 1; l < t.pred_area.size(); ++l) n_pred += t.pred_area[l] > 0;
  q.fn = n_gt - q.tp;
  q.fp = n_pred - q.tp;
  if (n_gt == 0 && n_pred == 0) {
    q.pq = q.dq = q.sq = 1.0;
    return q;
  }
  q.dq = static_cast<double>(q.tp) / (static_cast<double>(q.tp) + 0.5 * static_cast<double>(q.fp + q.fn));
  q.sq = q.tp > 0 ? iou_sum / static_cast<double>(q.tp) : 1.0;
  q.pq = q.dq * q.sq;
  return q;
}

double f1_from(const PanopticQuality& q) {
  const auto denom = 2 * q.tp + q.fp + q.fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(q.tp) / static_cast<double>(denom);
}

}  // namespace

double aji(const InstanceMask& gt, const InstanceMask& pred) { return aji_from(match_instances(gt, pred)); }

PanopticQuality pq(const InstanceMask& gt, const InstanceMask& pred) { return pq_from(match_instances(gt, pred)); }

double f1_detect(const InstanceMask& gt, const InstanceMask& pred) { return f1_from(pq(gt, pred)); }

EvalReport evaluate(const InstanceMask& gt, const InstanceMask& pred) {
  const auto t = match_instances(gt, pred);
  const auto q = pq_from(t);
  EvalReport r;
  r.dice = dice(gt, pred);
  r.aji = aji_from(t);
  r.pq = q.pq;
  r.dq = q.dq;
  r.sq = q.sq;
  r.tp = q.tp;
  r.fp = q.fp;
  r.fn = q.fn;
  r.f1 = f1_from(q);
  return r;
}

}  // namespace lgnh::metrics
