#include "assignkit/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace assignkit {

std::pair<double, double> candidate_stats(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("candidate_stats: empty");
  double sum = 0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double sq = 0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double var = sq / static_cast<double>(values.size() - 1);
  return {mean, std::sqrt(var)};
}

double schedule_weight(WeightSchedule kind, int iteration, int max_iter) {
  if (max_iter <= 0) throw std::invalid_argument("schedule_weight: max_iter must be positive");
  if (iteration < 0 || iteration > max_iter)
    throw std::invalid_argument("schedule_weight: iteration out of range");
  const double t = static_cast<double>(iteration) / static_cast<double>(max_iter);
  switch (kind) {
    case WeightSchedule::Constant: return 1.0;
    case WeightSchedule::DUp: return t;
    case WeightSchedule::DDown: return 1.0 - t;
  }
  throw std::logic_error("schedule_weight: bad kind");
}

std::vector<int> select_candidates(const AnchorSet& anchors, const Box& gt,
                                   int k) {
  if (k <= 0) throw std::invalid_argument("select_candidates: k must be positive");
  std::vector<int> out;
  std::vector<std::pair<double, int>> level_order;
  for (const AnchorLevel& level : anchors.levels) {
    level_order.clear();
    level_order.reserve(static_cast<size_t>(level.count));
    for (int i = level.offset; i < level.offset + level.count; ++i) {
      level_order.emplace_back(center_distance(anchors.boxes[static_cast<size_t>(i)], gt), i);
    }
    const int take = std::min<int>(k, level.count);
    std::partial_sort(level_order.begin(), level_order.begin() + take,
                      level_order.end());
    for (int i = 0; i < take; ++i) out.push_back(level_order[static_cast<size_t>(i)].second);
  }
  return out;
}

CandidateSelection select_positive_candidates(const std::vector<double>& aious,
                                              const std::vector<double>* pious,
                                              double w_p, double w_a) {
  if (aious.empty())
    throw std::invalid_argument("select_positive_candidates: no candidates");
  if (pious != nullptr && pious->size() != aious.size())
    throw std::invalid_argument(
        "select_positive_candidates: aious and pious length mismatch");
  CandidateSelection sel;
  CandidateStats& s = sel.stats;
  s.aious = aious;
  auto [mean_a, std_a] = candidate_stats(aious);
  s.mean_a = mean_a;
  s.std_a = std_a;
  if (pious != nullptr) {
    s.pious = *pious;
    auto [mean_p, std_p] = candidate_stats(*pious);
    s.mean_p = mean_p;
    s.std_p = std_p;
  }
  s.mean_c = w_p * s.mean_p + w_a * s.mean_a;
  s.std_c = w_p * s.std_p + w_a * s.std_a;
  s.threshold = s.mean_c + s.std_c;
  for (size_t i = 0; i < aious.size(); ++i) {
    const double piou = pious != nullptr ? (*pious)[i] : 0.0;
    const double ciou = w_p * piou + w_a * aious[i];
    if (ciou >= s.threshold) sel.selected.push_back(static_cast<int>(i));
  }
  return sel;
}

Assignment assign_fixed(const AnchorSet& anchors, const std::vector<Box>& gts,
                        double pos_thr, double neg_thr) {
  if (neg_thr > pos_thr)
    throw std::invalid_argument("assign_fixed: neg_thr must not exceed pos_thr");
  Assignment out;
  out.labels.assign(static_cast<size_t>(anchors.size()), kLabelNegative);
  out.num_pos.assign(gts.size(), 0);
  if (gts.empty()) return out;
  for (int i = 0; i < anchors.size(); ++i) {
    double best = 0;
    int best_gt = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(anchors.boxes[static_cast<size_t>(i)], gts[g]);
      if (v > best) {
        best = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best >= pos_thr) {
      out.labels[static_cast<size_t>(i)] = best_gt;
      ++out.num_pos[static_cast<size_t>(best_gt)];
    } else if (best >= neg_thr) {
      out.labels[static_cast<size_t>(i)] = kLabelIgnore;
    }
  }
  return out;
}

namespace {

// Shared ATSS skeleton. When preds is null, scoring falls back to anchor IoUs
// alone (w_p = 0, w_a = 1): the iteration-independent rule.
Assignment assign_adaptive(const AnchorSet& anchors,
                           const std::vector<Box>* preds,
                           const std::vector<Box>& gts, int k, double w_p,
                           double w_a) {
  Assignment out;
  out.labels.assign(static_cast<size_t>(anchors.size()), kLabelNegative);
  out.num_pos.assign(gts.size(), 0);
  // scores[i] is the combined IoU that claimed anchor i; a later gt takes the
  // anchor only with a strictly greater score, so ties keep the lower gt.
  std::vector<double> scores(static_cast<size_t>(anchors.size()), 0.0);
  for (size_t g = 0; g < gts.size(); ++g) {
    const Box& gt = gts[g];
    CandidateStats stats;
    stats.candidates = select_candidates(anchors, gt, k);
    stats.aious.reserve(stats.candidates.size());
    for (int idx : stats.candidates)
      stats.aious.push_back(iou(anchors.boxes[static_cast<size_t>(idx)], gt));
    const std::vector<double>* pious_ptr = nullptr;
    if (preds != nullptr) {
      stats.pious.reserve(stats.candidates.size());
      for (int idx : stats.candidates)
        stats.pious.push_back(iou((*preds)[static_cast<size_t>(idx)], gt));
      pious_ptr = &stats.pious;
    }
    CandidateSelection sel =
        select_positive_candidates(stats.aious, pious_ptr, w_p, w_a);
    sel.stats.candidates = std::move(stats.candidates);
    for (int pos : sel.selected) {
      const int idx = sel.stats.candidates[static_cast<size_t>(pos)];
      const Box& anchor = anchors.boxes[static_cast<size_t>(idx)];
      if (!center_inside(gt, anchor.center())) continue;
      const double piou =
          pious_ptr != nullptr ? (*pious_ptr)[static_cast<size_t>(pos)] : 0.0;
      const double score = w_p * piou + w_a * sel.stats.aious[static_cast<size_t>(pos)];
      int& label = out.labels[static_cast<size_t>(idx)];
      if (label >= 0) {
        if (score <= scores[static_cast<size_t>(idx)]) continue;
        --out.num_pos[static_cast<size_t>(label)];
      }
      label = static_cast<int>(g);
      scores[static_cast<size_t>(idx)] = score;
      ++out.num_pos[g];
    }
    out.stats.push_back(std::move(sel.stats));
  }
  return out;
}

}  // namespace

Assignment assign_atss(const AnchorSet& anchors, const std::vector<Box>& gts,
                       int k) {
  return assign_adaptive(anchors, nullptr, gts, k, 0.0, 1.0);
}

Assignment assign_dynamic_atss(const AnchorSet& anchors,
                               const std::vector<Box>& predicted_boxes,
                               const std::vector<Box>& gts,
                               const AssignerConfig& config, int iteration,
                               int max_iter) {
  if (static_cast<int>(predicted_boxes.size()) != anchors.size())
    throw std::invalid_argument(
        "assign_dynamic_atss: predicted_boxes must align with the anchor set (" +
        std::to_string(predicted_boxes.size()) + " vs " +
        std::to_string(anchors.size()) + ")");
  const double w_p =
      config.w_p * schedule_weight(config.schedule_p, iteration, max_iter);
  const double w_a =
      config.w_a * schedule_weight(config.schedule_a, iteration, max_iter);
  return assign_adaptive(anchors, &predicted_boxes, gts, config.k, w_p, w_a);
}

}  // namespace assignkit
