#include "assignkit/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace assignkit::oracle {

namespace {

int checked_cell_coord(double v) {
  const double r = std::round(v);
  if (r != v)
    throw std::invalid_argument("rasterized_iou: non-integer coordinate " +
                                std::to_string(v));
  if (r < 0 || r > 256)
    throw std::invalid_argument("rasterized_iou: coordinate " +
                                std::to_string(v) + " outside [0, 256]");
  return static_cast<int>(r);
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  return inter / (area_a + area_b - inter);
}

double mean_of(const std::vector<double>& v) {
  double sum = 0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double sample_std_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double sq = 0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(v.size() - 1));
}

}  // namespace

double rasterized_iou(const Box& a, const Box& b) {
  const int ax1 = checked_cell_coord(a.x1), ay1 = checked_cell_coord(a.y1);
  const int ax2 = checked_cell_coord(a.x2), ay2 = checked_cell_coord(a.y2);
  const int bx1 = checked_cell_coord(b.x1), by1 = checked_cell_coord(b.y1);
  const int bx2 = checked_cell_coord(b.x2), by2 = checked_cell_coord(b.y2);
  long inter = 0, uni = 0;
  const int x_lo = std::min(ax1, bx1), x_hi = std::max(ax2, bx2);
  const int y_lo = std::min(ay1, by1), y_hi = std::max(ay2, by2);
  for (int y = y_lo; y < y_hi; ++y) {
    for (int x = x_lo; x < x_hi; ++x) {
      const bool in_a = x >= ax1 && x < ax2 && y >= ay1 && y < ay2;
      const bool in_b = x >= bx1 && x < bx2 && y >= by1 && y < by2;
      if (in_a && in_b) ++inter;
      if (in_a || in_b) ++uni;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Assignment naive_assign(const AnchorSet& anchors, const std::vector<Box>& gts,
                        int k, NaiveMode mode,
                        const std::vector<Box>* predicted_boxes, double w_p,
                        double w_a) {
  if (k <= 0) throw std::invalid_argument("naive_assign: k must be positive");
  if (mode == NaiveMode::Dynamic) {
    if (predicted_boxes == nullptr)
      throw std::invalid_argument("naive_assign: dynamic mode needs predictions");
    if (static_cast<int>(predicted_boxes->size()) != anchors.size())
      throw std::invalid_argument("naive_assign: prediction count mismatch");
  }

  Assignment out;
  out.labels.assign(static_cast<size_t>(anchors.size()), kLabelNegative);
  out.num_pos.assign(gts.size(), 0);
  std::vector<double> claimed_score(static_cast<size_t>(anchors.size()), 0.0);

  for (size_t g = 0; g < gts.size(); ++g) {
    const Box& gt = gts[g];
    CandidateStats stats;

    // Step 1: the k nearest anchors per level by center distance.
    for (const AnchorLevel& level : anchors.levels) {
      std::vector<std::pair<double, int>> dists;
      for (int i = level.offset; i < level.offset + level.count; ++i) {
        const Box& a = anchors.boxes[static_cast<size_t>(i)];
        const double acx = 0.5 * (a.x1 + a.x2);
        const double acy = 0.5 * (a.y1 + a.y2);
        const double gcx = 0.5 * (gt.x1 + gt.x2);
        const double gcy = 0.5 * (gt.y1 + gt.y2);
        const double dx = acx - gcx;
        const double dy = acy - gcy;
        dists.emplace_back(std::sqrt(dx * dx + dy * dy), i);
      }
      std::sort(dists.begin(), dists.end());
      const int take = std::min<int>(k, static_cast<int>(dists.size()));
      for (int i = 0; i < take; ++i)
        stats.candidates.push_back(dists[static_cast<size_t>(i)].second);
    }

    // Step 2: candidate IoUs against the gt (and against predictions).
    for (int idx : stats.candidates)
      stats.aious.push_back(box_iou(anchors.boxes[static_cast<size_t>(idx)], gt));
    if (mode == NaiveMode::Dynamic) {
      for (int idx : stats.candidates)
        stats.pious.push_back(
            box_iou((*predicted_boxes)[static_cast<size_t>(idx)], gt));
    }

    // Step 3: adaptive threshold from mean + standard deviation. Dynamic
    // mode sums the separately computed statistics of both IoU sets.
    stats.mean_a = mean_of(stats.aious);
    stats.std_a = sample_std_of(stats.aious, stats.mean_a);
    if (mode == NaiveMode::Dynamic) {
      stats.mean_p = mean_of(stats.pious);
      stats.std_p = sample_std_of(stats.pious, stats.mean_p);
      stats.mean_c = w_p * stats.mean_p + w_a * stats.mean_a;
      stats.std_c = w_p * stats.std_p + w_a * stats.std_a;
    } else {
      stats.mean_c = 0.0 * stats.mean_p + 1.0 * stats.mean_a;
      stats.std_c = 0.0 * stats.std_p + 1.0 * stats.std_a;
    }
    stats.threshold = stats.mean_c + stats.std_c;

    // Steps 4-5: threshold the combined score, keep centers inside the gt,
    // give contested anchors to the gt with the strictly higher score.
    for (size_t c = 0; c < stats.candidates.size(); ++c) {
      double score;
      if (mode == NaiveMode::Dynamic) {
        score = w_p * stats.pious[c] + w_a * stats.aious[c];
      } else {
        score = 0.0 * 0.0 + 1.0 * stats.aious[c];
      }
      if (score < stats.threshold) continue;
      const int idx = stats.candidates[c];
      const Box& a = anchors.boxes[static_cast<size_t>(idx)];
      const double px = 0.5 * (a.x1 + a.x2);
      const double py = 0.5 * (a.y1 + a.y2);
      const bool inside = px - gt.x1 > 0.01 && gt.x2 - px > 0.01 &&
                          py - gt.y1 > 0.01 && gt.y2 - py > 0.01;
      if (!inside) continue;
      int& label = out.labels[static_cast<size_t>(idx)];
      if (label >= 0) {
        if (score <= claimed_score[static_cast<size_t>(idx)]) continue;
        --out.num_pos[static_cast<size_t>(label)];
      }
      label = static_cast<int>(g);
      claimed_score[static_cast<size_t>(idx)] = score;
      ++out.num_pos[g];
    }
    out.stats.push_back(std::move(stats));
  }
  return out;
}

}  // namespace assignkit::oracle
