#include "assignkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace assignkit {

Box::Box(double x1_, double y1_, double x2_, double y2_)
    : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
  if (!(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
        std::isfinite(y2))) {
    throw std::invalid_argument("Box: non-finite coordinate");
  }
  if (!(x2 > x1 && y2 > y1)) {
    throw std::invalid_argument(
        "Box: requires x2 > x1 and y2 > y1, got (" + std::to_string(x1) + "," +
        std::to_string(y1) + "," + std::to_string(x2) + "," +
        std::to_string(y2) + ")");
  }
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double center_distance(const Box& a, const Box& b) {
  const Point ca = a.center();
  const Point cb = b.center();
  const double dx = ca.x - cb.x;
  const double dy = ca.y - cb.y;
  return std::sqrt(dx * dx + dy * dy);
}

bool center_inside(const Box& gt, const Point& p, double margin) {
  const double d = std::min(std::min(p.x - gt.x1, gt.x2 - p.x),
                            std::min(p.y - gt.y1, gt.y2 - p.y));
  return d > margin;
}

Deltas encode(const Box& gt, const Box& anchor) {
  const Point gc = gt.center();
  const Point ac = anchor.center();
  Deltas d;
  d.dx = (gc.x - ac.x) / anchor.width();
  d.dy = (gc.y - ac.y) / anchor.height();
  d.dw = std::log(gt.width() / anchor.width());
  d.dh = std::log(gt.height() / anchor.height());
  return d;
}

Box decode(const Deltas& d, const Box& anchor) {
  const double dw = std::min(d.dw, 4.0);
  const double dh = std::min(d.dh, 4.0);
  const double w = anchor.width();
  const double h = anchor.height();
  const double shift_x = d.dx * w;
  const double shift_y = d.dy * h;
  // Growth relative to the anchor corners; exactly zero when dw/dh are zero.
  const double half_w = 0.5 * (std::exp(dw) - 1.0) * w;
  const double half_h = 0.5 * (std::exp(dh) - 1.0) * h;
  return Box(anchor.x1 + shift_x - half_w, anchor.y1 + shift_y - half_h,
             anchor.x2 + shift_x + half_w, anchor.y2 + shift_y + half_h);
}

std::vector<int> nms(const std::vector<Box>& boxes,
                     const std::vector<double>& scores, double iou_thr) {
  if (boxes.size() != scores.size()) {
    throw std::invalid_argument("nms: boxes and scores length mismatch");
  }
  if (!(iou_thr > 0.0 && iou_thr < 1.0)) {
    throw std::invalid_argument("nms: iou_thr must lie in (0, 1)");
  }
  const int n = static_cast<int>(boxes.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  std::vector<char> suppressed(n, 0);
  std::vector<int> kept;
  for (int i = 0; i < n; ++i) {
    const int idx = order[i];
    if (suppressed[idx]) continue;
    kept.push_back(idx);
    for (int j = i + 1; j < n; ++j) {
      const int other = order[j];
      if (!suppressed[other] && iou(boxes[idx], boxes[other]) > iou_thr) {
        suppressed[other] = 1;
      }
    }
  }
  return kept;
}

}  // namespace assignkit
