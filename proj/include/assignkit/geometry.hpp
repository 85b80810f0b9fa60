#ifndef ASSIGNKIT_GEOMETRY_HPP
#define ASSIGNKIT_GEOMETRY_HPP

#include <vector>

namespace assignkit {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Offsets of a box relative to an anchor: center shifts normalized by the
// anchor extent, sizes as log ratios.
struct Deltas {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;
};

// Axis-aligned rectangle, corner convention (x1,y1,x2,y2) with x2 > x1 and
// y2 > y1. Construction rejects degenerate or inverted boxes.
struct Box {
  double x1, y1, x2, y2;

  Box(double x1_, double y1_, double x2_, double y2_);

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return (x2 - x1) * (y2 - y1); }
  Point center() const { return {0.5 * (x1 + x2), 0.5 * (y1 + y2)}; }
};

/// Intersection over union, in [0, 1].
double iou(const Box& a, const Box& b);

/// Euclidean distance between box centers.
double center_distance(const Box& a, const Box& b);

/// True iff p lies strictly inside gt, more than margin away from every side.
bool center_inside(const Box& gt, const Point& p, double margin = 0.01);

Deltas encode(const Box& gt, const Box& anchor);

// Inverse of encode; dw/dh are clamped to <= 4.0 before exponentiation.
// Zero deltas reproduce the anchor exactly.
Box decode(const Deltas& d, const Box& anchor);

/// Greedy NMS. Returns kept indices in descending score order, ties going to
/// the lower index; candidates with IoU > iou_thr against a kept box are
/// suppressed.
std::vector<int> nms(const std::vector<Box>& boxes,
                     const std::vector<double>& scores, double iou_thr);

}  // namespace assignkit

#endif
