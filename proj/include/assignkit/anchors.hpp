#ifndef ASSIGNKIT_ANCHORS_HPP
#define ASSIGNKIT_ANCHORS_HPP

#include <vector>

#include "assignkit/geometry.hpp"

namespace assignkit {

struct AnchorConfig {
  std::vector<double> strides{8, 16, 32, 64, 128};
  double scale = 8.0;
  std::vector<double> ratios{1.0};  // height / width

  int anchors_per_location() const { return static_cast<int>(ratios.size()); }
};

// Anchors for one pyramid level, dense over a ceil(W/stride) x ceil(H/stride)
// grid with one box per ratio at each cell center.
struct AnchorLevel {
  double stride = 0;
  int grid_w = 0;
  int grid_h = 0;
  int offset = 0;  // global index of the level's first anchor
  int count = 0;
};

struct AnchorSet {
  std::vector<Box> boxes;  // level-major, cell row-major, ratio-minor
  std::vector<AnchorLevel> levels;
  int num_ratios = 1;

  int size() const { return static_cast<int>(boxes.size()); }
  const Box& box(int global_index) const { return boxes[global_index]; }

  // Global index of the anchor at grid cell (ix, iy) of a level; bijective
  // onto [0, size).
  int flat_index(int level, int ix, int iy, int ratio_index) const;
};

// Anchors are centered at ((i+0.5)*stride, (j+0.5)*stride) with area
// (scale*stride)^2 and are not clipped to the image.
AnchorSet generate_anchors(const AnchorConfig& config, double image_width,
                           double image_height);

}  // namespace assignkit

#endif
