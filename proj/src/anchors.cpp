#include "assignkit/anchors.hpp"

#include <cmath>
#include <stdexcept>

namespace assignkit {

int AnchorSet::flat_index(int level, int ix, int iy, int ratio_index) const {
  const AnchorLevel& lvl = levels.at(level);
  if (ix < 0 || ix >= lvl.grid_w || iy < 0 || iy >= lvl.grid_h ||
      ratio_index < 0 || ratio_index >= num_ratios) {
    throw std::out_of_range("flat_index: cell or ratio out of range");
  }
  return lvl.offset + (iy * lvl.grid_w + ix) * num_ratios + ratio_index;
}

AnchorSet generate_anchors(const AnchorConfig& config, double image_width,
                           double image_height) {
  if (!(image_width > 0 && image_height > 0)) {
    throw std::invalid_argument("generate_anchors: image size must be positive");
  }
  if (config.strides.empty() || config.ratios.empty()) {
    throw std::invalid_argument("generate_anchors: need strides and ratios");
  }
  double prev = 0;
  for (double s : config.strides) {
    if (!(s > prev)) {
      throw std::invalid_argument(
          "generate_anchors: strides must be positive and strictly increasing");
    }
    prev = s;
  }
  if (!(config.scale > 0)) {
    throw std::invalid_argument("generate_anchors: scale must be positive");
  }
  for (double r : config.ratios) {
    if (!(r > 0)) {
      throw std::invalid_argument("generate_anchors: ratios must be positive");
    }
  }

  AnchorSet set;
  set.num_ratios = config.anchors_per_location();
  int offset = 0;
  for (double stride : config.strides) {
    AnchorLevel lvl;
    lvl.stride = stride;
    lvl.grid_w = static_cast<int>(std::ceil(image_width / stride));
    lvl.grid_h = static_cast<int>(std::ceil(image_height / stride));
    lvl.offset = offset;
    lvl.count = lvl.grid_w * lvl.grid_h * set.num_ratios;

    const double base = config.scale * stride;
    for (int iy = 0; iy < lvl.grid_h; ++iy) {
      for (int ix = 0; ix < lvl.grid_w; ++ix) {
        const double cx = (ix + 0.5) * stride;
        const double cy = (iy + 0.5) * stride;
        for (double r : config.ratios) {
          const double w = base / std::sqrt(r);
          const double h = base * std::sqrt(r);
          set.boxes.emplace_back(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w,
                                 cy + 0.5 * h);
        }
      }
    }
    offset += lvl.count;
    set.levels.push_back(lvl);
  }
  return set;
}

}  // namespace assignkit
