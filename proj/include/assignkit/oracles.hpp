#ifndef ASSIGNKIT_ORACLES_HPP
#define ASSIGNKIT_ORACLES_HPP

#include <vector>

#include "assignkit/anchors.hpp"
#include "assignkit/assignment.hpp"
#include "assignkit/geometry.hpp"

// Brute-force reference implementations, kept deliberately independent of the
// optimized modules: they recompute every geometric quantity from scratch so
// tests (and the oracle-check command) can compare two codepaths that share
// only type definitions.
namespace assignkit::oracle {

// Exact IoU for integer-cornered boxes inside [0, 256]^2, obtained by
// counting unit cells of the intersection and union. Throws when a
// coordinate is fractional or out of range.
double rasterized_iou(const Box& a, const Box& b);

enum class NaiveMode { Atss, Dynamic };

// Plain transcription of adaptive sample selection: per-level k nearest
// candidates, candidate IoU statistics, mean + std threshold, center-inside
// filter, highest-score conflict resolution. Dynamic mode scores candidates
// by w_p * predicted IoU + w_a * anchor IoU with summed statistics.
Assignment naive_assign(const AnchorSet& anchors, const std::vector<Box>& gts,
                        int k, NaiveMode mode,
                        const std::vector<Box>* predicted_boxes = nullptr,
                        double w_p = 1.0, double w_a = 1.0);

/// Central difference (f(p+h) - f(p-h)) / 2h.
template <typename F>
double finite_diff(F&& f, double p, double h) {
  return (f(p + h) - f(p - h)) / (2.0 * h);
}

}  // namespace assignkit::oracle

#endif
