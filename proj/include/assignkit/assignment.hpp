#ifndef ASSIGNKIT_ASSIGNMENT_HPP
#define ASSIGNKIT_ASSIGNMENT_HPP

#include <utility>
#include <vector>

#include "assignkit/anchors.hpp"
#include "assignkit/geometry.hpp"

namespace assignkit {

enum class AssignerKind { Fixed, Atss, DynamicAtss };
enum class WeightSchedule { Constant, DUp, DDown };

struct AssignerConfig {
  AssignerKind kind = AssignerKind::Atss;
  int k = 9;             // candidates per pyramid level
  double pos_thr = 0.5;  // fixed kind only
  double neg_thr = 0.4;  // fixed kind only
  double w_p = 1.0;      // weight on predicted IoUs
  double w_a = 1.0;      // weight on anchor IoUs
  WeightSchedule schedule_p = WeightSchedule::Constant;
  WeightSchedule schedule_a = WeightSchedule::Constant;
};

// Per-anchor label encoding in Assignment::labels.
inline constexpr int kLabelNegative = -1;
inline constexpr int kLabelIgnore = -2;

// Per-GT candidate diagnostics. For the anchor-only assigner the predicted
// side is absent: pious is empty and mean_p = std_p = 0.
struct CandidateStats {
  std::vector<int> candidates;  // global anchor indices, level-ordered
  std::vector<double> aious;
  std::vector<double> pious;
  double mean_a = 0, std_a = 0;
  double mean_p = 0, std_p = 0;
  double mean_c = 0, std_c = 0;
  double threshold = 0;

  bool operator==(const CandidateStats&) const = default;
};

struct Assignment {
  std::vector<int> labels;  // gt index >= 0, kLabelNegative, kLabelIgnore
  std::vector<CandidateStats> stats;  // one per gt
  std::vector<int> num_pos;           // final positives per gt

  bool operator==(const Assignment&) const = default;
};

/// Mean and sample standard deviation (n-1 divisor, 0 for a singleton).
std::pair<double, double> candidate_stats(const std::vector<double>& values);

/// constant -> 1, d_up -> iteration/max_iter, d_down -> 1 - iteration/max_iter.
double schedule_weight(WeightSchedule kind, int iteration, int max_iter);

// The k anchors with the smallest center distance to gt on each level,
// ties to the lower anchor index; concatenated in level order.
std::vector<int> select_candidates(const AnchorSet& anchors, const Box& gt,
                                   int k);

struct CandidateSelection {
  std::vector<int> selected;  // positions into the candidate list
  CandidateStats stats;
};

// Combined scores ciou_i = w_p*piou_i + w_a*aiou_i thresholded at the summed
// statistics mean_c + std_c; selects every position with ciou >= threshold.
// Pass pious = nullptr (with w_p = 0) for the anchor-only rule.
CandidateSelection select_positive_candidates(const std::vector<double>& aious,
                                              const std::vector<double>* pious,
                                              double w_p, double w_a);

// Fixed-threshold baseline: positive to the argmax-AIoU gt when the max is
// >= pos_thr, negative when it is < neg_thr, ignored in between.
Assignment assign_fixed(const AnchorSet& anchors, const std::vector<Box>& gts,
                        double pos_thr, double neg_thr);

// Adaptive assignment from anchor IoU statistics alone.
Assignment assign_atss(const AnchorSet& anchors, const std::vector<Box>& gts,
                       int k);

// Adaptive assignment on combined predicted + anchor IoUs. predicted_boxes is
// aligned to the anchor set; schedules scale w_p/w_a by the training progress
// iteration/max_iter. The center-inside filter always uses anchor centers.
Assignment assign_dynamic_atss(const AnchorSet& anchors,
                               const std::vector<Box>& predicted_boxes,
                               const std::vector<Box>& gts,
                               const AssignerConfig& config, int iteration,
                               int max_iter);

}  // namespace assignkit

#endif
