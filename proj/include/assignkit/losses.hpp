#ifndef ASSIGNKIT_LOSSES_HPP
#define ASSIGNKIT_LOSSES_HPP

#include <array>

#include "assignkit/geometry.hpp"

namespace assignkit {

enum class ClsLossKind { Focal, Qfl, Vfl };
enum class QualityBranch { None, Centerness, IouScore };

struct LossParams {
  double alpha = 0.25;
  double gamma = 2.0;
  double beta = 2.0;            // qfl exponent
  double smooth_l1_beta = 1.0 / 9.0;
};

/// alpha defaults differ per kind: 0.25 for focal, 0.75 for vfl.
LossParams default_loss_params(ClsLossKind kind);

struct LossConfig {
  ClsLossKind cls_loss = ClsLossKind::Focal;
  QualityBranch quality_branch = QualityBranch::None;
  LossParams params;
};

// Value plus analytic derivatives with respect to the probability and to the
// presigmoid logit (d_dlogit = d_dp * p * (1 - p)).
struct LossEval {
  double value = 0;
  double d_dp = 0;
  double d_dlogit = 0;
};

double sigmoid(double x);

/// Clamps p into [1e-7, 1 - 1e-7] before any log.
double clamp_prob(double p);

// Binary focal loss. y must be exactly 0 or 1.
LossEval focal_loss(double p, double y, double alpha, double gamma);

// Quality focal loss against a soft target y in [0, 1].
LossEval qfl(double p, double y, double beta);

// Varifocal loss: positives (y > 0) weighted by the target itself, negatives
// down-weighted by alpha * p^gamma.
LossEval vfl(double p, double y, double alpha, double gamma);

// Plain binary cross entropy against a soft target, for the quality branch.
LossEval bce(double p, double y);

struct SmoothL1Eval {
  double value = 0;                 // summed over the four components
  std::array<double, 4> grad{};     // d value / d (pred - target) component
};

// Elementwise smooth L1 over the delta difference d = pred - target:
// 0.5 d^2 / beta for |d| < beta, |d| - 0.5 beta otherwise.
SmoothL1Eval smooth_l1(const Deltas& pred, const Deltas& target, double beta);

// Centerness of a point inside gt: sqrt of the product of min/max ratios of
// the distances to the four sides. Errors unless the point is strictly inside.
double centerness_target(const Point& anchor_center, const Box& gt);

// IoU of the decoded prediction with its gt, clamped to [0, 1].
double iou_target(const Box& predicted, const Box& gt);

}  // namespace assignkit

#endif
