#include "assignkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace assignkit {

namespace {

constexpr double kProbEps = 1e-7;

double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// -[y ln p + (1-y) ln(1-p)] and its p-derivative (p-y)/(p(1-p)).
double cross_entropy(double p, double y) {
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

LossEval finish(double value, double d_dp, double p) {
  LossEval e;
  e.value = value;
  e.d_dp = d_dp;
  e.d_dlogit = d_dp * p * (1.0 - p);
  return e;
}

}  // namespace

LossParams default_loss_params(ClsLossKind kind) {
  LossParams params;
  if (kind == ClsLossKind::Vfl) params.alpha = 0.75;
  return params;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_prob(double p) {
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

LossEval focal_loss(double p, double y, double alpha, double gamma) {
  if (y != 0.0 && y != 1.0)
    throw std::invalid_argument("focal_loss: y must be exactly 0 or 1");
  if (alpha < 0 || alpha > 1)
    throw std::invalid_argument("focal_loss: alpha must be in [0, 1]");
  if (gamma < 0) throw std::invalid_argument("focal_loss: gamma must be >= 0");
  p = clamp_prob(p);
  if (y == 1.0) {
    const double q = 1.0 - p;
    const double value = -alpha * std::pow(q, gamma) * std::log(p);
    const double d_dp = alpha * gamma * std::pow(q, gamma - 1.0) * std::log(p) -
                        alpha * std::pow(q, gamma) / p;
    return finish(value, d_dp, p);
  }
  const double value = -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
  const double d_dp =
      -(1.0 - alpha) * (gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p) -
                        std::pow(p, gamma) / (1.0 - p));
  return finish(value, d_dp, p);
}

LossEval qfl(double p, double y, double beta) {
  if (y < 0 || y > 1) throw std::invalid_argument("qfl: y must be in [0, 1]");
  if (beta <= 0) throw std::invalid_argument("qfl: beta must be positive");
  p = clamp_prob(p);
  const double gap = std::abs(y - p);
  const double ce = cross_entropy(p, y);
  const double w = std::pow(gap, beta);
  const double value = w * ce;
  const double dw = gap == 0 ? 0.0
                             : beta * std::pow(gap, beta - 1.0) * sign(p - y);
  const double d_dp = dw * ce + w * (p - y) / (p * (1.0 - p));
  return finish(value, d_dp, p);
}

LossEval vfl(double p, double y, double alpha, double gamma) {
  if (y < 0 || y > 1) throw std::invalid_argument("vfl: y must be in [0, 1]");
  if (alpha < 0 || alpha > 1)
    throw std::invalid_argument("vfl: alpha must be in [0, 1]");
  if (gamma < 0) throw std::invalid_argument("vfl: gamma must be >= 0");
  p = clamp_prob(p);
  if (y > 0) {
    const double value = y * cross_entropy(p, y);
    const double d_dp = y * (p - y) / (p * (1.0 - p));
    return finish(value, d_dp, p);
  }
  const double value = -alpha * std::pow(p, gamma) * std::log(1.0 - p);
  const double d_dp =
      -alpha * gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p) +
      alpha * std::pow(p, gamma) / (1.0 - p);
  return finish(value, d_dp, p);
}

LossEval bce(double p, double y) {
  if (y < 0 || y > 1) throw std::invalid_argument("bce: y must be in [0, 1]");
  p = clamp_prob(p);
  const double value = cross_entropy(p, y);
  const double d_dp = (p - y) / (p * (1.0 - p));
  return finish(value, d_dp, p);
}

SmoothL1Eval smooth_l1(const Deltas& pred, const Deltas& target, double beta) {
  if (beta <= 0) throw std::invalid_argument("smooth_l1: beta must be positive");
  const double diffs[4] = {pred.dx - target.dx, pred.dy - target.dy,
                           pred.dw - target.dw, pred.dh - target.dh};
  SmoothL1Eval out;
  for (int i = 0; i < 4; ++i) {
    const double d = diffs[i];
    const double a = std::abs(d);
    if (a < beta) {
      out.value += 0.5 * d * d / beta;
      out.grad[static_cast<size_t>(i)] = d / beta;
    } else {
      out.value += a - 0.5 * beta;
      out.grad[static_cast<size_t>(i)] = sign(d);
    }
  }
  return out;
}

double centerness_target(const Point& anchor_center, const Box& gt) {
  const double l = anchor_center.x - gt.x1;
  const double r = gt.x2 - anchor_center.x;
  const double t = anchor_center.y - gt.y1;
  const double b = gt.y2 - anchor_center.y;
  if (l <= 0 || r <= 0 || t <= 0 || b <= 0)
    throw std::invalid_argument("centerness_target: point must be strictly inside the box");
  return std::sqrt((std::min(l, r) / std::max(l, r)) *
                   (std::min(t, b) / std::max(t, b)));
}

double iou_target(const Box& predicted, const Box& gt) {
  return std::clamp(iou(predicted, gt), 0.0, 1.0);
}

}  // namespace assignkit
