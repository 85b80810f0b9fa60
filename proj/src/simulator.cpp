#include "assignkit/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

namespace assignkit {

namespace {

constexpr int kPlacementAttempts = 100;
constexpr double kSlenderAspectLo = 3.2;
constexpr double kSlenderAspectHi = 5.0;

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(std::log(lo), std::log(hi));
  return std::exp(dist(rng));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

void validate_scene_spec(const SceneSpec& spec) {
  if (spec.image_width <= 0 || spec.image_height <= 0)
    throw std::invalid_argument("scene: image dimensions must be positive");
  if (spec.num_gts_min < 0 || spec.num_gts_max < spec.num_gts_min)
    throw std::invalid_argument("scene: invalid num_gts range");
  if (spec.size_min <= 0 || spec.size_max < spec.size_min)
    throw std::invalid_argument("scene: invalid size range");
  if (spec.aspect_min <= 0 || spec.aspect_max < spec.aspect_min)
    throw std::invalid_argument("scene: invalid aspect range");
  if (spec.num_classes < 1)
    throw std::invalid_argument("scene: num_classes must be >= 1");
  if (spec.slender_fraction < 0 || spec.slender_fraction > 1)
    throw std::invalid_argument("scene: slender_fraction must be in [0, 1]");
}

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t scene_seed,
                       std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(master) ^ scene_seed) ^ index);
}

Scene generate_scene(const SceneSpec& spec) {
  validate_scene_spec(spec);
  std::mt19937_64 rng(spec.seed);
  const double W = spec.image_width;
  const double H = spec.image_height;
  std::uniform_int_distribution<int> count_dist(spec.num_gts_min,
                                                spec.num_gts_max);
  std::uniform_int_distribution<int> class_dist(0, spec.num_classes - 1);
  std::bernoulli_distribution slender_dist(spec.slender_fraction);
  std::bernoulli_distribution flip_dist(0.5);
  const int count = count_dist(rng);
  Scene scene;
  scene.reserve(static_cast<size_t>(count));
  for (int g = 0; g < count; ++g) {
    const int class_id = class_dist(rng);
    const bool slender = slender_dist(rng);
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const double size = log_uniform(rng, spec.size_min, spec.size_max);
      double aspect;
      if (slender) {
        aspect = log_uniform(rng, kSlenderAspectLo, kSlenderAspectHi);
        if (flip_dist(rng)) aspect = 1.0 / aspect;
      } else {
        aspect = log_uniform(rng, spec.aspect_min, spec.aspect_max);
      }
      const double w = size / std::sqrt(aspect);
      const double h = size * std::sqrt(aspect);
      if (w > W || h > H) continue;
      std::uniform_real_distribution<double> cx_dist(0.5 * w, W - 0.5 * w);
      std::uniform_real_distribution<double> cy_dist(0.5 * h, H - 0.5 * h);
      const double cx = cx_dist(rng);
      const double cy = cy_dist(rng);
      Box box(std::max(0.0, cx - 0.5 * w), std::max(0.0, cy - 0.5 * h),
              std::min(W, cx + 0.5 * w), std::min(H, cy + 0.5 * h));
      scene.push_back({box, class_id});
      placed = true;
    }
    if (!placed)
      throw std::runtime_error(
          "generate_scene: no in-image placement found after " +
          std::to_string(kPlacementAttempts) + " attempts; ranges infeasible");
  }
  return scene;
}

SimState make_sim_state(int num_anchors, int num_classes, int max_iter,
                        double learning_rate) {
  if (num_anchors < 0) throw std::invalid_argument("make_sim_state: bad anchor count");
  if (num_classes < 1) throw std::invalid_argument("make_sim_state: num_classes must be >= 1");
  if (max_iter < 0) throw std::invalid_argument("make_sim_state: max_iter must be >= 0");
  if (!std::isfinite(learning_rate) || learning_rate < 0)
    throw std::invalid_argument("make_sim_state: bad learning_rate");
  SimState state;
  state.deltas.assign(static_cast<size_t>(num_anchors), Deltas{});
  state.cls_logits.assign(static_cast<size_t>(num_anchors) *
                              static_cast<size_t>(num_classes),
                          -4.0);
  state.quality_logits.assign(static_cast<size_t>(num_anchors), 0.0);
  state.num_classes = num_classes;
  state.max_iter = max_iter;
  state.learning_rate = learning_rate;
  return state;
}

MetricsRecord train_step(SimState& state, const Scene& scene,
                         const AnchorSet& anchors,
                         const AssignerConfig& assigner,
                         const LossConfig& losses) {
  const int n = anchors.size();
  if (static_cast<int>(state.deltas.size()) != n ||
      static_cast<int>(state.quality_logits.size()) != n ||
      state.cls_logits.size() !=
          static_cast<size_t>(n) * static_cast<size_t>(state.num_classes))
    throw std::invalid_argument("train_step: state does not match anchor set");
  for (const GroundTruth& gt : scene)
    if (gt.class_id < 0 || gt.class_id >= state.num_classes)
      throw std::invalid_argument("train_step: gt class out of range");

  std::vector<Box> preds;
  preds.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    try {
      preds.push_back(decode(state.deltas[static_cast<size_t>(i)],
                             anchors.boxes[static_cast<size_t>(i)]));
    } catch (const std::invalid_argument&) {
      throw numeric_error("train_step: decoded box collapsed at anchor " +
                          std::to_string(i));
    }
  }
  std::vector<Box> gt_boxes;
  gt_boxes.reserve(scene.size());
  for (const GroundTruth& gt : scene) gt_boxes.push_back(gt.box);

  Assignment asn;
  switch (assigner.kind) {
    case AssignerKind::Fixed:
      asn = assign_fixed(anchors, gt_boxes, assigner.pos_thr, assigner.neg_thr);
      break;
    case AssignerKind::Atss:
      asn = assign_atss(anchors, gt_boxes, assigner.k);
      break;
    case AssignerKind::DynamicAtss:
      asn = assign_dynamic_atss(anchors, preds, gt_boxes, assigner,
                                state.iteration, state.max_iter);
      break;
  }

  int num_pos = 0;
  for (int label : asn.labels)
    if (label >= 0) ++num_pos;
  const double norm = static_cast<double>(std::max(num_pos, 1));
  const LossParams& params = losses.params;

  std::vector<double> grad_cls(state.cls_logits.size(), 0.0);
  std::vector<Deltas> grad_deltas(static_cast<size_t>(n), Deltas{});
  std::vector<double> grad_quality(static_cast<size_t>(n), 0.0);
  double cls_sum = 0, reg_sum = 0, quality_sum = 0, pos_iou_sum = 0;

  for (int i = 0; i < n; ++i) {
    const int label = asn.labels[static_cast<size_t>(i)];
    if (label == kLabelIgnore) continue;
    double piou = 0;
    if (label >= 0) {
      piou = iou(preds[static_cast<size_t>(i)],
                 gt_boxes[static_cast<size_t>(label)]);
      pos_iou_sum += piou;
    }
    for (int c = 0; c < state.num_classes; ++c) {
      const size_t slot = static_cast<size_t>(i) *
                              static_cast<size_t>(state.num_classes) +
                          static_cast<size_t>(c);
      const double p = sigmoid(state.cls_logits[slot]);
      const bool is_target =
          label >= 0 && scene[static_cast<size_t>(label)].class_id == c;
      LossEval e;
      switch (losses.cls_loss) {
        case ClsLossKind::Focal:
          e = focal_loss(p, is_target ? 1.0 : 0.0, params.alpha, params.gamma);
          break;
        case ClsLossKind::Qfl:
          e = qfl(p, is_target ? piou : 0.0, params.beta);
          break;
        case ClsLossKind::Vfl:
          e = vfl(p, is_target ? piou : 0.0, params.alpha, params.gamma);
          break;
      }
      cls_sum += e.value;
      grad_cls[slot] = e.d_dlogit / norm;
    }
    if (label >= 0) {
      const Box& gt = gt_boxes[static_cast<size_t>(label)];
      const Box& anchor = anchors.boxes[static_cast<size_t>(i)];
      const Deltas target = encode(gt, anchor);
      const SmoothL1Eval se =
          smooth_l1(state.deltas[static_cast<size_t>(i)], target,
                    params.smooth_l1_beta);
      reg_sum += se.value;
      grad_deltas[static_cast<size_t>(i)] = {se.grad[0] / norm,
                                             se.grad[1] / norm,
                                             se.grad[2] / norm,
                                             se.grad[3] / norm};
      if (losses.quality_branch != QualityBranch::None) {
        const double target_q =
            losses.quality_branch == QualityBranch::Centerness
                ? centerness_target(anchor.center(), gt)
                : iou_target(preds[static_cast<size_t>(i)], gt);
        const double pq = sigmoid(state.quality_logits[static_cast<size_t>(i)]);
        const LossEval qe = bce(pq, target_q);
        quality_sum += qe.value;
        grad_quality[static_cast<size_t>(i)] = qe.d_dlogit / norm;
      }
    }
  }

  const double lr = state.learning_rate;
  for (int i = 0; i < n; ++i) {
    const Deltas& gd = grad_deltas[static_cast<size_t>(i)];
    const double gq = grad_quality[static_cast<size_t>(i)];
    bool finite = std::isfinite(gd.dx) && std::isfinite(gd.dy) &&
                  std::isfinite(gd.dw) && std::isfinite(gd.dh) &&
                  std::isfinite(gq);
    for (int c = 0; finite && c < state.num_classes; ++c)
      finite = std::isfinite(grad_cls[static_cast<size_t>(i) *
                                          static_cast<size_t>(state.num_classes) +
                                      static_cast<size_t>(c)]);
    if (!finite)
      throw numeric_error("train_step: non-finite gradient at anchor " +
                          std::to_string(i));
    Deltas& d = state.deltas[static_cast<size_t>(i)];
    d.dx -= lr * gd.dx;
    d.dy -= lr * gd.dy;
    d.dw -= lr * gd.dw;
    d.dh -= lr * gd.dh;
    state.quality_logits[static_cast<size_t>(i)] -= lr * gq;
    for (int c = 0; c < state.num_classes; ++c) {
      const size_t slot = static_cast<size_t>(i) *
                              static_cast<size_t>(state.num_classes) +
                          static_cast<size_t>(c);
      state.cls_logits[slot] -= lr * grad_cls[slot];
    }
  }

  MetricsRecord rec;
  rec.iteration = state.iteration;
  rec.cls_loss = cls_sum / norm;
  rec.reg_loss = reg_sum / norm;
  rec.quality_loss = quality_sum / norm;
  rec.total_loss = rec.cls_loss + rec.reg_loss + rec.quality_loss;
  rec.num_pos = num_pos;
  rec.mean_pos_pred_iou =
      num_pos > 0 ? pos_iou_sum / static_cast<double>(num_pos) : 0.0;
  if (state.prev_labels.empty()) {
    rec.churn = 0.0;
  } else {
    int changed = 0;
    for (int i = 0; i < n; ++i)
      if (state.prev_labels[static_cast<size_t>(i)] !=
          asn.labels[static_cast<size_t>(i)])
        ++changed;
    rec.churn = n > 0 ? static_cast<double>(changed) / n : 0.0;
  }
  if (assigner.kind == AssignerKind::Fixed) {
    rec.mean_threshold = assigner.pos_thr;
  } else if (!asn.stats.empty()) {
    double sum = 0;
    for (const CandidateStats& s : asn.stats) sum += s.threshold;
    rec.mean_threshold = sum / static_cast<double>(asn.stats.size());
  }
  state.prev_labels = std::move(asn.labels);
  state.iteration += 1;
  return rec;
}

std::uint64_t hash_scenes(const std::vector<Scene>& scenes) {
  std::uint64_t h = 14695981039346656037ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFFULL;
      h *= 1099511628211ULL;
    }
  };
  auto feed_double = [&feed](double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    feed(bits);
  };
  for (const Scene& scene : scenes) {
    feed(static_cast<std::uint64_t>(scene.size()));
    for (const GroundTruth& gt : scene) {
      feed_double(gt.box.x1);
      feed_double(gt.box.y1);
      feed_double(gt.box.x2);
      feed_double(gt.box.y2);
      feed(static_cast<std::uint64_t>(gt.class_id));
    }
  }
  return h;
}

SimulationResult run_simulation(const SimConfig& config) {
  if (config.iterations < 0)
    throw std::invalid_argument("run_simulation: iterations must be >= 0");
  if (config.num_scenes < 1)
    throw std::invalid_argument("run_simulation: num_scenes must be >= 1");
  validate_scene_spec(config.scene);

  SimulationResult result;
  const AnchorSet anchors = generate_anchors(
      config.anchors, config.scene.image_width, config.scene.image_height);
  result.scenes.reserve(static_cast<size_t>(config.num_scenes));
  for (int i = 0; i < config.num_scenes; ++i) {
    SceneSpec spec = config.scene;
    spec.seed = mix_seed(config.seed, config.scene.seed,
                         static_cast<std::uint64_t>(i));
    result.scenes.push_back(generate_scene(spec));
  }
  result.scenes_hash = hash_scenes(result.scenes);
  result.state = make_sim_state(anchors.size(), config.scene.num_classes,
                                config.iterations, config.learning_rate);
  result.records.reserve(static_cast<size_t>(config.iterations));
  for (int t = 0; t < config.iterations; ++t) {
    const Scene& scene =
        result.scenes[static_cast<size_t>(t % config.num_scenes)];
    result.records.push_back(
        train_step(result.state, scene, anchors, config.assigner,
                   config.losses));
  }
  return result;
}

}  // namespace assignkit
