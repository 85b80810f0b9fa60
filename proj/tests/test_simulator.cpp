#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "assignkit/anchors.hpp"
#include "assignkit/simulator.hpp"

using namespace assignkit;

namespace {

AnchorSet custom_set(std::vector<Box> boxes) {
  AnchorSet set;
  set.boxes = std::move(boxes);
  AnchorLevel lvl;
  lvl.stride = 8;
  lvl.grid_w = static_cast<int>(set.boxes.size());
  lvl.grid_h = 1;
  lvl.offset = 0;
  lvl.count = static_cast<int>(set.boxes.size());
  set.levels.push_back(lvl);
  set.num_ratios = 1;
  return set;
}

bool same_scene(const Scene& a, const Scene& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].box.x1 != b[i].box.x1 || a[i].box.y1 != b[i].box.y1 ||
        a[i].box.x2 != b[i].box.x2 || a[i].box.y2 != b[i].box.y2 ||
        a[i].class_id != b[i].class_id)
      return false;
  }
  return true;
}

bool same_record(const MetricsRecord& a, const MetricsRecord& b,
                 bool ignore_iteration = false) {
  return (ignore_iteration || a.iteration == b.iteration) &&
         a.total_loss == b.total_loss && a.cls_loss == b.cls_loss &&
         a.reg_loss == b.reg_loss && a.quality_loss == b.quality_loss &&
         a.num_pos == b.num_pos &&
         a.mean_pos_pred_iou == b.mean_pos_pred_iou && a.churn == b.churn &&
         a.mean_threshold == b.mean_threshold;
}

SceneSpec small_spec(std::uint64_t seed) {
  SceneSpec spec;
  spec.image_width = 64;
  spec.image_height = 64;
  spec.size_min = 12;
  spec.size_max = 40;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("scene generation is deterministic in the seed") {
  const SceneSpec spec = small_spec(7);
  const Scene a = generate_scene(spec);
  const Scene b = generate_scene(spec);
  CHECK(same_scene(a, b));
  SceneSpec other = spec;
  other.seed = 8;
  CHECK_FALSE(same_scene(a, generate_scene(other)));
}

TEST_CASE("scene generation honors the requested ranges") {
  SceneSpec spec = small_spec(9);
  spec.num_gts_min = 1;
  spec.num_gts_max = 1;
  CHECK(generate_scene(spec).size() == 1);

  spec.num_gts_min = 0;
  spec.num_gts_max = 0;
  CHECK(generate_scene(spec).empty());

  spec = small_spec(10);
  spec.num_gts_min = 2;
  spec.num_gts_max = 4;
  for (std::uint64_t s = 0; s < 20; ++s) {
    spec.seed = s;
    const Scene scene = generate_scene(spec);
    CHECK(scene.size() >= 2);
    CHECK(scene.size() <= 4);
    for (const GroundTruth& gt : scene) {
      CHECK(gt.box.x1 >= 0.0);
      CHECK(gt.box.y1 >= 0.0);
      CHECK(gt.box.x2 <= spec.image_width);
      CHECK(gt.box.y2 <= spec.image_height);
      CHECK(gt.class_id >= 0);
      CHECK(gt.class_id < spec.num_classes);
      const double side = std::sqrt(gt.box.area());
      CHECK(side >= spec.size_min * 0.999);
      CHECK(side <= spec.size_max * 1.001);
    }
  }
}

TEST_CASE("slender fraction forces extreme aspects") {
  SceneSpec spec;
  spec.image_width = 256;
  spec.image_height = 256;
  spec.size_min = 24;
  spec.size_max = 40;
  spec.num_gts_min = 3;
  spec.num_gts_max = 5;
  spec.slender_fraction = 1.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    spec.seed = s;
    for (const GroundTruth& gt : generate_scene(spec)) {
      const double aspect = gt.box.height() / gt.box.width();
      CHECK((aspect > 2.9 || aspect < 1.0 / 2.9));
    }
  }
}

TEST_CASE("impossible size ranges fail with a clear error") {
  SceneSpec spec;
  spec.size_min = 500;
  spec.size_max = 600;
  CHECK_THROWS_AS(generate_scene(spec), std::runtime_error);

  SceneSpec bad;
  bad.size_min = 50;
  bad.size_max = 20;
  CHECK_THROWS_AS(generate_scene(bad), std::invalid_argument);
  bad = SceneSpec{};
  bad.num_gts_min = 3;
  bad.num_gts_max = 1;
  CHECK_THROWS_AS(validate_scene_spec(bad), std::invalid_argument);
  bad = SceneSpec{};
  bad.image_width = 0;
  CHECK_THROWS_AS(validate_scene_spec(bad), std::invalid_argument);
  bad = SceneSpec{};
  bad.slender_fraction = 1.5;
  CHECK_THROWS_AS(validate_scene_spec(bad), std::invalid_argument);
  bad = SceneSpec{};
  bad.num_classes = 0;
  CHECK_THROWS_AS(validate_scene_spec(bad), std::invalid_argument);
}

TEST_CASE("fresh state starts at the documented initialization") {
  const SimState state = make_sim_state(10, 3, 100, 0.05);
  REQUIRE(state.deltas.size() == 10);
  REQUIRE(state.cls_logits.size() == 30);
  REQUIRE(state.quality_logits.size() == 10);
  CHECK(state.deltas[4].dx == 0.0);
  CHECK(state.cls_logits[17] == -4.0);
  CHECK(state.quality_logits[9] == 0.0);
  CHECK(state.prev_labels.empty());
  CHECK(state.iteration == 0);
  CHECK(state.max_iter == 100);

  CHECK_THROWS_AS(make_sim_state(-1, 3, 10, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(make_sim_state(10, 0, 10, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(make_sim_state(10, 3, -1, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(make_sim_state(10, 3, 10, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(make_sim_state(10, 3, 10, std::nan("")),
                  std::invalid_argument);
}

TEST_CASE("zero learning rate freezes the dynamics") {
  AnchorConfig cfg;
  cfg.strides = {8};
  const AnchorSet anchors = generate_anchors(cfg, 64, 64);
  const Scene scene{{Box(10, 10, 40, 40), 1}};
  SimState state = make_sim_state(anchors.size(), 4, 10, 0.0);
  const SimState before = state;
  AssignerConfig assigner;
  LossConfig losses;
  const MetricsRecord first = train_step(state, scene, anchors, assigner,
                                         losses);
  const MetricsRecord second = train_step(state, scene, anchors, assigner,
                                          losses);
  CHECK(same_record(first, second, true));
  CHECK(second.iteration == 1);
  CHECK(second.churn == 0.0);
  CHECK(state.deltas[5].dx == before.deltas[5].dx);
  CHECK(state.cls_logits[20] == before.cls_logits[20]);
}

TEST_CASE("dynamic and static assignment agree at iteration zero") {
  AnchorConfig cfg;
  cfg.strides = {8, 16};
  const AnchorSet anchors = generate_anchors(cfg, 64, 64);
  const Scene scene{{Box(8, 8, 40, 40), 0}, {Box(30, 30, 60, 58), 2}};
  LossConfig losses;

  SimState st_state = make_sim_state(anchors.size(), 4, 10, 0.05);
  AssignerConfig st;
  st.kind = AssignerKind::Atss;
  const MetricsRecord sr = train_step(st_state, scene, anchors, st, losses);

  SimState dy_state = make_sim_state(anchors.size(), 4, 10, 0.05);
  AssignerConfig dy;
  dy.kind = AssignerKind::DynamicAtss;
  const MetricsRecord dr = train_step(dy_state, scene, anchors, dy, losses);

  CHECK(dy_state.prev_labels == st_state.prev_labels);
  CHECK(dr.num_pos == sr.num_pos);
  CHECK(dr.cls_loss == sr.cls_loss);
  CHECK(dr.reg_loss == sr.reg_loss);
  CHECK(dr.mean_pos_pred_iou == sr.mean_pos_pred_iou);
  // Combined statistics at 1:1 weights double every moment exactly.
  CHECK(dr.mean_threshold == 2.0 * sr.mean_threshold);
}

TEST_CASE("a gt that clears no candidate threshold trains without positives") {
  // Two candidates with distinct anchor IoUs: mean + std always exceeds the
  // larger one, so selection is empty before the center filter runs.
  const AnchorSet anchors =
      custom_set({Box(10, 10, 50, 50), Box(10, 10, 50, 30)});
  const Scene scene{{Box(10, 10, 50, 50), 0}};
  SimState state = make_sim_state(anchors.size(), 2, 100, 0.05);
  AssignerConfig assigner;
  assigner.kind = AssignerKind::DynamicAtss;
  LossConfig losses;
  losses.quality_branch = QualityBranch::IouScore;
  for (int t = 0; t < 100; ++t) {
    const MetricsRecord rec =
        train_step(state, scene, anchors, assigner, losses);
    CHECK(rec.num_pos == 0);
    CHECK(rec.reg_loss == 0.0);
    CHECK(rec.quality_loss == 0.0);
    CHECK(rec.mean_pos_pred_iou == 0.0);
    CHECK(rec.cls_loss > 0.0);
    CHECK(std::isfinite(rec.cls_loss));
    CHECK(rec.mean_threshold > 2.0);
  }
  CHECK(state.iteration == 100);
}

TEST_CASE("regression loss decreases on a stable single positive") {
  const AnchorSet anchors = custom_set({Box(10, 10, 50, 50)});
  const Scene scene{{Box(14, 12, 52, 48), 0}};
  SimState state = make_sim_state(1, 1, 60, 0.05);
  AssignerConfig assigner;
  LossConfig losses;
  double prev = -1.0;
  for (int t = 0; t < 60; ++t) {
    const MetricsRecord rec =
        train_step(state, scene, anchors, assigner, losses);
    CHECK(rec.num_pos == 1);
    if (t > 0) CHECK(rec.reg_loss <= prev);
    prev = rec.reg_loss;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("churn reports label flips between consecutive steps") {
  AnchorConfig cfg;
  cfg.strides = {8};
  const AnchorSet anchors = generate_anchors(cfg, 64, 64);
  const Scene a{{Box(2, 2, 22, 22), 0}};
  const Scene b{{Box(40, 40, 62, 62), 0}};
  SimState state = make_sim_state(anchors.size(), 1, 10, 0.0);
  AssignerConfig assigner;
  LossConfig losses;
  CHECK(train_step(state, a, anchors, assigner, losses).churn == 0.0);
  CHECK(train_step(state, b, anchors, assigner, losses).churn > 0.0);
  CHECK(train_step(state, b, anchors, assigner, losses).churn == 0.0);
}

TEST_CASE("train step validates its inputs") {
  AnchorConfig cfg;
  cfg.strides = {8};
  const AnchorSet anchors = generate_anchors(cfg, 64, 64);
  AssignerConfig assigner;
  LossConfig losses;

  SimState wrong = make_sim_state(3, 2, 10, 0.05);
  const Scene scene{{Box(10, 10, 40, 40), 0}};
  CHECK_THROWS_AS(train_step(wrong, scene, anchors, assigner, losses),
                  std::invalid_argument);

  SimState state = make_sim_state(anchors.size(), 2, 10, 0.05);
  const Scene bad_class{{Box(10, 10, 40, 40), 5}};
  CHECK_THROWS_AS(train_step(state, bad_class, anchors, assigner, losses),
                  std::invalid_argument);
}

TEST_CASE("non-finite state is reported with the offending anchor") {
  AnchorConfig cfg;
  cfg.strides = {8};
  const AnchorSet anchors = generate_anchors(cfg, 32, 32);
  AssignerConfig assigner;
  LossConfig losses;
  const Scene scene{{Box(2, 2, 30, 30), 0}};

  SimState state = make_sim_state(anchors.size(), 2, 10, 0.05);
  state.cls_logits[1 * 2 + 0] = std::nan("");
  try {
    train_step(state, scene, anchors, assigner, losses);
    FAIL("expected numeric_error");
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("anchor 1") != std::string::npos);
  }

  SimState broken = make_sim_state(anchors.size(), 2, 10, 0.05);
  broken.deltas[3].dx = std::nan("");
  try {
    train_step(broken, scene, anchors, assigner, losses);
    FAIL("expected numeric_error");
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("anchor 3") != std::string::npos);
  }
}

TEST_CASE("quality branches produce a trainable quality loss") {
  AnchorConfig cfg;
  cfg.strides = {8};
  const AnchorSet anchors = generate_anchors(cfg, 64, 64);
  const Scene scene{{Box(6, 6, 50, 50), 0}};
  AssignerConfig assigner;
  for (QualityBranch branch :
       {QualityBranch::None, QualityBranch::Centerness,
        QualityBranch::IouScore}) {
    SimState state = make_sim_state(anchors.size(), 1, 10, 0.05);
    LossConfig losses;
    losses.quality_branch = branch;
    const MetricsRecord rec =
        train_step(state, scene, anchors, assigner, losses);
    REQUIRE(rec.num_pos > 0);
    if (branch == QualityBranch::None) {
      CHECK(rec.quality_loss == 0.0);
    } else {
      CHECK(rec.quality_loss > 0.0);
    }
  }
}

TEST_CASE("full runs are reproducible and honor the iteration count") {
  SimConfig config;
  config.anchors.strides = {8, 16};
  config.scene = small_spec(3);
  config.iterations = 12;
  config.num_scenes = 3;
  config.seed = 99;
  config.assigner.kind = AssignerKind::DynamicAtss;

  const SimulationResult a = run_simulation(config);
  const SimulationResult b = run_simulation(config);
  REQUIRE(a.records.size() == 12);
  REQUIRE(a.scenes.size() == 3);
  CHECK(a.scenes_hash == b.scenes_hash);
  CHECK(a.state.iteration == 12);
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(same_record(a.records[i], b.records[i]));
    CHECK(a.records[i].iteration == static_cast<int>(i));
  }
  for (size_t s = 0; s < a.scenes.size(); ++s) {
    CHECK(same_scene(a.scenes[s], b.scenes[s]));
  }

  SimConfig empty = config;
  empty.iterations = 0;
  CHECK(run_simulation(empty).records.empty());

  SimConfig different = config;
  different.seed = 100;
  CHECK(run_simulation(different).scenes_hash != a.scenes_hash);

  SimConfig bad = config;
  bad.num_scenes = 0;
  CHECK_THROWS_AS(run_simulation(bad), std::invalid_argument);
  bad = config;
  bad.iterations = -1;
  CHECK_THROWS_AS(run_simulation(bad), std::invalid_argument);
}

TEST_CASE("seed mixing separates scenes and runs") {
  CHECK(mix_seed(1, 2, 3) == mix_seed(1, 2, 3));
  CHECK(mix_seed(1, 2, 3) != mix_seed(1, 2, 4));
  CHECK(mix_seed(1, 2, 3) != mix_seed(2, 2, 3));
  CHECK(mix_seed(1, 2, 3) != mix_seed(1, 3, 3));
}

TEST_CASE("scene hashing keys on exact geometry") {
  const Scene scene{{Box(1, 2, 3, 4), 0}, {Box(5, 6, 7, 8), 1}};
  const std::vector<Scene> one{scene};
  CHECK(hash_scenes(one) == hash_scenes(one));
  Scene moved = scene;
  moved[0].box.x1 = 1.0000001;
  CHECK(hash_scenes({moved}) != hash_scenes(one));
  Scene relabeled = scene;
  relabeled[1].class_id = 0;
  CHECK(hash_scenes({relabeled}) != hash_scenes(one));
  CHECK(hash_scenes({}) != 0);
}
