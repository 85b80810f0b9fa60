#ifndef ASSIGNKIT_SIMULATOR_HPP
#define ASSIGNKIT_SIMULATOR_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "assignkit/anchors.hpp"
#include "assignkit/assignment.hpp"
#include "assignkit/geometry.hpp"
#include "assignkit/losses.hpp"

namespace assignkit {

// Training blew up numerically (non-finite gradient or parameter); distinct
// from configuration mistakes so callers can map it to a different exit code.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SceneSpec {
  double image_width = 256;
  double image_height = 256;
  int num_gts_min = 1;
  int num_gts_max = 4;
  double size_min = 24;   // log-uniform geometric-mean side length
  double size_max = 96;
  double aspect_min = 0.5;  // height / width
  double aspect_max = 2.0;
  int num_classes = 4;
  double slender_fraction = 0.25;  // share forced to aspect > 3 or < 1/3
  std::uint64_t seed = 0;
};

struct GroundTruth {
  Box box;
  int class_id = 0;
};

using Scene = std::vector<GroundTruth>;

/// Throws std::invalid_argument on out-of-order or non-positive ranges.
void validate_scene_spec(const SceneSpec& spec);

/// Deterministic synthetic scene for SceneSpec::seed. Throws on ranges that
/// cannot produce an in-image box after repeated attempts.
Scene generate_scene(const SceneSpec& spec);

// Per-anchor learnable parameters: box deltas, one logit per class, one
// quality logit. Tabular stand-in for a detection head.
struct SimState {
  std::vector<Deltas> deltas;       // init 0: decoded predictions = anchors
  std::vector<double> cls_logits;   // [anchor * num_classes + c], init -4
  std::vector<double> quality_logits;  // init 0
  std::vector<int> prev_labels;     // empty until the first step
  int num_classes = 0;
  int iteration = 0;
  int max_iter = 0;
  double learning_rate = 0;
};

SimState make_sim_state(int num_anchors, int num_classes, int max_iter,
                        double learning_rate);

struct MetricsRecord {
  int iteration = 0;
  double total_loss = 0;
  double cls_loss = 0;
  double reg_loss = 0;
  double quality_loss = 0;
  int num_pos = 0;
  double mean_pos_pred_iou = 0;
  double churn = 0;
  double mean_threshold = 0;
};

// One gradient-descent step on one scene: decode, assign, accumulate the
// classification / regression / quality losses (each normalized by
// max(num_pos, 1)), update every parameter, advance the iteration counter.
// Throws on a non-finite gradient, naming the anchor.
MetricsRecord train_step(SimState& state, const Scene& scene,
                         const AnchorSet& anchors,
                         const AssignerConfig& assigner,
                         const LossConfig& losses);

struct SimConfig {
  AnchorConfig anchors;
  AssignerConfig assigner;
  LossConfig losses;
  SceneSpec scene;
  int iterations = 100;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;  // master run seed; scene seeds derive from it
  int num_scenes = 4;
};

struct SimulationResult {
  std::vector<MetricsRecord> records;
  SimState state;
  std::vector<Scene> scenes;
  std::uint64_t scenes_hash = 0;
};

// Full deterministic run: builds anchors for the scene image, generates
// num_scenes fixed scenes, then steps round-robin (scene t % num_scenes)
// for the configured iteration count.
SimulationResult run_simulation(const SimConfig& config);

/// Stateless splitmix64-style mix used to derive per-scene seeds.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t scene_seed,
                       std::uint64_t index);

/// FNV-1a over every GT's coordinate bits and class id, for pairing checks.
std::uint64_t hash_scenes(const std::vector<Scene>& scenes);

}  // namespace assignkit

#endif
