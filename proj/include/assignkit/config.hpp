#ifndef ASSIGNKIT_CONFIG_HPP
#define ASSIGNKIT_CONFIG_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "assignkit/simulator.hpp"

namespace assignkit {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutputConfig {
  std::string dir = "out";
  std::vector<std::string> formats{"csv", "json"};
};

// Everything a run needs, loadable from one JSON document. Every section is
// optional and defaults as the struct initializers say; unknown keys are
// rejected with the offending path in the message.
struct ExperimentConfig {
  AnchorConfig anchors;
  AssignerConfig assigner;
  LossConfig losses;
  SceneSpec scene;
  int iterations = 100;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  int num_scenes = 4;
  OutputConfig output;

  SimConfig sim_config() const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

const char* assigner_kind_name(AssignerKind kind);
AssignerKind parse_assigner_kind(const std::string& name);
const char* schedule_name(WeightSchedule schedule);
WeightSchedule parse_schedule(const std::string& name);
const char* cls_loss_name(ClsLossKind kind);
ClsLossKind parse_cls_loss(const std::string& name);
const char* quality_branch_name(QualityBranch branch);
QualityBranch parse_quality_branch(const std::string& name);

}  // namespace assignkit

#endif
