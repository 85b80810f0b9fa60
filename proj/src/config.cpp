#include "assignkit/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>

namespace assignkit {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw config_error("config: " + path + ": " + what);
}

const json& section(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  return j;
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) fail(path + "." + item.key(), "unknown key");
  }
}

void get_number(const json& j, const std::string& path, const char* key,
                double& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  out = v.get<double>();
}

void get_int(const json& j, const std::string& path, const char* key,
             int& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  out = v.get<int>();
}

void get_seed(const json& j, const std::string& path, const char* key,
              std::uint64_t& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)))
    fail(path + "." + key, "expected a nonnegative integer");
  out = v.get<std::uint64_t>();
}

void get_string(const json& j, const std::string& path, const char* key,
                std::string& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  out = v.get<std::string>();
}

void get_number_list(const json& j, const std::string& path, const char* key,
                     std::vector<double>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) fail(path + "." + key, "expected a non-empty array");
  std::vector<double> values;
  for (const json& e : v) {
    if (!e.is_number()) fail(path + "." + key, "expected numbers");
    values.push_back(e.get<double>());
  }
  out = std::move(values);
}

void get_range(const json& j, const std::string& path, const char* key,
               double& lo, double& hi) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    fail(path + "." + key, "expected [min, max]");
  lo = v[0].get<double>();
  hi = v[1].get<double>();
}

void get_int_range(const json& j, const std::string& path, const char* key,
                   int& lo, int& hi) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
      !v[1].is_number_integer())
    fail(path + "." + key, "expected [min, max] integers");
  lo = v[0].get<int>();
  hi = v[1].get<int>();
}

AnchorConfig parse_anchors(const json& root) {
  AnchorConfig anchors;
  if (!root.contains("anchors")) return anchors;
  const json& j = section(root.at("anchors"), "anchors");
  reject_unknown(j, "anchors", {"strides", "scale", "ratios"});
  get_number_list(j, "anchors", "strides", anchors.strides);
  get_number(j, "anchors", "scale", anchors.scale);
  get_number_list(j, "anchors", "ratios", anchors.ratios);
  for (size_t i = 0; i < anchors.strides.size(); ++i) {
    if (anchors.strides[i] <= 0) fail("anchors.strides", "must be positive");
    if (i > 0 && anchors.strides[i] <= anchors.strides[i - 1])
      fail("anchors.strides", "must be strictly increasing");
  }
  if (anchors.scale <= 0) fail("anchors.scale", "must be positive");
  for (double r : anchors.ratios)
    if (r <= 0) fail("anchors.ratios", "must be positive");
  return anchors;
}

AssignerConfig parse_assigner(const json& root) {
  AssignerConfig assigner;
  if (!root.contains("assigner")) return assigner;
  const json& j = section(root.at("assigner"), "assigner");
  reject_unknown(j, "assigner",
                 {"kind", "k", "pos_thr", "neg_thr", "w_p", "w_a",
                  "schedule_p", "schedule_a"});
  std::string kind = assigner_kind_name(assigner.kind);
  get_string(j, "assigner", "kind", kind);
  try {
    assigner.kind = parse_assigner_kind(kind);
  } catch (const std::invalid_argument& e) {
    fail("assigner.kind", e.what());
  }
  get_int(j, "assigner", "k", assigner.k);
  get_number(j, "assigner", "pos_thr", assigner.pos_thr);
  get_number(j, "assigner", "neg_thr", assigner.neg_thr);
  get_number(j, "assigner", "w_p", assigner.w_p);
  get_number(j, "assigner", "w_a", assigner.w_a);
  std::string sp = schedule_name(assigner.schedule_p);
  std::string sa = schedule_name(assigner.schedule_a);
  get_string(j, "assigner", "schedule_p", sp);
  get_string(j, "assigner", "schedule_a", sa);
  try {
    assigner.schedule_p = parse_schedule(sp);
    assigner.schedule_a = parse_schedule(sa);
  } catch (const std::invalid_argument& e) {
    fail("assigner.schedule", e.what());
  }
  if (assigner.k < 1) fail("assigner.k", "must be >= 1");
  if (assigner.pos_thr < 0 || assigner.pos_thr > 1)
    fail("assigner.pos_thr", "must be in [0, 1]");
  if (assigner.neg_thr < 0 || assigner.neg_thr > assigner.pos_thr)
    fail("assigner.neg_thr", "must be in [0, pos_thr]");
  if (!(assigner.w_p >= 0) || !(assigner.w_a >= 0) ||
      !std::isfinite(assigner.w_p) || !std::isfinite(assigner.w_a))
    fail("assigner.w_p", "weights must be finite and nonnegative");
  if (assigner.w_p + assigner.w_a <= 0)
    fail("assigner.w_p", "w_p and w_a must not both be zero");
  return assigner;
}

LossConfig parse_losses(const json& root) {
  LossConfig losses;
  losses.params = default_loss_params(losses.cls_loss);
  if (!root.contains("losses")) return losses;
  const json& j = section(root.at("losses"), "losses");
  reject_unknown(j, "losses",
                 {"cls_loss", "quality_branch", "alpha", "gamma", "beta",
                  "smooth_l1_beta"});
  std::string cls = cls_loss_name(losses.cls_loss);
  get_string(j, "losses", "cls_loss", cls);
  try {
    losses.cls_loss = parse_cls_loss(cls);
  } catch (const std::invalid_argument& e) {
    fail("losses.cls_loss", e.what());
  }
  losses.params = default_loss_params(losses.cls_loss);
  std::string branch = quality_branch_name(losses.quality_branch);
  get_string(j, "losses", "quality_branch", branch);
  try {
    losses.quality_branch = parse_quality_branch(branch);
  } catch (const std::invalid_argument& e) {
    fail("losses.quality_branch", e.what());
  }
  get_number(j, "losses", "alpha", losses.params.alpha);
  get_number(j, "losses", "gamma", losses.params.gamma);
  get_number(j, "losses", "beta", losses.params.beta);
  get_number(j, "losses", "smooth_l1_beta", losses.params.smooth_l1_beta);
  if (losses.params.alpha < 0 || losses.params.alpha > 1)
    fail("losses.alpha", "must be in [0, 1]");
  if (losses.params.gamma < 0 || !std::isfinite(losses.params.gamma))
    fail("losses.gamma", "must be finite and >= 0");
  if (losses.params.beta <= 0 || !std::isfinite(losses.params.beta))
    fail("losses.beta", "must be finite and positive");
  if (losses.params.smooth_l1_beta <= 0)
    fail("losses.smooth_l1_beta", "must be positive");
  return losses;
}

SceneSpec parse_scene(const json& root) {
  SceneSpec scene;
  if (!root.contains("scene")) return scene;
  const json& j = section(root.at("scene"), "scene");
  reject_unknown(j, "scene",
                 {"image_width", "image_height", "num_gts_range", "size_range",
                  "aspect_range", "num_classes", "slender_fraction", "seed"});
  get_number(j, "scene", "image_width", scene.image_width);
  get_number(j, "scene", "image_height", scene.image_height);
  get_int_range(j, "scene", "num_gts_range", scene.num_gts_min,
                scene.num_gts_max);
  get_range(j, "scene", "size_range", scene.size_min, scene.size_max);
  get_range(j, "scene", "aspect_range", scene.aspect_min, scene.aspect_max);
  get_int(j, "scene", "num_classes", scene.num_classes);
  get_number(j, "scene", "slender_fraction", scene.slender_fraction);
  get_seed(j, "scene", "seed", scene.seed);
  try {
    validate_scene_spec(scene);
  } catch (const std::invalid_argument& e) {
    fail("scene", e.what());
  }
  return scene;
}

void parse_train(const json& root, ExperimentConfig& config) {
  if (!root.contains("train")) return;
  const json& j = section(root.at("train"), "train");
  reject_unknown(j, "train",
                 {"iterations", "learning_rate", "seed", "num_scenes"});
  get_int(j, "train", "iterations", config.iterations);
  get_number(j, "train", "learning_rate", config.learning_rate);
  get_seed(j, "train", "seed", config.seed);
  get_int(j, "train", "num_scenes", config.num_scenes);
  if (config.iterations < 0) fail("train.iterations", "must be >= 0");
  if (!(config.learning_rate >= 0) || !std::isfinite(config.learning_rate))
    fail("train.learning_rate", "must be finite and >= 0");
  if (config.num_scenes < 1) fail("train.num_scenes", "must be >= 1");
}

OutputConfig parse_output(const json& root) {
  OutputConfig output;
  if (!root.contains("output")) return output;
  const json& j = section(root.at("output"), "output");
  reject_unknown(j, "output", {"dir", "formats"});
  get_string(j, "output", "dir", output.dir);
  if (j.contains("formats")) {
    const json& v = j.at("formats");
    if (!v.is_array()) fail("output.formats", "expected an array");
    output.formats.clear();
    for (const json& e : v) {
      if (!e.is_string()) fail("output.formats", "expected strings");
      const std::string f = e.get<std::string>();
      if (f != "csv" && f != "json")
        fail("output.formats", "unknown format \"" + f + "\"");
      output.formats.push_back(f);
    }
  }
  if (output.dir.empty()) fail("output.dir", "must not be empty");
  return output;
}

}  // namespace

SimConfig ExperimentConfig::sim_config() const {
  SimConfig sim;
  sim.anchors = anchors;
  sim.assigner = assigner;
  sim.losses = losses;
  sim.scene = scene;
  sim.iterations = iterations;
  sim.learning_rate = learning_rate;
  sim.seed = seed;
  sim.num_scenes = num_scenes;
  return sim;
}

ExperimentConfig parse_experiment_config(const json& j) {
  section(j, "(root)");
  reject_unknown(j, "(root)",
                 {"anchors", "assigner", "losses", "scene", "train", "output"});
  ExperimentConfig config;
  config.anchors = parse_anchors(j);
  config.assigner = parse_assigner(j);
  config.losses = parse_losses(j);
  config.scene = parse_scene(j);
  parse_train(j, config);
  config.output = parse_output(j);
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error("config: " + path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

json experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["anchors"] = {{"strides", c.anchors.strides},
                  {"scale", c.anchors.scale},
                  {"ratios", c.anchors.ratios}};
  j["assigner"] = {{"kind", assigner_kind_name(c.assigner.kind)},
                   {"k", c.assigner.k},
                   {"pos_thr", c.assigner.pos_thr},
                   {"neg_thr", c.assigner.neg_thr},
                   {"w_p", c.assigner.w_p},
                   {"w_a", c.assigner.w_a},
                   {"schedule_p", schedule_name(c.assigner.schedule_p)},
                   {"schedule_a", schedule_name(c.assigner.schedule_a)}};
  j["losses"] = {{"cls_loss", cls_loss_name(c.losses.cls_loss)},
                 {"quality_branch", quality_branch_name(c.losses.quality_branch)},
                 {"alpha", c.losses.params.alpha},
                 {"gamma", c.losses.params.gamma},
                 {"beta", c.losses.params.beta},
                 {"smooth_l1_beta", c.losses.params.smooth_l1_beta}};
  j["scene"] = {{"image_width", c.scene.image_width},
                {"image_height", c.scene.image_height},
                {"num_gts_range", {c.scene.num_gts_min, c.scene.num_gts_max}},
                {"size_range", {c.scene.size_min, c.scene.size_max}},
                {"aspect_range", {c.scene.aspect_min, c.scene.aspect_max}},
                {"num_classes", c.scene.num_classes},
                {"slender_fraction", c.scene.slender_fraction},
                {"seed", c.scene.seed}};
  j["train"] = {{"iterations", c.iterations},
                {"learning_rate", c.learning_rate},
                {"seed", c.seed},
                {"num_scenes", c.num_scenes}};
  j["output"] = {{"dir", c.output.dir}, {"formats", c.output.formats}};
  return j;
}

const char* assigner_kind_name(AssignerKind kind) {
  switch (kind) {
    case AssignerKind::Fixed: return "fixed";
    case AssignerKind::Atss: return "atss";
    case AssignerKind::DynamicAtss: return "dynamic_atss";
  }
  return "?";
}

AssignerKind parse_assigner_kind(const std::string& name) {
  if (name == "fixed") return AssignerKind::Fixed;
  if (name == "atss") return AssignerKind::Atss;
  if (name == "dynamic_atss") return AssignerKind::DynamicAtss;
  throw std::invalid_argument("unknown assigner kind \"" + name + "\"");
}

const char* schedule_name(WeightSchedule schedule) {
  switch (schedule) {
    case WeightSchedule::Constant: return "constant";
    case WeightSchedule::DUp: return "d_up";
    case WeightSchedule::DDown: return "d_down";
  }
  return "?";
}

WeightSchedule parse_schedule(const std::string& name) {
  if (name == "constant") return WeightSchedule::Constant;
  if (name == "d_up") return WeightSchedule::DUp;
  if (name == "d_down") return WeightSchedule::DDown;
  throw std::invalid_argument("unknown schedule \"" + name + "\"");
}

const char* cls_loss_name(ClsLossKind kind) {
  switch (kind) {
    case ClsLossKind::Focal: return "focal";
    case ClsLossKind::Qfl: return "qfl";
    case ClsLossKind::Vfl: return "vfl";
  }
  return "?";
}

ClsLossKind parse_cls_loss(const std::string& name) {
  if (name == "focal") return ClsLossKind::Focal;
  if (name == "qfl") return ClsLossKind::Qfl;
  if (name == "vfl") return ClsLossKind::Vfl;
  throw std::invalid_argument("unknown cls_loss \"" + name + "\"");
}

const char* quality_branch_name(QualityBranch branch) {
  switch (branch) {
    case QualityBranch::None: return "none";
    case QualityBranch::Centerness: return "centerness";
    case QualityBranch::IouScore: return "iou";
  }
  return "?";
}

QualityBranch parse_quality_branch(const std::string& name) {
  if (name == "none") return QualityBranch::None;
  if (name == "centerness") return QualityBranch::Centerness;
  if (name == "iou") return QualityBranch::IouScore;
  throw std::invalid_argument("unknown quality_branch \"" + name + "\"");
}

}  // namespace assignkit
