#include "assignkit/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include "assignkit/losses.hpp"
#include "assignkit/oracles.hpp"
#include "assignkit/simulator.hpp"

namespace assignkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMetricsHeader =
    "iteration,total_loss,cls_loss,reg_loss,quality_loss,num_pos,"
    "mean_pos_pred_iou,churn,mean_threshold";
constexpr const char* kComparisonHeader =
    "variant,scenes_hash,reg_loss,mean_pos_pred_iou,num_pos";

[[noreturn]] void scene_fail(const std::string& what) {
  throw config_error("scene file: " + what);
}

struct SceneFile {
  double width = 0;
  double height = 0;
  std::vector<Box> gt_boxes;
  std::vector<int> classes;
  std::optional<std::vector<Box>> predicted_boxes;
};

Box parse_box(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 4) scene_fail(where + ": expected [x1,y1,x2,y2]");
  for (const json& e : v)
    if (!e.is_number()) scene_fail(where + ": expected numbers");
  try {
    return Box(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(),
               v[3].get<double>());
  } catch (const std::invalid_argument& e) {
    scene_fail(where + ": " + e.what());
  }
}

SceneFile load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) scene_fail("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    scene_fail(path + ": " + e.what());
  }
  if (!j.is_object()) scene_fail("expected an object");
  for (const auto& item : j.items())
    if (item.key() != "image" && item.key() != "gts" &&
        item.key() != "predicted_boxes")
      scene_fail(item.key() + ": unknown key");

  SceneFile scene;
  if (!j.contains("image")) scene_fail("image: missing");
  const json& image = j.at("image");
  if (!image.is_array() || image.size() != 2 || !image[0].is_number() ||
      !image[1].is_number())
    scene_fail("image: expected [width, height]");
  scene.width = image[0].get<double>();
  scene.height = image[1].get<double>();
  if (scene.width <= 0 || scene.height <= 0)
    scene_fail("image: dimensions must be positive");

  if (!j.contains("gts")) scene_fail("gts: missing");
  const json& gts = j.at("gts");
  if (!gts.is_array()) scene_fail("gts: expected an array");
  for (size_t i = 0; i < gts.size(); ++i) {
    const std::string where = "gts[" + std::to_string(i) + "]";
    const json& g = gts[i];
    if (!g.is_object()) scene_fail(where + ": expected an object");
    for (const auto& item : g.items())
      if (item.key() != "box" && item.key() != "class")
        scene_fail(where + "." + item.key() + ": unknown key");
    if (!g.contains("box")) scene_fail(where + ".box: missing");
    scene.gt_boxes.push_back(parse_box(g.at("box"), where + ".box"));
    int class_id = 0;
    if (g.contains("class")) {
      if (!g.at("class").is_number_integer())
        scene_fail(where + ".class: expected an integer");
      class_id = g.at("class").get<int>();
      if (class_id < 0) scene_fail(where + ".class: must be >= 0");
    }
    scene.classes.push_back(class_id);
  }

  if (j.contains("predicted_boxes")) {
    const json& preds = j.at("predicted_boxes");
    if (!preds.is_array()) scene_fail("predicted_boxes: expected an array");
    std::vector<Box> boxes;
    for (size_t i = 0; i < preds.size(); ++i)
      boxes.push_back(
          parse_box(preds[i], "predicted_boxes[" + std::to_string(i) + "]"));
    scene.predicted_boxes = std::move(boxes);
  }
  return scene;
}

struct WindowMeans {
  int window = 0;
  double total_loss = 0, cls_loss = 0, reg_loss = 0, quality_loss = 0;
  double num_pos = 0, mean_pos_pred_iou = 0, churn = 0, mean_threshold = 0;
};

WindowMeans final_window_means(const std::vector<MetricsRecord>& records) {
  WindowMeans m;
  m.window = static_cast<int>(std::min<size_t>(100, records.size()));
  if (m.window == 0) return m;
  for (size_t i = records.size() - static_cast<size_t>(m.window);
       i < records.size(); ++i) {
    const MetricsRecord& r = records[i];
    m.total_loss += r.total_loss;
    m.cls_loss += r.cls_loss;
    m.reg_loss += r.reg_loss;
    m.quality_loss += r.quality_loss;
    m.num_pos += r.num_pos;
    m.mean_pos_pred_iou += r.mean_pos_pred_iou;
    m.churn += r.churn;
    m.mean_threshold += r.mean_threshold;
  }
  const double w = m.window;
  m.total_loss /= w;
  m.cls_loss /= w;
  m.reg_loss /= w;
  m.quality_loss /= w;
  m.num_pos /= w;
  m.mean_pos_pred_iou /= w;
  m.churn /= w;
  m.mean_threshold /= w;
  return m;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write " + path.string());
  out << content;
  if (!out) throw config_error("write failed for " + path.string());
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string csv = kMetricsHeader;
  csv += '\n';
  char buf[512];
  for (const MetricsRecord& r : records) {
    std::snprintf(buf, sizeof buf,
                  "%d,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g\n",
                  r.iteration, r.total_loss, r.cls_loss, r.reg_loss,
                  r.quality_loss, r.num_pos, r.mean_pos_pred_iou, r.churn,
                  r.mean_threshold);
    csv += buf;
  }
  return csv;
}

json summary_json(const ExperimentConfig& config,
                  const SimulationResult& result) {
  const WindowMeans m = final_window_means(result.records);
  json summary;
  summary["config"] = experiment_config_to_json(config);
  summary["seed"] = config.seed;
  summary["scenes_hash"] = result.scenes_hash;
  summary["iterations"] = static_cast<int>(result.records.size());
  summary["final_window"] = {{"window", m.window},
                             {"total_loss", m.total_loss},
                             {"cls_loss", m.cls_loss},
                             {"reg_loss", m.reg_loss},
                             {"quality_loss", m.quality_loss},
                             {"num_pos", m.num_pos},
                             {"mean_pos_pred_iou", m.mean_pos_pred_iou},
                             {"churn", m.churn},
                             {"mean_threshold", m.mean_threshold}};
  return summary;
}

bool wants_format(const OutputConfig& output, const char* format) {
  for (const std::string& f : output.formats)
    if (f == format) return true;
  return false;
}

int thread_cap(size_t num_variants) {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ASSIGNKIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw config_error("ASSIGNKIT_THREADS must be a positive integer, got \"" +
                         std::string(env) + "\"");
    cap = static_cast<unsigned>(v);
  }
  return static_cast<int>(std::min<size_t>(cap, num_variants));
}

int report_user_error(const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return kExitUserError;
}

int report_internal_error(const std::exception& e) {
  std::cerr << "internal error: " << e.what() << "\n";
  return kExitInternalError;
}

}  // namespace

json assignment_to_json(const Assignment& assignment) {
  json j;
  j["labels"] = assignment.labels;
  j["num_pos"] = assignment.num_pos;
  json stats = json::array();
  for (const CandidateStats& s : assignment.stats) {
    stats.push_back({{"candidates", s.candidates},
                     {"aious", s.aious},
                     {"pious", s.pious},
                     {"mean_a", s.mean_a},
                     {"std_a", s.std_a},
                     {"mean_p", s.mean_p},
                     {"std_p", s.std_p},
                     {"mean_c", s.mean_c},
                     {"std_c", s.std_c},
                     {"threshold", s.threshold}});
  }
  j["stats"] = stats;
  return j;
}

Assignment assignment_from_json(const json& j) {
  Assignment a;
  a.labels = j.at("labels").get<std::vector<int>>();
  a.num_pos = j.at("num_pos").get<std::vector<int>>();
  for (const json& s : j.at("stats")) {
    CandidateStats stats;
    stats.candidates = s.at("candidates").get<std::vector<int>>();
    stats.aious = s.at("aious").get<std::vector<double>>();
    stats.pious = s.at("pious").get<std::vector<double>>();
    stats.mean_a = s.at("mean_a").get<double>();
    stats.std_a = s.at("std_a").get<double>();
    stats.mean_p = s.at("mean_p").get<double>();
    stats.std_p = s.at("std_p").get<double>();
    stats.mean_c = s.at("mean_c").get<double>();
    stats.std_c = s.at("std_c").get<double>();
    stats.threshold = s.at("threshold").get<double>();
    a.stats.push_back(std::move(stats));
  }
  return a;
}

std::vector<std::string> known_variants() {
  return {"fixed",   "atss",    "dynamic_atss", "w_1_1",
          "w_0.5_1", "w_1.5_1", "w_1_0.5",      "w_1_1.5",
          "constant", "d_up",   "d_down",       "d_up_d_down"};
}

ExperimentConfig apply_variant(const ExperimentConfig& base,
                               const std::string& name) {
  ExperimentConfig v = base;
  AssignerConfig& a = v.assigner;
  auto dynamic_weights = [&a](double w_p, double w_a) {
    a.kind = AssignerKind::DynamicAtss;
    a.w_p = w_p;
    a.w_a = w_a;
  };
  if (name == "fixed") {
    a.kind = AssignerKind::Fixed;
  } else if (name == "atss") {
    a.kind = AssignerKind::Atss;
  } else if (name == "dynamic_atss") {
    a.kind = AssignerKind::DynamicAtss;
  } else if (name == "w_1_1") {
    dynamic_weights(1.0, 1.0);
  } else if (name == "w_0.5_1") {
    dynamic_weights(0.5, 1.0);
  } else if (name == "w_1.5_1") {
    dynamic_weights(1.5, 1.0);
  } else if (name == "w_1_0.5") {
    dynamic_weights(1.0, 0.5);
  } else if (name == "w_1_1.5") {
    dynamic_weights(1.0, 1.5);
  } else if (name == "constant") {
    a.kind = AssignerKind::DynamicAtss;
    a.schedule_p = WeightSchedule::Constant;
    a.schedule_a = WeightSchedule::Constant;
  } else if (name == "d_up") {
    a.kind = AssignerKind::DynamicAtss;
    a.schedule_p = WeightSchedule::DUp;
  } else if (name == "d_down") {
    a.kind = AssignerKind::DynamicAtss;
    a.schedule_p = WeightSchedule::DDown;
  } else if (name == "d_up_d_down") {
    a.kind = AssignerKind::DynamicAtss;
    a.schedule_p = WeightSchedule::DUp;
    a.schedule_a = WeightSchedule::DDown;
  } else {
    throw config_error("compare: unknown variant \"" + name + "\"");
  }
  return v;
}

int cmd_assign(const std::string& scene_path, const std::string& config_path,
               const std::optional<std::string>& out_path) {
  ExperimentConfig config;
  SceneFile scene;
  AnchorSet anchors;
  Assignment assignment;
  try {
    config = load_experiment_config(config_path);
    scene = load_scene_file(scene_path);
    anchors = generate_anchors(config.anchors, scene.width, scene.height);
    switch (config.assigner.kind) {
      case AssignerKind::Fixed:
        assignment = assign_fixed(anchors, scene.gt_boxes,
                                  config.assigner.pos_thr,
                                  config.assigner.neg_thr);
        break;
      case AssignerKind::Atss:
        assignment = assign_atss(anchors, scene.gt_boxes, config.assigner.k);
        break;
      case AssignerKind::DynamicAtss: {
        if (scene.predicted_boxes &&
            static_cast<int>(scene.predicted_boxes->size()) != anchors.size())
          scene_fail("predicted_boxes: expected " +
                     std::to_string(anchors.size()) + " entries, got " +
                     std::to_string(scene.predicted_boxes->size()));
        // Without predictions the anchors stand in for them, the untrained
        // state; the run counts as iteration 0 of 1.
        const std::vector<Box>& preds =
            scene.predicted_boxes ? *scene.predicted_boxes : anchors.boxes;
        assignment = assign_dynamic_atss(anchors, preds, scene.gt_boxes,
                                         config.assigner, 0, 1);
        break;
      }
    }
  } catch (const config_error& e) {
    return report_user_error(e);
  } catch (const std::invalid_argument& e) {
    return report_user_error(e);
  } catch (const std::exception& e) {
    return report_internal_error(e);
  }

  if (config.assigner.kind != AssignerKind::Fixed) {
    for (size_t i = 0; i < assignment.labels.size(); ++i) {
      const int label = assignment.labels[i];
      if (label < 0) continue;
      const Box& gt = scene.gt_boxes[static_cast<size_t>(label)];
      if (!center_inside(gt, anchors.boxes[i].center())) {
        std::cerr << "internal error: positive anchor " << i
                  << " has center outside gt " << label << "\n";
        return kExitInternalError;
      }
    }
  }

  try {
    json out = assignment_to_json(assignment);
    out["image"] = {scene.width, scene.height};
    out["num_anchors"] = anchors.size();
    write_text_file(out_path.value_or("assignment.json"), out.dump(2) + "\n");
  } catch (const std::exception& e) {
    return report_user_error(e);
  }
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const CommonOpts& opts) {
  ExperimentConfig config;
  try {
    config = load_experiment_config(config_path);
    if (opts.seed) config.seed = *opts.seed;
    if (opts.out_dir) config.output.dir = *opts.out_dir;
  } catch (const std::exception& e) {
    return report_user_error(e);
  }
  try {
    const SimulationResult result = run_simulation(config.sim_config());
    const fs::path dir(config.output.dir);
    fs::create_directories(dir);
    if (wants_format(config.output, "csv"))
      write_text_file(dir / "metrics.csv", metrics_csv(result.records));
    if (wants_format(config.output, "json"))
      write_text_file(dir / "summary.json",
                      summary_json(config, result).dump(2) + "\n");
    std::cout << "seed: " << config.seed << "\n";
  } catch (const numeric_error& e) {
    return report_internal_error(e);
  } catch (const std::exception& e) {
    return report_user_error(e);
  }
  return kExitOk;
}

int cmd_compare(const std::string& config_path,
                const std::vector<std::string>& variants,
                const CommonOpts& opts) {
  std::vector<ExperimentConfig> configs;
  ExperimentConfig base;
  try {
    if (variants.empty())
      throw config_error("compare: variant list must not be empty");
    base = load_experiment_config(config_path);
    if (opts.seed) base.seed = *opts.seed;
    if (opts.out_dir) base.output.dir = *opts.out_dir;
    configs.reserve(variants.size());
    for (const std::string& name : variants)
      configs.push_back(apply_variant(base, name));
  } catch (const std::exception& e) {
    return report_user_error(e);
  }

  std::vector<SimulationResult> results(variants.size());
  try {
    const int workers = thread_cap(variants.size());
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= configs.size()) return;
        try {
          results[i] = run_simulation(configs[i].sim_config());
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    };
    if (workers <= 1) {
      work();
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < workers; ++w) threads.emplace_back(work);
      for (std::thread& t : threads) t.join();
    }
    if (error) std::rethrow_exception(error);

    const fs::path dir(base.output.dir);
    fs::create_directories(dir);
    std::string csv = kComparisonHeader;
    csv += '\n';
    char buf[256];
    for (size_t i = 0; i < variants.size(); ++i) {
      const WindowMeans m = final_window_means(results[i].records);
      std::snprintf(buf, sizeof buf, "%s,%llu,%.17g,%.17g,%.17g\n",
                    variants[i].c_str(),
                    static_cast<unsigned long long>(results[i].scenes_hash),
                    m.reg_loss, m.mean_pos_pred_iou, m.num_pos);
      csv += buf;
      if (wants_format(base.output, "csv"))
        write_text_file(dir / ("metrics_" + variants[i] + ".csv"),
                        metrics_csv(results[i].records));
    }
    write_text_file(dir / "comparison.csv", csv);
    std::cout << "seed: " << base.seed << "\n";
  } catch (const numeric_error& e) {
    return report_internal_error(e);
  } catch (const std::exception& e) {
    return report_user_error(e);
  }
  return kExitOk;
}

namespace {

Box random_box(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> coord(0.0, extent);
  for (;;) {
    double x1 = coord(rng), x2 = coord(rng);
    double y1 = coord(rng), y2 = coord(rng);
    if (x2 < x1) std::swap(x1, x2);
    if (y2 < y1) std::swap(y1, y2);
    if (x2 - x1 >= 2.0 && y2 - y1 >= 2.0) return Box(x1, y1, x2, y2);
  }
}

Box random_integer_box(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coord(0, 256);
  for (;;) {
    int x1 = coord(rng), x2 = coord(rng);
    int y1 = coord(rng), y2 = coord(rng);
    if (x2 < x1) std::swap(x1, x2);
    if (y2 < y1) std::swap(y1, y2);
    if (x2 > x1 && y2 > y1) return Box(x1, y1, x2, y2);
  }
}

}  // namespace

int cmd_oracle_check(std::uint64_t seed, int trials) {
  if (trials < 1) {
    std::cerr << "error: oracle-check trials must be >= 1\n";
    return kExitUserError;
  }
  std::mt19937_64 rng(seed);

  AnchorConfig anchor_config;
  anchor_config.strides = {8, 16};
  anchor_config.scale = 4.0;
  std::uniform_int_distribution<int> gt_count(1, 5);
  std::uniform_real_distribution<double> jitter_center(-0.2, 0.2);
  std::uniform_real_distribution<double> jitter_size(-0.3, 0.3);
  for (int t = 0; t < trials; ++t) {
    const double extent = 64.0 + 8.0 * (t % 9);
    const AnchorSet anchors =
        generate_anchors(anchor_config, extent, extent);
    std::vector<Box> gts;
    const int count = gt_count(rng);
    for (int g = 0; g < count; ++g) gts.push_back(random_box(rng, extent));
    std::vector<Box> preds;
    preds.reserve(static_cast<size_t>(anchors.size()));
    for (const Box& a : anchors.boxes) {
      const Deltas d{jitter_center(rng), jitter_center(rng), jitter_size(rng),
                     jitter_size(rng)};
      preds.push_back(decode(d, a));
    }
    const Assignment fast_static = assign_atss(anchors, gts, 9);
    const Assignment slow_static =
        oracle::naive_assign(anchors, gts, 9, oracle::NaiveMode::Atss);
    if (!(fast_static == slow_static)) {
      std::cerr << "internal error: static assignment mismatch on trial " << t
                << "\n";
      return kExitInternalError;
    }
    AssignerConfig dyn;
    dyn.kind = AssignerKind::DynamicAtss;
    const Assignment fast_dynamic =
        assign_dynamic_atss(anchors, preds, gts, dyn, 0, 1);
    const Assignment slow_dynamic = oracle::naive_assign(
        anchors, gts, dyn.k, oracle::NaiveMode::Dynamic, &preds, dyn.w_p,
        dyn.w_a);
    if (!(fast_dynamic == slow_dynamic)) {
      std::cerr << "internal error: dynamic assignment mismatch on trial " << t
                << "\n";
      return kExitInternalError;
    }
  }
  std::cout << "[ok] assignment vs naive_assign: " << trials << " scenes\n";

  const int iou_trials = trials * 10;
  for (int t = 0; t < iou_trials; ++t) {
    const Box a = random_integer_box(rng);
    const Box b = random_integer_box(rng);
    const double fast = iou(a, b);
    const double slow = oracle::rasterized_iou(a, b);
    if (std::abs(fast - slow) > 1e-12) {
      std::cerr << "internal error: iou mismatch " << fast << " vs " << slow
                << "\n";
      return kExitInternalError;
    }
  }
  std::cout << "[ok] iou vs rasterized_iou: " << iou_trials << " pairs\n";

  std::uniform_real_distribution<double> p_dist(0.01, 0.99);
  std::uniform_real_distribution<double> y_dist(0.0, 1.0);
  const double h = 1e-5;
  for (int t = 0; t < trials; ++t) {
    const double p = p_dist(rng);
    const double y_hard = t % 2 ? 1.0 : 0.0;
    double y_soft = y_dist(rng);
    if (std::abs(y_soft - p) < 0.05) y_soft = std::clamp(p + 0.1, 0.0, 1.0);
    const LossParams focal_params = default_loss_params(ClsLossKind::Focal);
    const LossParams vfl_params = default_loss_params(ClsLossKind::Vfl);
    const double checks[3] = {
        focal_loss(p, y_hard, focal_params.alpha, focal_params.gamma).d_dp -
            oracle::finite_diff(
                [&](double q) {
                  return focal_loss(q, y_hard, focal_params.alpha,
                                    focal_params.gamma)
                      .value;
                },
                p, h),
        qfl(p, y_soft, 2.0).d_dp -
            oracle::finite_diff(
                [&](double q) { return qfl(q, y_soft, 2.0).value; }, p, h),
        vfl(p, y_soft, vfl_params.alpha, vfl_params.gamma).d_dp -
            oracle::finite_diff(
                [&](double q) {
                  return vfl(q, y_soft, vfl_params.alpha, vfl_params.gamma)
                      .value;
                },
                p, h)};
    for (double diff : checks) {
      if (std::abs(diff) > 1e-4) {
        std::cerr << "internal error: gradient mismatch " << diff << "\n";
        return kExitInternalError;
      }
    }
  }
  std::cout << "[ok] analytic gradients vs finite differences: " << trials
            << " points\n";
  return kExitOk;
}

}  // namespace assignkit
