#ifndef ASSIGNKIT_COMMANDS_HPP
#define ASSIGNKIT_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "assignkit/assignment.hpp"
#include "assignkit/config.hpp"

// Command entry points shared by the CLI binary and the tests. Exit codes:
// 0 success, 1 user error (bad files, bad flags), 2 internal invariant or
// numeric failure.
namespace assignkit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInternalError = 2;

struct CommonOpts {
  std::optional<std::string> out_dir;   // overrides output.dir
  std::optional<std::uint64_t> seed;    // overrides train.seed
};

int cmd_assign(const std::string& scene_path, const std::string& config_path,
               const std::optional<std::string>& out_path);

int cmd_simulate(const std::string& config_path, const CommonOpts& opts);

int cmd_compare(const std::string& config_path,
                const std::vector<std::string>& variants,
                const CommonOpts& opts);

int cmd_oracle_check(std::uint64_t seed, int trials);

/// Names accepted by cmd_compare, in registry order.
std::vector<std::string> known_variants();

/// Base config with one variant's overrides applied. Throws config_error for
/// an unknown name.
ExperimentConfig apply_variant(const ExperimentConfig& base,
                               const std::string& name);

nlohmann::json assignment_to_json(const Assignment& assignment);
Assignment assignment_from_json(const nlohmann::json& j);

}  // namespace assignkit

#endif
