#pragma once

#include <filesystem>
#include <optional>

#include "json.hpp"

#include "crowdnav/config.hpp"
#include "crowdnav/policy_net.hpp"

namespace crowdnav {

/// On disk: 8-byte magic "CNCKPT01", little-endian u64 header length, the
/// JSON header, then the shared block and the cost block as little-endian
/// IEEE-754 doubles.
struct Checkpoint {
  NetworkParams params;
  std::optional<ExperimentConfig> config;
  nlohmann::json seeds = nlohmann::json::object();
  std::uint64_t config_hash = 0;
};

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params, const ExperimentConfig& config,
                     const nlohmann::json& seeds = nlohmann::json::object());

/// Throws LoadError on a malformed or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws LoadError when the network cannot consume observations built from
/// `config` (feature widths or layer sizes differ).
void check_compatible(const NetworkParams& params, const ExperimentConfig& config);

}  // namespace crowdnav
