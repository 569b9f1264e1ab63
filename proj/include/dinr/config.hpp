#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dinr/geometry.hpp"
#include "dinr/network.hpp"
#include "dinr/phantom.hpp"
#include "dinr/trainer.hpp"

namespace dinr {

/// Validation failure; `problems` names each offending key.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct OutputPaths {
    std::string projections = "projections.proj";
    std::string checkpoint = "model.ckpt";
    std::string train_log = "train_log.csv";
    std::string volume = "recon.vol4";
    std::string metrics = "metrics.csv";
};

/// Everything one pipeline run needs, resolved from a single JSON document.
struct RunConfig {
    std::uint64_t seed = 0;
    double noise_frac = 0.0;
    ScannerGeometry geometry;
    ViewSchedule schedule;
    nlohmann::json schedule_source;  // as given: generator parameters or explicit lists
    DynamicPhantom phantom;
    NetworkConfig network;
    TrainConfig training;
    std::size_t simulate_d_factor = 2;
    double blank_intensity = 1.0;
    std::size_t checkpoint_every = 1;  // epochs; 0 = only at the end
    bool log_wall_time = true;
    OutputPaths outputs;
    std::vector<std::string> warnings;

    static RunConfig from_json(const nlohmann::json& doc);
    static RunConfig load(const std::filesystem::path& path);
    /// Fully resolved document; from_json(to_json()) reproduces this config.
    nlohmann::json to_json() const;
};

}  // namespace dinr
