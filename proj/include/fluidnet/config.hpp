#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluidnet/model.hpp"
#include "fluidnet/simulate.hpp"

namespace fluidnet {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// INI-style experiment description: [section] headers, "key = values" lines,
// '#' comments. Job laws are spelled exp:MU, det:C, or zero.
struct ExperimentConfig {
    bool modulated = false;
    NetworkSpec network;
    ModulatedNetworkSpec mod;

    bool has_target = false;
    Eigen::VectorXd a;
    std::vector<int> n_values;

    StoppingRule stopping;

    bool has_moments = false;
    Eigen::VectorXd x0;
    double moments_tmax = 10.0;
    int moments_points = 200;

    long decay_runs = 100000;
    int density_points = 200;

    bool has_seed = false;
    std::uint64_t seed = 0;

    ModulatedNetworkSpec as_modulated() const;  // embeds plain specs at d = 1
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical config text; parse_config_text(echo_config(c)) echoes identically.
std::string echo_config(const ExperimentConfig& config);
// The same text with each line prefixed by "# ", for CSV file headers.
std::string config_header(const ExperimentConfig& config, const std::string& version);

}  // namespace fluidnet
