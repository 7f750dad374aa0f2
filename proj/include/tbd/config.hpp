#pragma once

#include "tbd/bp_engine.hpp"
#include "tbd/metrics.hpp"
#include "tbd/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tbd {

/// Birth parameters as written in a config; "auto" entries are resolved from
/// the scenario when the models are built.
struct BirthSettings {
    double p_birth = 1e-5;
    std::optional<double> rate;              // when set, p_birth = rate / (rate + 1)
    std::optional<double> gamma_max;         // auto: 2 gamma0
    double v_var = 1e-2;
    std::optional<double> detect_threshold;  // auto: 1.5 sqrt(gamma0 / (2 pi s^2) + sigma_eps^2)
};

struct RunConfig {
    ScenarioConfig scenario;
    double survival = 0.999;
    BirthSettings birth;
    EngineConfig engine;
    GospaConfig gospa;
    std::size_t runs = 400;
    std::uint64_t base_seed = 20230501;
    std::string output_dir = "out";
    std::size_t threads = 1;

    [[nodiscard]] Models models() const;
    /// Throws ConfigInvalid naming the offending field.
    void validate() const;
};

/// Parses "key = value" lines on top of the defaults. '#' starts a comment.
/// Unknown keys and malformed values are collected and reported together.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

/// Every key with its current value, one per line, in parse_config syntax.
std::string format_config(const RunConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace tbd
