#pragma once

#include <json.hpp>

#include "fedkd/data/synthetic.hpp"
#include "fedkd/distill.hpp"
#include "fedkd/federated.hpp"
#include "fedkd/metrics/metrics.hpp"

namespace fedkd::runner {

inline constexpr const char* kVersion = "0.1.0";

/// Fully resolved experiment configuration. Defaults bind the scr4 profile's
/// hyperparameters; profiles and CLI flags override parsed values.
struct RunConfig {
    std::string profile = "synthetic";          // scr4 | scr5 | synthetic
    std::string scenario_source = "synthetic";  // synthetic | csv | saved
    std::string scenario_path;
    std::string schema_path;
    data::SyntheticConfig generator{};
    data::SplitMode split = data::SplitMode::Chronological;

    std::vector<std::string> methods;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int threads = 1;
    bool save_student_weights = false;

    fed::FedConfig fed{};
    distill::KdConfig kd{};
    bool alpha_explicit = false;  // synthetic profile requires an explicit alpha

    void validate() const;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config(const nlohmann::json& parsed);

/// Canonical echo of every effective setting; its FNV-1a hash is the config
/// fingerprint carried by all reports.
nlohmann::ordered_json config_to_json(const RunConfig& config);
std::string config_fingerprint(const RunConfig& config);

data::Scenario build_scenario(const RunConfig& config);

/// Expands method dependencies (ensemble pulls in local, dpfed, kd_smote) and
/// returns the canonical execution order.
std::vector<std::string> resolve_methods(const std::vector<std::string>& requested);

struct RunOutputs {
    std::vector<metrics::MethodReport> reports;
    std::vector<std::string> files_written;
};

/// Runs every resolved method and writes reports, summary tables, telemetry,
/// audits, weights and the manifest under config.out_dir.
RunOutputs run_experiment(const RunConfig& config);

}  // namespace fedkd::runner
