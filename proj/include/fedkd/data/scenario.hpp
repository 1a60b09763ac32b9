#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedkd/common.hpp"

namespace fedkd::data {

struct SplitData {
    Matrix x;
    Labels y;

    bool operator==(const SplitData&) const = default;
};

/// One edge node: identity, train/test partitions and its frame error rate
/// over all of its frames.
struct DeviceDataset {
    std::string device_id;
    std::string scenario_tag;  // scr4 | scr5 | synthetic
    SplitData train;
    SplitData test;
    double frame_error_rate = 0.0;

    bool operator==(const DeviceDataset&) const = default;
};

/// Per-feature z-score statistics fitted on pooled training rows only.
struct FeatureNormalization {
    std::vector<double> mean;
    std::vector<double> stddev;

    bool operator==(const FeatureNormalization&) const = default;
};

struct Scenario {
    std::string tag;
    std::vector<std::string> feature_names;
    FeatureNormalization normalization;
    std::vector<DeviceDataset> devices;
    std::vector<std::string> warnings;  // skipped files, dropped features

    std::size_t feature_dim() const { return feature_names.size(); }

    bool operator==(const Scenario& other) const {
        return tag == other.tag && feature_names == other.feature_names &&
               normalization == other.normalization && devices == other.devices;
    }
};

struct ScenarioStats {
    std::size_t device_count = 0;
    std::size_t total_frames = 0;
    double aggregate_error_rate = 0.0;
    std::vector<std::pair<std::string, double>> per_device_error_rate;
};

ScenarioStats dataset_stats(const Scenario& scenario);

enum class SplitMode { Chronological, SeededRandom };

/// Column roles for the per-node CSVs: feature | label | ignore | onehot.
/// An onehot column expands into one 0/1 indicator feature per distinct
/// value seen across all node files (named column=value, ascending).
struct SchemaConfig {
    std::map<std::string, std::string> columns;
    static SchemaConfig from_json_file(const std::string& path);
};

struct LoadOptions {
    SchemaConfig schema;
    SplitMode split = SplitMode::Chronological;
    std::uint64_t split_seed = 0;
    std::string scenario_tag = "scr4";
};

/// Loads one CSV per node from a directory: chronological (or seeded-random)
/// 1:1 split per device, odd row counts rounding toward train, z-score
/// normalization fitted on pooled train rows and applied to both splits.
Scenario load_scenario(const std::string& root_path, const LoadOptions& options);

/// Canonical serialization: index.json plus one CSV per device holding the
/// already-normalized features. save followed by load_saved_scenario
/// round-trips to an identical Scenario.
void save_scenario(const Scenario& scenario, const std::string& dir);
Scenario load_saved_scenario(const std::string& dir);

/// Shared frame CSV writer (same schema as real data); synthetic rows carry
/// a synthetic=1 provenance column.
void write_frames_csv(const std::string& path, const std::vector<std::string>& feature_names,
                      const Matrix& x, const Labels& y, const std::vector<std::string>* split,
                      bool synthetic);

}  // namespace fedkd::data
