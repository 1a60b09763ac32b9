#pragma once

#include <array>
#include <json.hpp>

#include "fedkd/data/scenario.hpp"
#include "fedkd/metrics/report.hpp"

namespace fedkd::metrics {

/// Unweighted mean of per-device accuracies.
double edge_accuracy(const MethodReport& report);

/// Total correct frames over total frames, across all devices.
double frame_accuracy(const MethodReport& report);

/// Node counts for the accuracy delta (method - local, in percentage points)
/// against half-open, lower-inclusive buckets:
/// (-inf,-25) [-25,-15) [-15,-5) [-5,5) [5,15) [15,25) [25,inf)
struct DeltaTable {
    static constexpr std::size_t kBuckets = 7;
    static const std::array<const char*, kBuckets>& bucket_labels();
    std::array<std::size_t, kBuckets> counts{};
};

DeltaTable accuracy_delta_table(const MethodReport& method_report,
                                const MethodReport& local_report);

struct GroupingSpec {
    enum class Mode { Quartile, FixedEdges };
    Mode mode = Mode::Quartile;
    std::vector<double> edges;  // 3 ascending edges for FixedEdges
};

struct ErrorRateGroup {
    double rate_lo = 0.0;  // observed (quartile) or configured (fixed) bounds
    double rate_hi = 0.0;
    std::size_t node_count = 0;
    std::vector<std::pair<std::string, double>> method_edge_accuracy;
};

/// Per-group mean edge accuracy of every report, with devices grouped by
/// frame error rate: equal-count quartiles by default or lower-inclusive
/// fixed edges.
std::vector<ErrorRateGroup> error_rate_groups(const data::Scenario& scenario,
                                              const std::vector<MethodReport>& reports,
                                              const GroupingSpec& grouping);

nlohmann::ordered_json report_to_json(const MethodReport& report);
MethodReport report_from_json(const nlohmann::json& parsed);

/// One row per (method, device): method,device_id,n_test,accuracy,fallback.
std::string reports_to_csv(const std::vector<MethodReport>& reports);

nlohmann::ordered_json summary_to_json(const std::vector<MethodReport>& reports);
nlohmann::ordered_json delta_tables_to_json(const std::vector<MethodReport>& reports,
                                            const MethodReport& local_report);
nlohmann::ordered_json groups_to_json(const std::vector<ErrorRateGroup>& groups);

}  // namespace fedkd::metrics
