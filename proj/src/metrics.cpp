#include "fedkd/metrics/metrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace fedkd::metrics {

DeviceResult make_device_result(std::string device_id, Labels predictions, Labels labels,
                                bool fallback) {
    if (predictions.size() != labels.size()) {
        throw ShapeError("device result: prediction/label count mismatch for " + device_id);
    }
    if (predictions.empty()) throw DataError("device result: no test frames for " + device_id);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++correct;
    }
    DeviceResult result;
    result.device_id = std::move(device_id);
    result.predictions = std::move(predictions);
    result.labels = std::move(labels);
    result.accuracy = static_cast<double>(correct) / static_cast<double>(result.labels.size());
    result.fallback = fallback;
    return result;
}

double edge_accuracy(const MethodReport& report) {
    if (report.devices.empty()) throw ProtocolError("edge_accuracy: empty report");
    double total = 0.0;
    for (const DeviceResult& device : report.devices) total += device.accuracy;
    return total / static_cast<double>(report.devices.size());
}

double frame_accuracy(const MethodReport& report) {
    if (report.devices.empty()) throw ProtocolError("frame_accuracy: empty report");
    std::size_t correct = 0, total = 0;
    for (const DeviceResult& device : report.devices) {
        total += device.labels.size();
        for (std::size_t i = 0; i < device.labels.size(); ++i) {
            if (device.predictions[i] == device.labels[i]) ++correct;
        }
    }
    if (total == 0) throw ProtocolError("frame_accuracy: no frames");
    return static_cast<double>(correct) / static_cast<double>(total);
}

const std::array<const char*, DeltaTable::kBuckets>& DeltaTable::bucket_labels() {
    static const std::array<const char*, kBuckets> labels = {
        "<-25", "[-25,-15)", "[-15,-5)", "[-5,5)", "[5,15)", "[15,25)", ">=25"};
    return labels;
}

namespace {

std::size_t correct_count(const DeviceResult& device) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < device.labels.size(); ++i) {
        if (device.predictions[i] == device.labels[i]) ++correct;
    }
    return correct;
}

}  // namespace

DeltaTable accuracy_delta_table(const MethodReport& method_report,
                                const MethodReport& local_report) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> local_counts;  // correct, total
    for (const DeviceResult& device : local_report.devices) {
        local_counts[device.device_id] = {correct_count(device), device.labels.size()};
    }
    if (local_counts.size() != method_report.devices.size()) {
        throw ProtocolError("delta table: device sets differ");
    }
    DeltaTable table;
    for (const DeviceResult& device : method_report.devices) {
        const auto it = local_counts.find(device.device_id);
        if (it == local_counts.end()) {
            throw ProtocolError("delta table: device missing from local report: " +
                                device.device_id);
        }
        if (it->second.second != device.labels.size()) {
            throw ProtocolError("delta table: test split size differs for " + device.device_id);
        }
        // exact whenever the true delta is an integer, so boundary cases land
        // in their documented bucket
        const double delta =
            100.0 *
            (static_cast<double>(correct_count(device)) -
             static_cast<double>(it->second.first)) /
            static_cast<double>(device.labels.size());
        std::size_t bucket;
        if (delta < -25.0) {
            bucket = 0;
        } else if (delta < -15.0) {
            bucket = 1;
        } else if (delta < -5.0) {
            bucket = 2;
        } else if (delta < 5.0) {
            bucket = 3;
        } else if (delta < 15.0) {
            bucket = 4;
        } else if (delta < 25.0) {
            bucket = 5;
        } else {
            bucket = 6;
        }
        ++table.counts[bucket];
    }
    return table;
}

std::vector<ErrorRateGroup> error_rate_groups(const data::Scenario& scenario,
                                              const std::vector<MethodReport>& reports,
                                              const GroupingSpec& grouping) {
    if (scenario.devices.empty()) throw ProtocolError("error_rate_groups: empty scenario");

    std::vector<std::pair<double, std::string>> rated;  // (rate, id), sorted for determinism
    for (const data::DeviceDataset& device : scenario.devices) {
        rated.emplace_back(device.frame_error_rate, device.device_id);
    }
    std::sort(rated.begin(), rated.end());

    constexpr std::size_t kGroups = 4;
    std::vector<std::vector<std::string>> members(kGroups);
    std::vector<ErrorRateGroup> groups(kGroups);

    if (grouping.mode == GroupingSpec::Mode::Quartile) {
        const std::size_t n = rated.size();
        for (std::size_t g = 0; g < kGroups; ++g) {
            const std::size_t begin = g * n / kGroups;
            const std::size_t end = (g + 1) * n / kGroups;
            for (std::size_t i = begin; i < end; ++i) members[g].push_back(rated[i].second);
            groups[g].rate_lo = begin < end ? rated[begin].first : 0.0;
            groups[g].rate_hi = begin < end ? rated[end - 1].first : 0.0;
        }
    } else {
        if (grouping.edges.size() != 3 ||
            !std::is_sorted(grouping.edges.begin(), grouping.edges.end())) {
            throw ConfigError("fixed grouping needs 3 ascending edges");
        }
        for (const auto& [rate, id] : rated) {
            std::size_t g = 0;
            while (g < 3 && rate >= grouping.edges[g]) ++g;  // lower-inclusive
            members[g].push_back(id);
        }
        for (std::size_t g = 0; g < kGroups; ++g) {
            groups[g].rate_lo = g == 0 ? 0.0 : grouping.edges[g - 1];
            groups[g].rate_hi = g == 3 ? 1.0 : grouping.edges[g];
        }
    }

    for (std::size_t g = 0; g < kGroups; ++g) {
        groups[g].node_count = members[g].size();
        for (const MethodReport& report : reports) {
            std::map<std::string, double> by_id;
            for (const DeviceResult& device : report.devices) {
                by_id[device.device_id] = device.accuracy;
            }
            double total = 0.0;
            for (const std::string& id : members[g]) {
                const auto it = by_id.find(id);
                if (it == by_id.end()) {
                    throw ProtocolError("error_rate_groups: report " + report.method +
                                        " missing device " + id);
                }
                total += it->second;
            }
            const double mean =
                members[g].empty() ? 0.0 : total / static_cast<double>(members[g].size());
            groups[g].method_edge_accuracy.emplace_back(report.method, mean);
        }
    }
    return groups;
}

namespace {

std::string labels_to_string(const Labels& labels) {
    std::string out(labels.size(), '0');
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] ? '1' : '0';
    return out;
}

Labels labels_from_string(const std::string& text) {
    Labels out(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '0' && text[i] != '1') throw DataError("bad label character in report");
        out[i] = text[i] == '1' ? 1 : 0;
    }
    return out;
}

}  // namespace

nlohmann::ordered_json report_to_json(const MethodReport& report) {
    nlohmann::ordered_json out;
    out["method"] = report.method;
    out["seed"] = report.seed;
    out["config_fingerprint"] = report.config_fingerprint;
    nlohmann::ordered_json devices = nlohmann::ordered_json::array();
    for (const DeviceResult& device : report.devices) {
        nlohmann::ordered_json entry;
        entry["device_id"] = device.device_id;
        entry["n_test"] = device.labels.size();
        entry["accuracy"] = device.accuracy;
        entry["fallback"] = device.fallback;
        entry["predictions"] = labels_to_string(device.predictions);
        entry["labels"] = labels_to_string(device.labels);
        devices.push_back(std::move(entry));
    }
    out["devices"] = std::move(devices);
    return out;
}

MethodReport report_from_json(const nlohmann::json& parsed) {
    MethodReport report;
    report.method = parsed.at("method").get<std::string>();
    report.seed = parsed.at("seed").get<std::uint64_t>();
    report.config_fingerprint = parsed.at("config_fingerprint").get<std::string>();
    for (const auto& entry : parsed.at("devices")) {
        DeviceResult device = make_device_result(
            entry.at("device_id").get<std::string>(),
            labels_from_string(entry.at("predictions").get<std::string>()),
            labels_from_string(entry.at("labels").get<std::string>()),
            entry.at("fallback").get<bool>());
        report.devices.push_back(std::move(device));
    }
    return report;
}

std::string reports_to_csv(const std::vector<MethodReport>& reports) {
    std::ostringstream out;
    out << "method,device_id,n_test,accuracy,fallback\n";
    out.precision(17);
    for (const MethodReport& report : reports) {
        for (const DeviceResult& device : report.devices) {
            out << report.method << ',' << device.device_id << ',' << device.labels.size() << ','
                << device.accuracy << ',' << (device.fallback ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

nlohmann::ordered_json summary_to_json(const std::vector<MethodReport>& reports) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const MethodReport& report : reports) {
        nlohmann::ordered_json entry;
        entry["method"] = report.method;
        entry["edge_accuracy"] = edge_accuracy(report);
        entry["frame_accuracy"] = frame_accuracy(report);
        entry["devices"] = report.devices.size();
        out.push_back(std::move(entry));
    }
    return out;
}

nlohmann::ordered_json delta_tables_to_json(const std::vector<MethodReport>& reports,
                                            const MethodReport& local_report) {
    nlohmann::ordered_json out;
    out["baseline"] = local_report.method;
    out["buckets"] = DeltaTable::bucket_labels();
    nlohmann::ordered_json methods = nlohmann::ordered_json::array();
    for (const MethodReport& report : reports) {
        if (report.method == local_report.method) continue;
        const DeltaTable table = accuracy_delta_table(report, local_report);
        nlohmann::ordered_json entry;
        entry["method"] = report.method;
        entry["counts"] = table.counts;
        methods.push_back(std::move(entry));
    }
    out["methods"] = std::move(methods);
    return out;
}

nlohmann::ordered_json groups_to_json(const std::vector<ErrorRateGroup>& groups) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const ErrorRateGroup& group : groups) {
        nlohmann::ordered_json entry;
        entry["rate_lo"] = group.rate_lo;
        entry["rate_hi"] = group.rate_hi;
        entry["node_count"] = group.node_count;
        nlohmann::ordered_json methods;
        for (const auto& [method, accuracy] : group.method_edge_accuracy) {
            methods[method] = accuracy;
        }
        entry["edge_accuracy"] = std::move(methods);
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace fedkd::metrics
