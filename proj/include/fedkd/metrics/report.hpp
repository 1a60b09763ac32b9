#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedkd/common.hpp"

namespace fedkd::metrics {

struct DeviceResult {
    std::string device_id;
    Labels predictions;
    Labels labels;
    double accuracy = 0.0;
    bool fallback = false;  // device fell back to plain local training
};

/// Makes a result with the accuracy recomputed from the vectors.
DeviceResult make_device_result(std::string device_id, Labels predictions, Labels labels,
                                bool fallback = false);

/// Per-device predictions and accuracies for one method over one scenario.
struct MethodReport {
    std::string method;
    std::vector<DeviceResult> devices;
    std::string config_fingerprint;
    std::uint64_t seed = 0;
};

}  // namespace fedkd::metrics
