#pragma once

#include "fedkd/data/scenario.hpp"
#include "fedkd/metrics/report.hpp"
#include "fedkd/nn/model.hpp"

namespace fedkd {

/// Runs the model over the device's test split.
inline metrics::DeviceResult evaluate_device(const nn::ModelWeights& model,
                                             const data::DeviceDataset& device,
                                             bool fallback = false) {
    return metrics::make_device_result(device.device_id, nn::predict(model, device.test.x),
                                       device.test.y, fallback);
}

}  // namespace fedkd
