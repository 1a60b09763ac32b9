#pragma once

#include <string>
#include <vector>

#include "fedkd/data/scenario.hpp"

namespace fedkd::data::detail {

struct RawDevice {
    std::string id;
    Matrix x;
    Labels y;
};

/// Splits each device 1:1, fits z-score normalization on the pooled train
/// rows, drops constant features, applies the transform to both splits and
/// fills in per-device frame error rates.
Scenario finalize_scenario(std::string tag, std::vector<std::string> feature_names,
                           std::vector<RawDevice> devices, SplitMode split,
                           std::uint64_t split_seed, std::vector<std::string> warnings);

std::string format_double(double value);

}  // namespace fedkd::data::detail
