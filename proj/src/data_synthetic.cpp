#include "fedkd/data/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "data_internal.hpp"
#include "fedkd/rng.hpp"

namespace fedkd::data {

void SyntheticConfig::validate() const {
    if (device_count < 1) throw ConfigError("device_count must be >= 1");
    if (frames_per_device < 2) throw ConfigError("frames_per_device must be >= 2");
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
    if (!(shift >= 0.0)) throw ConfigError("shift must be >= 0");
    if (!(error_rate_lo > 0.0 && error_rate_hi < 1.0 && error_rate_lo <= error_rate_hi)) {
        throw ConfigError("error rate range must satisfy 0 < lo <= hi < 1");
    }
    if (!(label_sharpness > 0.0)) throw ConfigError("label_sharpness must be > 0");
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Offset b with mean_i sigmoid(sharpness * (s_i - b)) == target.
double calibrate_offset(const std::vector<double>& scores, double sharpness, double target) {
    auto mean_rate = [&](double b) {
        double total = 0.0;
        for (double s : scores) total += sigmoid(sharpness * (s - b));
        return total / static_cast<double>(scores.size());
    };
    double lo = -1e3, hi = 1e3;  // rate is decreasing in b
    for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mean_rate(mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

Scenario generate_synthetic_scenario(const SyntheticConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t dim = static_cast<std::size_t>(config.feature_dim);
    const std::size_t frames = static_cast<std::size_t>(config.frames_per_device);

    // fixed score direction and mixture separation, shared by all devices
    std::vector<double> score_dir(dim), component_offset(dim);
    const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t f = 0; f < dim; ++f) {
        score_dir[f] = (f % 2 == 0 ? 1.0 : -1.0) * inv_sqrt_dim;
        component_offset[f] = 1.2 * score_dir[f];
    }

    std::vector<std::string> feature_names(dim);
    for (std::size_t f = 0; f < dim; ++f) feature_names[f] = "f" + std::to_string(f);

    std::vector<detail::RawDevice> devices;
    devices.reserve(static_cast<std::size_t>(config.device_count));
    for (int d = 0; d < config.device_count; ++d) {
        char id[32];
        std::snprintf(id, sizeof(id), "dev_%03d", d);

        RngStream device_rng = derive_stream(seed, id, 0, "gen-device");
        std::vector<double> center(dim);
        for (double& c : center) c = config.shift * device_rng.normal(0.0, 1.0);
        const double target_rate = device_rng.uniform(config.error_rate_lo, config.error_rate_hi);

        RngStream frame_rng = derive_stream(seed, id, 0, "gen-frames");
        detail::RawDevice raw;
        raw.id = id;
        raw.x = Matrix(frames, dim);
        raw.y.resize(frames);
        std::vector<double> scores(frames);
        for (std::size_t r = 0; r < frames; ++r) {
            const double sign = frame_rng.below(2) == 0 ? -1.0 : 1.0;
            double score = 0.0;
            for (std::size_t f = 0; f < dim; ++f) {
                const double v = center[f] + sign * component_offset[f] +
                                 frame_rng.normal(0.0, 1.0);
                raw.x(r, f) = v;
                score += score_dir[f] * v;
            }
            scores[r] = score;
        }

        const double offset = calibrate_offset(scores, config.label_sharpness, target_rate);
        RngStream label_rng = derive_stream(seed, id, 0, "gen-labels");
        for (std::size_t r = 0; r < frames; ++r) {
            const double p_error = sigmoid(config.label_sharpness * (scores[r] - offset));
            raw.y[r] = label_rng.uniform01() < p_error ? 1 : 0;
        }
        devices.push_back(std::move(raw));
    }

    return detail::finalize_scenario(config.tag, std::move(feature_names), std::move(devices),
                                     SplitMode::Chronological, 0, {});
}

}  // namespace fedkd::data
