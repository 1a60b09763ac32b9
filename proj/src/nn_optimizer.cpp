#include "fedkd/nn/optimizer.hpp"

#include <cmath>

namespace fedkd::nn {

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (kind != OptimizerKind::Adam && !(momentum >= 0.0 && momentum < 1.0)) {
        throw ConfigError("momentum must be in [0,1)");
    }
    if (kind == OptimizerKind::DpSgd) {
        if (!(clip_norm > 0.0)) throw ConfigError("dp clip norm must be > 0");
        if (!(noise_std >= 0.0)) throw ConfigError("dp noise std must be >= 0");
    }
}

Optimizer::Optimizer(const OptimizerConfig& config, std::size_t parameter_count)
    : config_(config) {
    config_.validate();
    velocity_.assign(parameter_count, 0.0);
    if (config_.kind == OptimizerKind::Adam) {
        second_moment_.assign(parameter_count, 0.0);
    }
}

void Optimizer::step(ModelWeights& model, std::span<const double> grads) {
    if (grads.size() != model.parameter_count() || grads.size() != velocity_.size()) {
        throw ShapeError("optimizer step: gradient size mismatch");
    }
    std::span<double> params = model.params();

    if (config_.kind == OptimizerKind::Adam) {
        ++step_count_;
        const double b1 = config_.adam_beta1;
        const double b2 = config_.adam_beta2;
        const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
        const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            velocity_[i] = b1 * velocity_[i] + (1.0 - b1) * grads[i];
            second_moment_[i] = b2 * second_moment_[i] + (1.0 - b2) * grads[i] * grads[i];
            const double m_hat = velocity_[i] / corr1;
            const double v_hat = second_moment_[i] / corr2;
            params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.adam_epsilon);
        }
    } else {
        for (std::size_t i = 0; i < params.size(); ++i) {
            velocity_[i] = config_.momentum * velocity_[i] + grads[i];
            params[i] -= config_.learning_rate * velocity_[i];
        }
    }

    if (!all_finite(params)) {
        throw InternalError("non-finite model parameters after optimizer step");
    }
}

std::vector<double> dp_clip_and_noise(const std::vector<std::vector<double>>& per_example_grads,
                                      double clip_norm, double noise_std, RngStream& rng) {
    if (per_example_grads.empty()) throw ProtocolError("dp_clip_and_noise: no gradients");
    if (!(clip_norm > 0.0)) throw ConfigError("dp clip norm must be > 0");
    if (!(noise_std >= 0.0)) throw ConfigError("dp noise std must be >= 0");

    const std::size_t dim = per_example_grads.front().size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& grad : per_example_grads) {
        if (grad.size() != dim) throw ShapeError("dp_clip_and_noise: gradient size mismatch");
        double norm_sq = 0.0;
        for (double g : grad) norm_sq += g * g;
        const double norm = std::sqrt(norm_sq);
        const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
        for (std::size_t i = 0; i < dim; ++i) mean[i] += scale * grad[i];
    }
    const double count = static_cast<double>(per_example_grads.size());
    for (double& v : mean) v /= count;
    if (noise_std > 0.0) {
        for (double& v : mean) v += rng.normal(0.0, noise_std);
    }
    return mean;
}

}  // namespace fedkd::nn
