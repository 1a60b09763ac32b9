#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedkd/nn/model.hpp"
#include "fedkd/rng.hpp"

namespace fedkd::nn {

enum class OptimizerKind { SgdMomentum, Adam, DpSgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SgdMomentum;
    double learning_rate = 0.001;
    double momentum = 0.9;  // sgd-momentum / dp-sgd
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double clip_norm = 1.0;   // dp-sgd only
    double noise_std = 0.01;  // dp-sgd only

    void validate() const;
};

/// Per-model optimizer state; accumulators mirror the flat parameter layout.
class Optimizer {
public:
    Optimizer(const OptimizerConfig& config, std::size_t parameter_count);

    const OptimizerConfig& config() const { return config_; }

    /// Applies one update from an already-reduced gradient.
    /// SGD-momentum / dp-sgd: v <- mu*v + g; w <- w - lr*v.
    /// Adam: bias-corrected moments.
    void step(ModelWeights& model, std::span<const double> grads);

private:
    OptimizerConfig config_;
    std::vector<double> velocity_;  // sgd momentum buffer, or adam first moment
    std::vector<double> second_moment_;
    long step_count_ = 0;
};

/// Clips each per-example gradient to L2 norm <= clip_norm
/// (scale by min(1, C/||g||)), averages the batch, then adds i.i.d. Gaussian
/// noise of the given standard deviation to every coordinate.
std::vector<double> dp_clip_and_noise(const std::vector<std::vector<double>>& per_example_grads,
                                      double clip_norm, double noise_std, RngStream& rng);

}  // namespace fedkd::nn
