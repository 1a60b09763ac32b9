#pragma once

#include <functional>

#include "fedkd/data/scenario.hpp"
#include "fedkd/metrics/report.hpp"
#include "fedkd/nn/train.hpp"
#include "fedkd/rng.hpp"

namespace fedkd::fed {

enum class Privacy { None, Dp };

struct FedConfig {
    int rounds = 10;
    double client_fraction = 0.1;  // selected count = max(1, round(fraction * N))
    int local_epochs = 1;
    int batch_size = 32;
    Privacy privacy = Privacy::None;
    double dp_clip_norm = 1.0;
    double dp_noise_std = 0.01;
    nn::OptimizerConfig optimizer{};  // sgd-momentum, lr 0.001, momentum 0.9
    std::vector<std::size_t> hidden_layers = {64, 64};
    /// Weight client models by training-sample count instead of the plain
    /// unweighted mean.
    bool weight_by_sample_count = false;
    int threads = 1;

    void validate() const;
};

/// Uniform sample without replacement of max(1, round(fraction * N)) device
/// indices, returned in ascending order.
std::vector<std::size_t> select_clients(std::size_t device_count, double fraction,
                                        RngStream& rng);

/// Elementwise mean with order-independent (per-coordinate sorted) summation,
/// so any permutation of the input list yields bit-identical output.
nn::ModelWeights aggregate(const std::vector<nn::ModelWeights>& models);
nn::ModelWeights aggregate_weighted(const std::vector<nn::ModelWeights>& models,
                                    const std::vector<double>& weights);

struct RoundTelemetry {
    int round = 0;
    std::vector<std::string> client_ids;
    double global_train_loss = 0.0;  // of the freshly aggregated model
};

using TelemetrySink = std::function<void(const RoundTelemetry&)>;

struct FedResult {
    metrics::MethodReport report;
    nn::ModelWeights global;
    std::vector<RoundTelemetry> rounds;
};

/// FedAvg / DP-Fed over a scenario. Per round: select clients, train each
/// locally from the current global model, aggregate in ascending device
/// order; after the last round the global model is evaluated on every
/// device's test split. Per-device optimizer state persists across rounds,
/// so a single-client federation reproduces plain local training.
FedResult run_federated(const data::Scenario& scenario, const FedConfig& config,
                        std::uint64_t seed, const std::string& method_name,
                        const TelemetrySink& sink = {});

}  // namespace fedkd::fed
