#include "fedkd/federated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "fedkd/evaluate.hpp"
#include "fedkd/nn/losses.hpp"

namespace fedkd::fed {

void FedConfig::validate() const {
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (!(client_fraction > 0.0 && client_fraction <= 1.0)) {
        throw ConfigError("client_fraction must be in (0,1]");
    }
    if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (privacy == Privacy::Dp) {
        if (!(dp_clip_norm > 0.0)) throw ConfigError("dp clip norm must be > 0");
        if (!(dp_noise_std >= 0.0)) throw ConfigError("dp noise std must be >= 0");
    }
    optimizer.validate();
}

std::vector<std::size_t> select_clients(std::size_t device_count, double fraction,
                                        RngStream& rng) {
    if (device_count == 0) throw ConfigError("select_clients: no devices");
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("client_fraction must be in (0,1]");
    }
    const std::size_t want = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(fraction * static_cast<double>(device_count))));
    const std::size_t count = std::min(want, device_count);

    std::vector<std::size_t> pool(device_count);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(device_count - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> selected(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(selected.begin(), selected.end());
    return selected;
}

namespace {

void check_same_shapes(const std::vector<nn::ModelWeights>& models) {
    if (models.empty()) throw ProtocolError("aggregate: empty model list");
    for (const nn::ModelWeights& model : models) {
        if (!model.same_shape(models.front())) throw ShapeError("aggregate: shape mismatch");
    }
}

}  // namespace

nn::ModelWeights aggregate(const std::vector<nn::ModelWeights>& models) {
    check_same_shapes(models);
    if (models.size() == 1) return models.front();
    nn::ModelWeights out = models.front();
    std::span<double> dst = out.params();
    const double inv_n = 1.0 / static_cast<double>(models.size());
    std::vector<double> column(models.size());
    for (std::size_t i = 0; i < dst.size(); ++i) {
        for (std::size_t m = 0; m < models.size(); ++m) column[m] = models[m].params()[i];
        std::sort(column.begin(), column.end());
        double total = 0.0;
        for (double v : column) total += v;
        dst[i] = total * inv_n;
    }
    return out;
}

nn::ModelWeights aggregate_weighted(const std::vector<nn::ModelWeights>& models,
                                    const std::vector<double>& weights) {
    check_same_shapes(models);
    if (models.size() != weights.size()) throw ShapeError("aggregate_weighted: weight count");
    double weight_total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ConfigError("aggregate_weighted: negative weight");
        weight_total += w;
    }
    if (!(weight_total > 0.0)) throw ConfigError("aggregate_weighted: zero total weight");
    if (models.size() == 1) return models.front();

    nn::ModelWeights out = models.front();
    std::span<double> dst = out.params();
    std::vector<double> column(models.size());
    for (std::size_t i = 0; i < dst.size(); ++i) {
        for (std::size_t m = 0; m < models.size(); ++m) {
            column[m] = weights[m] * models[m].params()[i];
        }
        std::sort(column.begin(), column.end());
        double total = 0.0;
        for (double v : column) total += v;
        dst[i] = total / weight_total;
    }
    return out;
}

FedResult run_federated(const data::Scenario& scenario, const FedConfig& config,
                        std::uint64_t seed, const std::string& method_name,
                        const TelemetrySink& sink) {
    config.validate();
    if (scenario.devices.empty()) throw ConfigError("run_federated: scenario has no devices");

    std::vector<std::size_t> arch;
    arch.push_back(scenario.feature_dim());
    arch.insert(arch.end(), config.hidden_layers.begin(), config.hidden_layers.end());
    arch.push_back(nn::kClassCount);

    nn::ModelWeights global = nn::init_network(arch, derive_seed(seed, "", 0, "init-student"));

    // client optimizer state lives for the whole run
    std::unordered_map<std::size_t, nn::Optimizer> client_optimizers;

    FedResult result;
    for (int round = 0; round < config.rounds; ++round) {
        RngStream select_rng = derive_stream(seed, "", static_cast<std::uint64_t>(round), "select");
        const std::vector<std::size_t> clients =
            select_clients(scenario.devices.size(), config.client_fraction, select_rng);

        for (std::size_t client : clients) {
            client_optimizers.try_emplace(client, config.optimizer, global.parameter_count());
        }

        std::vector<nn::ModelWeights> locals(clients.size());
        parallel_for(clients.size(), config.threads, [&](std::size_t slot) {
            const std::size_t client = clients[slot];
            const data::DeviceDataset& device = scenario.devices[client];
            nn::ModelWeights local = global;

            nn::TrainPlan plan;
            plan.loss = nn::LossKind::PlainCrossEntropy;
            plan.epochs = config.local_epochs;
            plan.batch_size = config.batch_size;
            plan.phase = "train";
            plan.first_epoch_index = round * config.local_epochs;
            if (config.privacy == Privacy::Dp) {
                plan.dp = nn::DpParams{config.dp_clip_norm, config.dp_noise_std};
            }
            train_minibatch(local, client_optimizers.at(client), device.train.x, device.train.y,
                            plan, seed, device.device_id);
            locals[slot] = std::move(local);
        });

        if (config.weight_by_sample_count) {
            std::vector<double> weights(clients.size());
            for (std::size_t slot = 0; slot < clients.size(); ++slot) {
                weights[slot] =
                    static_cast<double>(scenario.devices[clients[slot]].train.y.size());
            }
            global = aggregate_weighted(locals, weights);
        } else {
            global = aggregate(locals);
        }

        RoundTelemetry telemetry;
        telemetry.round = round;
        double loss_total = 0.0;
        for (std::size_t client : clients) {
            const data::DeviceDataset& device = scenario.devices[client];
            telemetry.client_ids.push_back(device.device_id);
            const Matrix probs =
                nn::softmax_temperature(nn::forward(global, device.train.x), 1.0);
            loss_total += nn::cross_entropy(probs, device.train.y);
        }
        telemetry.global_train_loss = loss_total / static_cast<double>(clients.size());
        if (sink) sink(telemetry);
        result.rounds.push_back(std::move(telemetry));
    }

    result.report.method = method_name;
    result.report.seed = seed;
    result.report.devices.resize(scenario.devices.size());
    parallel_for(scenario.devices.size(), config.threads, [&](std::size_t d) {
        result.report.devices[d] = evaluate_device(global, scenario.devices[d]);
    });
    result.global = std::move(global);
    return result;
}

}  // namespace fedkd::fed
