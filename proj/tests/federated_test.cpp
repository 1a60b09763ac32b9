#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "fedkd/data/synthetic.hpp"
#include "fedkd/distill.hpp"
#include "fedkd/federated.hpp"
#include "fedkd/metrics/metrics.hpp"
#include "test_support.hpp"

using namespace fedkd;
using namespace fedkd::fed;

namespace {

data::Scenario small_scenario(int devices, int frames, std::uint64_t seed, double shift = 0.4,
                               double sharpness = 12.0) {
    data::SyntheticConfig config;
    config.device_count = devices;
    config.frames_per_device = frames;
    config.feature_dim = 3;
    config.shift = shift;
    config.error_rate_lo = 0.30;
    config.error_rate_hi = 0.40;
    config.label_sharpness = sharpness;
    return data::generate_synthetic_scenario(config, seed);
}

bool bit_identical(const nn::ModelWeights& a, const nn::ModelWeights& b) {
    return a.layer_sizes() == b.layer_sizes() &&
           std::memcmp(a.params().data(), b.params().data(),
                       a.parameter_count() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("select_clients sizing and determinism") {
    RngStream rng(1);
    CHECK(select_clients(10, 0.1, rng).size() == 1);
    CHECK(select_clients(10, 1.0, rng) ==
          std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(select_clients(154, 0.1, rng).size() == 15);
    CHECK(select_clients(408, 0.1, rng).size() == 41);

    RngStream a = derive_stream(3, "", 4, "select");
    RngStream b = derive_stream(3, "", 4, "select");
    const auto first = select_clients(154, 0.1, a);
    CHECK(first == select_clients(154, 0.1, b));
    for (std::size_t i = 1; i < first.size(); ++i) CHECK(first[i] > first[i - 1]);

    CHECK_THROWS_AS(select_clients(10, 0.0, rng), ConfigError);
    CHECK_THROWS_AS(select_clients(10, 1.5, rng), ConfigError);
}

TEST_CASE("aggregate is the elementwise mean") {
    nn::ModelWeights a({2, 2}), b({2, 2});
    a.params()[0] = 1.0;
    a.params()[1] = 3.0;
    b.params()[0] = 3.0;
    b.params()[1] = 5.0;
    const nn::ModelWeights mean = aggregate({a, b});
    CHECK(mean.params()[0] == 2.0);
    CHECK(mean.params()[1] == 4.0);

    nn::ModelWeights c({2, 2});
    a.params()[0] = 0.0;
    b.params()[0] = 3.0;
    c.params()[0] = 6.0;
    CHECK(aggregate({a, b, c}).params()[0] == 3.0);

    const nn::ModelWeights single = nn::init_network({3, 4, 2}, 77);
    CHECK(bit_identical(aggregate({single}), single));

    CHECK_THROWS_AS(aggregate({}), ProtocolError);
    CHECK_THROWS_AS(aggregate({single, nn::ModelWeights({2, 2})}), ShapeError);
}

TEST_CASE("aggregate matches the mean oracle and ignores ordering") {
    RngStream rng(505);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t count = 2 + rng.below(6);
        std::vector<nn::ModelWeights> models;
        for (std::size_t m = 0; m < count; ++m) {
            nn::ModelWeights model({3, 4, 2});
            for (double& v : model.params()) v = rng.uniform(-5, 5);
            models.push_back(std::move(model));
        }
        const nn::ModelWeights mean = aggregate(models);
        for (std::size_t i = 0; i < mean.parameter_count(); ++i) {
            double expected = 0.0;
            for (const auto& model : models) expected += model.params()[i];
            expected /= static_cast<double>(count);
            CHECK(std::abs(mean.params()[i] - expected) <= 1e-12);
        }
        rng.shuffle(models);
        CHECK(bit_identical(aggregate(models), mean));
    }
}

TEST_CASE("weighted aggregation reduces to the mean on equal weights") {
    RngStream rng(9);
    std::vector<nn::ModelWeights> models;
    for (int m = 0; m < 3; ++m) {
        nn::ModelWeights model({2, 3, 2});
        for (double& v : model.params()) v = rng.uniform(-1, 1);
        models.push_back(std::move(model));
    }
    const auto mean = aggregate(models);
    const auto weighted = aggregate_weighted(models, {2.0, 2.0, 2.0});
    for (std::size_t i = 0; i < mean.parameter_count(); ++i) {
        CHECK(weighted.params()[i] == doctest::Approx(mean.params()[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(aggregate_weighted(models, {1.0, 1.0}), ShapeError);
    CHECK_THROWS_AS(aggregate_weighted(models, {0.0, 0.0, 0.0}), ConfigError);
}

TEST_CASE("single-client federation reproduces local training bit for bit") {
    const data::Scenario scenario = small_scenario(1, 120, 21);

    FedConfig config;
    config.rounds = 6;
    config.client_fraction = 1.0;
    config.local_epochs = 1;
    config.batch_size = 16;
    const FedResult fed = run_federated(scenario, config, 99, "fedavg");

    distill::KdConfig kd;
    kd.local_epochs = 6;  // matched budget: rounds x local_epochs
    kd.batch_size = 16;
    kd.student_hidden = config.hidden_layers;
    const nn::ModelWeights local = distill::train_local(scenario.devices[0], kd, 99);

    CHECK(bit_identical(fed.global, local));
}

TEST_CASE("two clones of one device aggregate to the shared update") {
    data::Scenario scenario = small_scenario(1, 80, 31);
    scenario.devices.push_back(scenario.devices[0]);  // identical data and id

    FedConfig config;
    config.rounds = 2;
    config.client_fraction = 1.0;
    config.batch_size = 16;
    const FedResult both = run_federated(scenario, config, 5, "fedavg");

    data::Scenario solo = scenario;
    solo.devices.pop_back();
    const FedResult one = run_federated(solo, config, 5, "fedavg");
    CHECK(bit_identical(both.global, one.global));
}

TEST_CASE("federated training learns a separable scenario") {
    const data::Scenario scenario = small_scenario(10, 800, 41, 0.3, 30.0);
    FedConfig config;
    config.rounds = 10;
    config.client_fraction = 0.5;
    config.local_epochs = 2;
    const FedResult result = run_federated(scenario, config, 7, "fedavg");
    CHECK(metrics::frame_accuracy(result.report) > 0.9);
    CHECK(result.report.devices.size() == 10);
    CHECK(result.rounds.size() == 10);
    for (const RoundTelemetry& round : result.rounds) {
        CHECK(round.client_ids.size() == 5);
        CHECK(std::isfinite(round.global_train_loss));
    }
}

TEST_CASE("dp-fed with zero noise and huge clip matches fedavg") {
    const data::Scenario scenario = small_scenario(3, 100, 51);
    FedConfig config;
    config.rounds = 3;
    config.client_fraction = 1.0;
    config.batch_size = 25;

    const FedResult plain = run_federated(scenario, config, 11, "fedavg");

    FedConfig dp_config = config;
    dp_config.privacy = Privacy::Dp;
    dp_config.dp_noise_std = 0.0;
    dp_config.dp_clip_norm = 1e9;
    const FedResult dp = run_federated(scenario, dp_config, 11, "dpfed");

    for (std::size_t i = 0; i < plain.global.parameter_count(); ++i) {
        CHECK(std::abs(plain.global.params()[i] - dp.global.params()[i]) < 1e-9);
    }
}

TEST_CASE("dp noise changes the trajectory") {
    const data::Scenario scenario = small_scenario(2, 80, 61);
    FedConfig config;
    config.rounds = 2;
    config.client_fraction = 1.0;
    config.privacy = Privacy::Dp;
    config.dp_noise_std = 0.01;
    const FedResult noisy = run_federated(scenario, config, 3, "dpfed");

    config.privacy = Privacy::None;
    const FedResult plain = run_federated(scenario, config, 3, "fedavg");
    CHECK_FALSE(bit_identical(noisy.global, plain.global));
    CHECK(all_finite(noisy.global.params()));
}

TEST_CASE("federated runs are deterministic and thread-count independent") {
    const data::Scenario scenario = small_scenario(6, 100, 71);
    FedConfig config;
    config.rounds = 3;
    config.client_fraction = 0.5;

    const FedResult serial = run_federated(scenario, config, 13, "fedavg");

    FedConfig threaded = config;
    threaded.threads = 4;
    const FedResult parallel = run_federated(scenario, threaded, 13, "fedavg");
    CHECK(bit_identical(serial.global, parallel.global));
    for (std::size_t d = 0; d < serial.report.devices.size(); ++d) {
        CHECK(serial.report.devices[d].predictions == parallel.report.devices[d].predictions);
    }
}

TEST_CASE("config validation") {
    const data::Scenario scenario = small_scenario(1, 40, 81);
    FedConfig config;
    config.rounds = 0;
    CHECK_THROWS_AS(run_federated(scenario, config, 1, "fedavg"), ConfigError);

    data::Scenario empty = scenario;
    empty.devices.clear();
    CHECK_THROWS_AS(run_federated(empty, FedConfig{}, 1, "fedavg"), ConfigError);
}
