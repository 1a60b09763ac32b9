#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedkd/ensemble.hpp"
#include "fedkd/metrics/metrics.hpp"
#include "test_support.hpp"

using namespace fedkd;
using namespace fedkd::metrics;

namespace {

DeviceResult device_with_accuracy(const std::string& id, std::size_t frames,
                                  std::size_t correct) {
    Labels labels(frames, 0);
    Labels predictions(frames, 1);
    for (std::size_t i = 0; i < correct; ++i) predictions[i] = 0;
    return make_device_result(id, predictions, labels);
}

MethodReport report_from_accuracies(const std::string& method,
                                    const std::vector<std::pair<std::size_t, std::size_t>>&
                                        frames_correct) {
    MethodReport report;
    report.method = method;
    for (std::size_t d = 0; d < frames_correct.size(); ++d) {
        report.devices.push_back(device_with_accuracy("dev_" + std::to_string(d),
                                                      frames_correct[d].first,
                                                      frames_correct[d].second));
    }
    return report;
}

MethodReport random_report(const std::string& method, std::size_t devices, std::size_t frames,
                           RngStream& rng) {
    MethodReport report;
    report.method = method;
    for (std::size_t d = 0; d < devices; ++d) {
        Labels labels(frames), predictions(frames);
        for (std::size_t i = 0; i < frames; ++i) {
            labels[i] = rng.below(2) ? 1 : 0;
            predictions[i] = rng.below(2) ? 1 : 0;
        }
        report.devices.push_back(
            make_device_result("dev_" + std::to_string(d), predictions, labels));
    }
    return report;
}

}  // namespace

TEST_CASE("edge accuracy is the unweighted device mean") {
    const MethodReport report = report_from_accuracies("m", {{10, 5}, {30, 30}});
    CHECK(report.devices[0].accuracy == 0.5);
    CHECK(report.devices[1].accuracy == 1.0);
    CHECK(edge_accuracy(report) == doctest::Approx(0.75));

    const MethodReport single = report_from_accuracies("m", {{8, 6}});
    CHECK(edge_accuracy(single) == doctest::Approx(0.75));

    const MethodReport perfect = report_from_accuracies("m", {{4, 4}, {6, 6}, {2, 2}});
    CHECK(edge_accuracy(perfect) == 1.0);

    CHECK_THROWS_AS(edge_accuracy(MethodReport{}), ProtocolError);
}

TEST_CASE("frame accuracy pools all frames") {
    const MethodReport report = report_from_accuracies("m", {{10, 5}, {30, 30}});
    CHECK(frame_accuracy(report) == doctest::Approx(35.0 / 40.0));

    // equal device sizes collapse to edge accuracy
    const MethodReport equal = report_from_accuracies("m", {{20, 13}, {20, 19}});
    CHECK(frame_accuracy(equal) == doctest::Approx(edge_accuracy(equal)).epsilon(1e-12));

    CHECK_THROWS_AS(frame_accuracy(MethodReport{}), ProtocolError);
}

TEST_CASE("frame accuracy equals the size-weighted mean of device accuracies") {
    RngStream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        MethodReport report;
        report.method = "m";
        double weighted = 0.0;
        std::size_t total = 0;
        for (int d = 0; d < 6; ++d) {
            const std::size_t frames = 5 + rng.below(40);
            const std::size_t correct = rng.below(frames + 1);
            report.devices.push_back(
                device_with_accuracy("dev_" + std::to_string(d), frames, correct));
            weighted += static_cast<double>(frames) * report.devices.back().accuracy;
            total += frames;
        }
        CHECK(frame_accuracy(report) ==
              doctest::Approx(weighted / static_cast<double>(total)).epsilon(1e-12));
    }
}

TEST_CASE("delta table boundaries and hand-built fixture") {
    // local baseline: every device 50% on 100 frames
    MethodReport local = report_from_accuracies(
        "local", std::vector<std::pair<std::size_t, std::size_t>>(10, {100, 50}));
    // deltas in percentage points: -30,-25,-16,-15,-5,-4.99..,0,5,15,25
    const std::vector<std::size_t> correct = {20, 25, 34, 35, 45, 46, 50, 55, 65, 75};
    MethodReport method;
    method.method = "m";
    for (std::size_t d = 0; d < correct.size(); ++d) {
        method.devices.push_back(
            device_with_accuracy("dev_" + std::to_string(d), 100, correct[d]));
    }
    const DeltaTable table = accuracy_delta_table(method, local);
    // -30 -> <-25 | -25,-16 -> [-25,-15) | -15,-5 -> [-15,-5) is only -15;
    // wait: -5 belongs to [-5,5): recount by hand:
    //   -30: bucket 0
    //   -25: bucket 1 (lower-inclusive)
    //   -16: bucket 1
    //   -15: bucket 2 (lower-inclusive)
    //    -5: bucket 3 (lower-inclusive)
    //    -4: bucket 3
    //     0: bucket 3
    //     5: bucket 4 (lower-inclusive)
    //    15: bucket 5 (lower-inclusive)
    //    25: bucket 6 (lower-inclusive)
    CHECK(table.counts == std::array<std::size_t, 7>{1, 2, 1, 3, 1, 1, 1});

    std::size_t total = 0;
    for (std::size_t c : table.counts) total += c;
    CHECK(total == method.devices.size());

    SUBCASE("misaligned devices are rejected") {
        method.devices.pop_back();
        CHECK_THROWS_AS(accuracy_delta_table(method, local), ProtocolError);
    }
}

TEST_CASE("delta bucket counts always sum to the device count") {
    RngStream rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t devices = 1 + rng.below(30);
        MethodReport local, method;
        local.method = "local";
        method.method = "m";
        for (std::size_t d = 0; d < devices; ++d) {
            const std::size_t frames = 100;
            local.devices.push_back(device_with_accuracy("dev_" + std::to_string(d), frames,
                                                         rng.below(frames + 1)));
            method.devices.push_back(device_with_accuracy("dev_" + std::to_string(d), frames,
                                                          rng.below(frames + 1)));
        }
        const DeltaTable table = accuracy_delta_table(method, local);
        std::size_t total = 0;
        for (std::size_t c : table.counts) total += c;
        CHECK(total == devices);
    }
}

namespace {

data::Scenario scenario_with_rates(const std::vector<double>& rates) {
    data::Scenario scenario;
    scenario.tag = "synthetic";
    scenario.feature_names = {"f0"};
    for (std::size_t d = 0; d < rates.size(); ++d) {
        data::DeviceDataset device;
        device.device_id = "dev_" + std::to_string(d);
        device.frame_error_rate = rates[d];
        device.train.x = Matrix(1, 1);
        device.train.y = {0};
        device.test.x = Matrix(1, 1);
        device.test.y = {0};
        scenario.devices.push_back(std::move(device));
    }
    return scenario;
}

}  // namespace

TEST_CASE("error rate groups: quartiles and fixed edges") {
    const std::vector<double> rates = {0.05, 0.1, 0.2, 0.3, 0.45, 0.5, 0.7, 0.9};
    const data::Scenario scenario = scenario_with_rates(rates);
    MethodReport report;
    report.method = "m";
    for (std::size_t d = 0; d < rates.size(); ++d) {
        report.devices.push_back(
            device_with_accuracy("dev_" + std::to_string(d), 10, d));  // accuracy d/10
    }

    SUBCASE("quartiles split 8 devices into groups of 2") {
        const auto groups = error_rate_groups(scenario, {report}, {});
        REQUIRE(groups.size() == 4);
        for (const auto& group : groups) CHECK(group.node_count == 2);
        // devices sorted by rate match insertion order here
        CHECK(groups[0].method_edge_accuracy[0].second == doctest::Approx(0.05));
        CHECK(groups[3].method_edge_accuracy[0].second == doctest::Approx(0.65));
        CHECK(groups[0].rate_lo == doctest::Approx(0.05));
        CHECK(groups[0].rate_hi == doctest::Approx(0.1));
    }

    SUBCASE("fixed edges are lower-inclusive") {
        GroupingSpec spec;
        spec.mode = GroupingSpec::Mode::FixedEdges;
        spec.edges = {0.25, 0.5, 0.75};
        const auto groups = error_rate_groups(scenario, {report}, spec);
        // 0.05,0.1,0.2 -> group 0; 0.3,0.45 -> group 1; 0.5,0.7 -> group 2; 0.9 -> group 3
        CHECK(groups[0].node_count == 3);
        CHECK(groups[1].node_count == 2);
        CHECK(groups[2].node_count == 2);  // 0.5 lands in [0.5, 0.75)
        CHECK(groups[3].node_count == 1);
    }

    SUBCASE("matches a brute-force regrouping and ignores device order") {
        const auto groups = error_rate_groups(scenario, {report}, {});
        data::Scenario shuffled = scenario;
        MethodReport shuffled_report = report;
        std::reverse(shuffled.devices.begin(), shuffled.devices.end());
        std::reverse(shuffled_report.devices.begin(), shuffled_report.devices.end());
        const auto regrouped = error_rate_groups(shuffled, {shuffled_report}, {});
        for (std::size_t g = 0; g < 4; ++g) {
            CHECK(groups[g].node_count == regrouped[g].node_count);
            CHECK(groups[g].method_edge_accuracy[0].second ==
                  regrouped[g].method_edge_accuracy[0].second);
        }
    }
}

TEST_CASE("metrics are invariant to device ordering") {
    RngStream rng(11);
    MethodReport report = random_report("m", 7, 50, rng);
    const double edge = edge_accuracy(report);
    const double frame = frame_accuracy(report);
    std::reverse(report.devices.begin(), report.devices.end());
    CHECK(edge_accuracy(report) == edge);
    CHECK(frame_accuracy(report) == frame);
}

TEST_CASE("majority vote") {
    CHECK(fedkd::ensemble::majority_vote(0, 0, 1) == 0);
    CHECK(fedkd::ensemble::majority_vote(1, 1, 1) == 1);
    CHECK(fedkd::ensemble::majority_vote(1, 0, 1) == 1);
    CHECK(fedkd::ensemble::majority_vote(0, 0, 0) == 0);
    CHECK_THROWS_AS(fedkd::ensemble::majority_vote(2, 0, 0), DataError);
}

TEST_CASE("run_ensemble: identity, domination and oracle equality") {
    RngStream rng(13);
    const MethodReport a = random_report("a", 4, 250, rng);

    SUBCASE("three identical reports reproduce the input") {
        const MethodReport out = fedkd::ensemble::run_ensemble(a, a, a);
        for (std::size_t d = 0; d < a.devices.size(); ++d) {
            CHECK(out.devices[d].predictions == a.devices[d].predictions);
            CHECK(out.devices[d].accuracy == a.devices[d].accuracy);
        }
    }

    SUBCASE("two always-correct members dominate one always-wrong") {
        MethodReport right1 = a, right2 = a, wrong = a;
        for (auto& device : right1.devices) device.predictions = device.labels;
        for (auto& device : right2.devices) device.predictions = device.labels;
        for (auto& device : wrong.devices) {
            for (std::size_t i = 0; i < device.predictions.size(); ++i) {
                device.predictions[i] = 1 - device.labels[i];
            }
        }
        const MethodReport out = fedkd::ensemble::run_ensemble(right1, wrong, right2);
        CHECK(edge_accuracy(out) == 1.0);
    }

    SUBCASE("matches the per-frame vote oracle on a random fixture") {
        // three reports over the same labels
        MethodReport b = a, c = a;
        for (auto& device : b.devices) {
            for (auto& p : device.predictions) p = rng.below(2) ? 1 : 0;
        }
        for (auto& device : c.devices) {
            for (auto& p : device.predictions) p = rng.below(2) ? 1 : 0;
        }
        b.devices[0].predictions[0] = 1 - b.devices[0].predictions[0];  // keep them distinct
        const MethodReport out = fedkd::ensemble::run_ensemble(a, b, c);
        for (std::size_t d = 0; d < a.devices.size(); ++d) {
            for (std::size_t i = 0; i < a.devices[d].predictions.size(); ++i) {
                const int votes = a.devices[d].predictions[i] + b.devices[d].predictions[i] +
                                  c.devices[d].predictions[i];
                CHECK(out.devices[d].predictions[i] == (votes >= 2 ? 1 : 0));
            }
        }

        // vote is symmetric under permutations of the members
        const MethodReport permuted = fedkd::ensemble::run_ensemble(c, a, b);
        for (std::size_t d = 0; d < out.devices.size(); ++d) {
            CHECK(out.devices[d].predictions == permuted.devices[d].predictions);
        }
    }

    SUBCASE("misaligned frames are rejected") {
        MethodReport truncated = a;
        truncated.devices[0].labels.pop_back();
        truncated.devices[0].predictions.pop_back();
        CHECK_THROWS_AS(fedkd::ensemble::run_ensemble(a, truncated, a), ProtocolError);

        MethodReport renamed = a;
        renamed.devices[0].device_id = "other";
        CHECK_THROWS_AS(fedkd::ensemble::run_ensemble(a, renamed, a), ProtocolError);
    }
}

TEST_CASE("report serialization round-trips and is deterministic") {
    RngStream rng(17);
    MethodReport report = random_report("kd_smote", 3, 60, rng);
    report.seed = 99;
    report.config_fingerprint = "abc123";
    report.devices[1].fallback = true;

    const auto json = report_to_json(report);
    const auto again = report_to_json(report);
    CHECK(json.dump() == again.dump());

    const MethodReport parsed = report_from_json(nlohmann::json::parse(json.dump()));
    CHECK(parsed.method == report.method);
    CHECK(parsed.seed == report.seed);
    CHECK(parsed.devices.size() == report.devices.size());
    for (std::size_t d = 0; d < parsed.devices.size(); ++d) {
        CHECK(parsed.devices[d].predictions == report.devices[d].predictions);
        CHECK(parsed.devices[d].labels == report.devices[d].labels);
        CHECK(parsed.devices[d].accuracy == report.devices[d].accuracy);
        CHECK(parsed.devices[d].fallback == report.devices[d].fallback);
    }
    CHECK(report_to_json(parsed).dump() == json.dump());
}

TEST_CASE("csv export shape") {
    RngStream rng(19);
    const MethodReport a = random_report("local", 5, 10, rng);
    const MethodReport b = random_report("fedavg", 5, 10, rng);
    const std::string csv = reports_to_csv({a, b});
    const std::size_t lines = static_cast<std::size_t>(
        std::count(csv.begin(), csv.end(), '\n'));
    CHECK(lines == 1 + 5 * 2);  // header + devices x methods
}
