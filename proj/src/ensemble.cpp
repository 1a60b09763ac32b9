#include "fedkd/ensemble.hpp"

#include <map>

namespace fedkd::ensemble {

int majority_vote(int a, int b, int c) {
    for (int v : {a, b, c}) {
        if (v != 0 && v != 1) throw DataError("majority_vote: vote outside {0,1}");
    }
    return a + b + c >= 2 ? 1 : 0;
}

metrics::MethodReport run_ensemble(const metrics::MethodReport& first,
                                   const metrics::MethodReport& second,
                                   const metrics::MethodReport& third) {
    std::map<std::string, const metrics::DeviceResult*> second_by_id, third_by_id;
    for (const auto& device : second.devices) second_by_id[device.device_id] = &device;
    for (const auto& device : third.devices) third_by_id[device.device_id] = &device;
    if (second_by_id.size() != first.devices.size() ||
        third_by_id.size() != first.devices.size()) {
        throw ProtocolError("ensemble: reports cover different device sets");
    }

    metrics::MethodReport out;
    out.method = "ensemble";
    out.config_fingerprint = first.config_fingerprint;
    out.seed = first.seed;
    for (const metrics::DeviceResult& a : first.devices) {
        const auto b_it = second_by_id.find(a.device_id);
        const auto c_it = third_by_id.find(a.device_id);
        if (b_it == second_by_id.end() || c_it == third_by_id.end()) {
            throw ProtocolError("ensemble: device missing from a member report: " + a.device_id);
        }
        const metrics::DeviceResult& b = *b_it->second;
        const metrics::DeviceResult& c = *c_it->second;
        if (a.labels != b.labels || a.labels != c.labels) {
            throw ProtocolError("ensemble: test frames misaligned for device " + a.device_id);
        }
        Labels votes(a.predictions.size());
        for (std::size_t i = 0; i < votes.size(); ++i) {
            votes[i] = majority_vote(a.predictions[i], b.predictions[i], c.predictions[i]);
        }
        out.devices.push_back(metrics::make_device_result(
            a.device_id, std::move(votes), a.labels, a.fallback || b.fallback || c.fallback));
    }
    return out;
}

}  // namespace fedkd::ensemble
