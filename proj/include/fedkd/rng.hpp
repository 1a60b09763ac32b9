#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace fedkd {

/// Self-contained xoshiro256** stream. The standard library distributions are
/// implementation-defined, so all draws (uniform, normal, shuffle) are done
/// here to keep runs byte-identical across toolchains.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform01();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Gaussian via Box-Muller with a cached spare.
    double normal(double mean, double stddev);

    /// Unbiased integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    /// Fisher-Yates in-place shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Hashes (master seed, scope, index, purpose) into a stream seed.
///
/// Every consumer of randomness in the project derives its stream through
/// this single function, so device-level work can run in parallel and still
/// reproduce serial runs exactly. Streams in use:
///   - model init:        scope "",       index 0,      purpose "init-student" / "init-teacher"
///   - epoch shuffles:     scope device,   index epoch,  purpose phase tag ("train", "tfkd-kd", "finetune", "teacher")
///   - dp noise:           scope device,   index round,  purpose "dp-noise"
///   - client selection:   scope "",       index round,  purpose "select"
///   - smote generation:   scope device,   index 0,      purpose "smote"
///   - scenario synthesis: scope device,   index 0,      purpose "gen-*"
std::uint64_t derive_seed(std::uint64_t master, std::string_view scope, std::uint64_t index,
                          std::string_view purpose);

RngStream derive_stream(std::uint64_t master, std::string_view scope, std::uint64_t index,
                        std::string_view purpose);

}  // namespace fedkd
