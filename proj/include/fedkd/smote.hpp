#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fedkd/common.hpp"
#include "fedkd/rng.hpp"

namespace fedkd::smote {

struct SmoteConfig {
    int k = 5;
    /// Per-class output size: 0 means "match-real" (copy the real per-class
    /// counts); otherwise the explicit count for every class.
    std::size_t samples_per_class = 0;
    /// true: z = v + r*(v - w) (extrapolates away from the neighbor).
    /// false: canonical interpolation z = v + r*(w - v).
    bool extrapolate = true;

    void validate() const;
};

/// Indices of the k nearest points to points[query] by Euclidean distance,
/// query excluded, sorted ascending by distance with ties broken by
/// ascending index.
std::vector<std::size_t> k_nearest_neighbors(const Matrix& points, std::size_t query_index, int k);

std::vector<double> generate_sample(std::span<const double> v, std::span<const double> w, double r,
                                    bool extrapolate = true);

/// Which (seed, neighbor) input rows and which r produced a synthetic row.
struct SampleOrigin {
    std::size_t seed_row = 0;
    std::size_t neighbor_row = 0;
    double r = 0.0;
};

struct SyntheticData {
    Matrix x;
    Labels y;
    std::vector<SampleOrigin> origins;  // one per output row
};

/// Stratified per-class SMOTE over a device's training split. Each synthetic
/// sample inherits the class of its seed point; neighbor search is restricted
/// to same-class points; the seed is chosen uniformly, the neighbor uniformly
/// among its k nearest, and r uniformly in [0, 1).
SyntheticData generate_synthetic_dataset(const Matrix& x, const Labels& y, const SmoteConfig& cfg,
                                         RngStream& rng, std::string_view device_id = "");

}  // namespace fedkd::smote
