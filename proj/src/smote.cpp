#include "fedkd/smote.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fedkd::smote {

void SmoteConfig::validate() const {
    if (k < 1) throw ConfigError("smote k must be >= 1");
}

std::vector<std::size_t> k_nearest_neighbors(const Matrix& points, std::size_t query_index,
                                             int k) {
    if (query_index >= points.rows) throw DataError("k_nearest_neighbors: query out of range");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (static_cast<std::size_t>(k) >= points.rows) {
        throw DataError("k=" + std::to_string(k) + " needs more than " +
                        std::to_string(points.rows) + " points");
    }
    const std::span<const double> q = points.row(query_index);
    std::vector<std::pair<double, std::size_t>> by_distance;
    by_distance.reserve(points.rows - 1);
    for (std::size_t i = 0; i < points.rows; ++i) {
        if (i == query_index) continue;
        double d2 = 0.0;
        const std::span<const double> p = points.row(i);
        for (std::size_t c = 0; c < points.cols; ++c) {
            const double diff = p[c] - q[c];
            d2 += diff * diff;
        }
        by_distance.emplace_back(d2, i);
    }
    std::sort(by_distance.begin(), by_distance.end());
    std::vector<std::size_t> result(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < result.size(); ++i) result[i] = by_distance[i].second;
    return result;
}

std::vector<double> generate_sample(std::span<const double> v, std::span<const double> w, double r,
                                    bool extrapolate) {
    if (v.size() != w.size()) throw ShapeError("generate_sample: dimension mismatch");
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("generate_sample: r must be in [0,1]");
    std::vector<double> z(v.size());
    for (std::size_t c = 0; c < v.size(); ++c) {
        z[c] = extrapolate ? v[c] + r * (v[c] - w[c]) : v[c] + r * (w[c] - v[c]);
    }
    return z;
}

SyntheticData generate_synthetic_dataset(const Matrix& x, const Labels& y, const SmoteConfig& cfg,
                                         RngStream& rng, std::string_view device_id) {
    cfg.validate();
    if (x.rows != y.size()) throw ShapeError("generate_synthetic_dataset: row/label mismatch");
    require_binary(y);

    const std::string where = device_id.empty() ? std::string("dataset") : std::string(device_id);
    std::array<std::vector<std::size_t>, 2> class_rows;
    for (std::size_t i = 0; i < y.size(); ++i) {
        class_rows[static_cast<std::size_t>(y[i])].push_back(i);
    }
    for (int cls = 0; cls < 2; ++cls) {
        const auto& rows = class_rows[static_cast<std::size_t>(cls)];
        if (rows.empty()) {
            throw DataError("smote: " + where + " has no samples of class " +
                            std::to_string(cls));
        }
        if (rows.size() <= static_cast<std::size_t>(cfg.k)) {
            throw DataError("smote: " + where + " class " + std::to_string(cls) + " has only " +
                            std::to_string(rows.size()) + " samples, needs > k=" +
                            std::to_string(cfg.k));
        }
    }

    std::size_t total = 0;
    std::array<std::size_t, 2> per_class{};
    for (int cls = 0; cls < 2; ++cls) {
        per_class[static_cast<std::size_t>(cls)] =
            cfg.samples_per_class > 0 ? cfg.samples_per_class
                                      : class_rows[static_cast<std::size_t>(cls)].size();
        total += per_class[static_cast<std::size_t>(cls)];
    }

    SyntheticData out;
    out.x = Matrix(total, x.cols);
    out.y.resize(total);
    out.origins.resize(total);

    std::size_t row = 0;
    for (int cls = 0; cls < 2; ++cls) {
        const auto& rows = class_rows[static_cast<std::size_t>(cls)];

        // same-class point cloud plus its per-point neighbor lists
        Matrix cloud(rows.size(), x.cols);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), cloud.row(i).begin());
        }
        std::vector<std::vector<std::size_t>> neighbors(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            neighbors[i] = k_nearest_neighbors(cloud, i, cfg.k);
        }

        for (std::size_t n = 0; n < per_class[static_cast<std::size_t>(cls)]; ++n, ++row) {
            const std::size_t v_local = static_cast<std::size_t>(rng.below(rows.size()));
            const std::size_t w_local = neighbors[v_local][static_cast<std::size_t>(
                rng.below(static_cast<std::uint64_t>(cfg.k)))];
            const double r = rng.uniform01();
            const std::vector<double> z =
                generate_sample(cloud.row(v_local), cloud.row(w_local), r, cfg.extrapolate);
            std::copy(z.begin(), z.end(), out.x.row(row).begin());
            out.y[row] = cls;
            out.origins[row] = {rows[v_local], rows[w_local], r};
        }
    }
    return out;
}

}  // namespace fedkd::smote
