#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedkd/smote.hpp"
#include "test_support.hpp"

using namespace fedkd;
using namespace fedkd::smote;
using testsup::random_matrix;

namespace {

Matrix line_points() {
    Matrix points(4, 1);
    points(0, 0) = 0.0;
    points(1, 0) = 1.0;
    points(2, 0) = 2.0;
    points(3, 0) = 10.0;
    return points;
}

/// Recovers r from z = v + r*(v - w) (or the interpolating form) coordinate
/// by coordinate; returns the max spread across coordinates through max_out.
double recover_r(std::span<const double> z, std::span<const double> v, std::span<const double> w,
                 bool extrapolate, double* spread_out) {
    double r_min = std::numeric_limits<double>::infinity();
    double r_max = -std::numeric_limits<double>::infinity();
    double r_any = 0.0;
    bool found = false;
    for (std::size_t c = 0; c < z.size(); ++c) {
        const double denom = extrapolate ? v[c] - w[c] : w[c] - v[c];
        if (std::abs(denom) < 1e-9) continue;  // degenerate coordinate
        const double r = (z[c] - v[c]) / denom;
        r_min = std::min(r_min, r);
        r_max = std::max(r_max, r);
        r_any = r;
        found = true;
    }
    *spread_out = found ? r_max - r_min : 0.0;
    return found ? r_any : 0.0;
}

}  // namespace

TEST_CASE("k_nearest_neighbors on a line with tie-breaking") {
    const Matrix points = line_points();
    const auto nn = k_nearest_neighbors(points, 1, 2);
    CHECK(nn == std::vector<std::size_t>{0, 2});  // tie at distance 1 -> ascending index

    const auto all = k_nearest_neighbors(points, 1, 3);
    CHECK(all == std::vector<std::size_t>{0, 2, 3});

    CHECK_THROWS_AS(k_nearest_neighbors(points, 1, 4), DataError);
    CHECK_THROWS_AS(k_nearest_neighbors(points, 9, 1), DataError);
    CHECK_THROWS_AS(k_nearest_neighbors(points, 0, 0), ConfigError);
}

TEST_CASE("k_nearest_neighbors matches the brute-force oracle") {
    RngStream rng(1001);
    const Matrix cloud = random_matrix(50, 3, rng, -5, 5);
    for (std::size_t q = 0; q < cloud.rows; ++q) {
        CHECK(k_nearest_neighbors(cloud, q, 5) == testsup::brute_force_knn(cloud, q, 5));
    }

    // random instances up to 200 points
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.below(199);
        const std::size_t dim = 1 + rng.below(4);
        const Matrix points = random_matrix(n, dim, rng, -3, 3);
        const int k = 1 + static_cast<int>(rng.below(n - 1));
        const std::size_t query = rng.below(n);
        CHECK(k_nearest_neighbors(points, query, k) ==
              testsup::brute_force_knn(points, query, k));
    }
}

TEST_CASE("generate_sample follows the formula as written") {
    const std::vector<double> v1 = {1.0, 2.0}, w1 = {3.0, 4.0};
    CHECK(generate_sample(v1, w1, 0.0) == std::vector<double>{1.0, 2.0});
    CHECK(generate_sample(v1, w1, 1.0) == std::vector<double>{-1.0, 0.0});

    const std::vector<double> v2 = {0.0, 0.0}, w2 = {2.0, 2.0};
    CHECK(generate_sample(v2, w2, 0.5) == std::vector<double>{-1.0, -1.0});
    // canonical interpolation mode
    CHECK(generate_sample(v2, w2, 0.5, false) == std::vector<double>{1.0, 1.0});

    const std::vector<double> w3 = {1.0};
    CHECK_THROWS_AS(generate_sample(v1, w3, 0.5), ShapeError);
    CHECK_THROWS_AS(generate_sample(v1, w1, 1.5), ConfigError);
}

TEST_CASE("generate_synthetic_dataset preserves class counts") {
    RngStream data_rng(2);
    Matrix x = random_matrix(200, 3, data_rng, -2, 2);
    Labels y(200);
    for (std::size_t i = 0; i < 100; ++i) y[i] = 0;
    for (std::size_t i = 100; i < 200; ++i) y[i] = 1;

    SmoteConfig cfg;
    RngStream rng(77);
    const SyntheticData synth = generate_synthetic_dataset(x, y, cfg, rng);
    CHECK(synth.x.rows == 200);
    CHECK(std::count(synth.y.begin(), synth.y.end(), 0) == 100);
    CHECK(std::count(synth.y.begin(), synth.y.end(), 1) == 100);

    // unbalanced counts are preserved too
    Labels skewed(200, 0);
    for (std::size_t i = 0; i < 80; ++i) skewed[i] = 1;
    RngStream rng2(78);
    const SyntheticData synth2 = generate_synthetic_dataset(x, skewed, cfg, rng2);
    CHECK(std::count(synth2.y.begin(), synth2.y.end(), 1) == 80);
    CHECK(std::count(synth2.y.begin(), synth2.y.end(), 0) == 120);

    // explicit per-class size
    SmoteConfig sized = cfg;
    sized.samples_per_class = 30;
    RngStream rng3(79);
    const SyntheticData synth3 = generate_synthetic_dataset(x, y, sized, rng3);
    CHECK(synth3.x.rows == 60);
}

TEST_CASE("generate_synthetic_dataset rejects degenerate classes") {
    RngStream data_rng(3);
    const Matrix x = random_matrix(50, 2, data_rng, -1, 1);
    const Labels single_class(50, 1);
    SmoteConfig cfg;
    RngStream rng(5);
    CHECK_THROWS_WITH_AS(generate_synthetic_dataset(x, single_class, cfg, rng, "dev_007"),
                         doctest::Contains("dev_007"), DataError);

    // a class with <= k members is an error that names the class
    Labels tiny(50, 0);
    for (std::size_t i = 0; i < 4; ++i) tiny[i] = 1;
    CHECK_THROWS_WITH_AS(generate_synthetic_dataset(x, tiny, cfg, rng, "dev_008"),
                         doctest::Contains("class 1"), DataError);
}

TEST_CASE("every synthetic sample satisfies the generation formula") {
    RngStream data_rng(4);
    const Matrix x = random_matrix(120, 3, data_rng, -3, 3);
    Labels y(120);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 2 == 0 ? 0 : 1;

    for (const bool extrapolate : {true, false}) {
        SmoteConfig cfg;
        cfg.extrapolate = extrapolate;
        RngStream rng(91);
        const SyntheticData synth = generate_synthetic_dataset(x, y, cfg, rng);
        for (std::size_t i = 0; i < synth.x.rows; ++i) {
            const SampleOrigin& origin = synth.origins[i];
            CHECK(y[origin.seed_row] == synth.y[i]);       // class inherited from the seed
            CHECK(y[origin.neighbor_row] == synth.y[i]);   // neighbor from the same class
            double spread = 0.0;
            const double r = recover_r(synth.x.row(i), x.row(origin.seed_row),
                                       x.row(origin.neighbor_row), extrapolate, &spread);
            CHECK(spread < 1e-9);
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
            CHECK(r == doctest::Approx(origin.r).epsilon(1e-9));
        }
    }
}

TEST_CASE("synthetic rows are collinear with their generating pair") {
    RngStream data_rng(6);
    const Matrix x = random_matrix(80, 3, data_rng, -2, 2);
    Labels y(80);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = i < 40 ? 0 : 1;
    SmoteConfig cfg;
    RngStream rng(13);
    const SyntheticData synth = generate_synthetic_dataset(x, y, cfg, rng);
    for (std::size_t i = 0; i < synth.x.rows; ++i) {
        const auto v = x.row(synth.origins[i].seed_row);
        const auto w = x.row(synth.origins[i].neighbor_row);
        const auto z = synth.x.row(i);
        // cross products of (z - v) and (w - v) vanish for collinear vectors
        double a0 = z[0] - v[0], a1 = z[1] - v[1], a2 = z[2] - v[2];
        double b0 = w[0] - v[0], b1 = w[1] - v[1], b2 = w[2] - v[2];
        CHECK(std::abs(a0 * b1 - a1 * b0) < 1e-9);
        CHECK(std::abs(a0 * b2 - a2 * b0) < 1e-9);
        CHECK(std::abs(a1 * b2 - a2 * b1) < 1e-9);
    }
}

TEST_CASE("generation is deterministic per stream seed") {
    RngStream data_rng(8);
    const Matrix x = random_matrix(60, 2, data_rng, -1, 1);
    Labels y(60);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 3 == 0 ? 1 : 0;
    SmoteConfig cfg;
    RngStream a = derive_stream(42, "dev", 0, "smote");
    RngStream b = derive_stream(42, "dev", 0, "smote");
    const SyntheticData first = generate_synthetic_dataset(x, y, cfg, a);
    const SyntheticData second = generate_synthetic_dataset(x, y, cfg, b);
    CHECK(first.x == second.x);
    CHECK(first.y == second.y);
}
