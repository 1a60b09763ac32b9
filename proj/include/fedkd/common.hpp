#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedkd {

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError -> 2, DataError/SchemaError -> 3, everything else -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct SchemaError : DataError {
    using DataError::DataError;
};
struct ProtocolError : Error {
    using Error::Error;
};
struct InternalError : Error {
    using Error::Error;
};

/// Dense row-major matrix of doubles. Used for feature batches, logits and
/// probability rows alike.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool empty() const { return rows == 0 || cols == 0; }

    bool operator==(const Matrix& other) const = default;
};

/// Binary labels, one per matrix row. 1 marks a frame error.
using Labels = std::vector<int>;

inline void require_binary(const Labels& y) {
    for (int v : y) {
        if (v != 0 && v != 1) {
            throw DataError("label outside {0,1}: " + std::to_string(v));
        }
    }
}

inline bool all_finite(std::span<const double> xs) {
    for (double x : xs) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

/// Runs fn(0..n-1), using up to `threads` workers. Each index must write only
/// its own outputs; results are then identical for any thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// FNV-1a over a byte string, used for config fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);

std::string to_hex(std::uint64_t value);

}  // namespace fedkd
