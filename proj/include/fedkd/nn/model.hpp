#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedkd/common.hpp"

namespace fedkd::nn {

constexpr std::size_t kClassCount = 2;

/// Feed-forward network parameters stored as one flat vector.
///
/// Canonical parameter order: for each layer l, the weight matrix
/// (sizes[l+1] x sizes[l], row-major) followed by the bias (sizes[l+1]).
/// Optimizer state, gradients and the weight file format all follow this
/// order.
class ModelWeights {
public:
    ModelWeights() = default;
    explicit ModelWeights(std::vector<std::size_t> layer_sizes);

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t layer_count() const { return sizes_.empty() ? 0 : sizes_.size() - 1; }
    std::size_t input_dim() const { return sizes_.front(); }
    std::size_t parameter_count() const { return params_.size(); }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const {
        return offsets_[layer] + sizes_[layer + 1] * sizes_[layer];
    }

    /// Row-major sizes[l+1] x sizes[l] block.
    std::span<double> weight(std::size_t layer) {
        return {params_.data() + weight_offset(layer), sizes_[layer + 1] * sizes_[layer]};
    }
    std::span<const double> weight(std::size_t layer) const {
        return {params_.data() + weight_offset(layer), sizes_[layer + 1] * sizes_[layer]};
    }
    std::span<double> bias(std::size_t layer) {
        return {params_.data() + bias_offset(layer), sizes_[layer + 1]};
    }
    std::span<const double> bias(std::size_t layer) const {
        return {params_.data() + bias_offset(layer), sizes_[layer + 1]};
    }

    bool same_shape(const ModelWeights& other) const { return sizes_ == other.sizes_; }
    bool operator==(const ModelWeights& other) const = default;

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;  // flat offset of each layer's weight block
    std::vector<double> params_;
};

/// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
/// Identical seed gives bit-identical weights.
ModelWeights init_network(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed);

/// ReLU hidden layers, linear output. Rows of x are independent samples.
Matrix forward(const ModelWeights& model, const Matrix& x);

/// Activations recorded layer by layer for backpropagation.
struct ForwardTrace {
    std::vector<Matrix> pre;   // pre-activation per layer
    std::vector<Matrix> post;  // post-activation per layer (post.back() = logits)
};

ForwardTrace forward_trace(const ModelWeights& model, const Matrix& x);

/// Argmax over the two logits; exact tie goes to label 0.
Labels predict(const ModelWeights& model, const Matrix& x);

/// Fraction of rows where predict(model, x) matches y.
double accuracy(const ModelWeights& model, const Matrix& x, const Labels& y);

/// Portable weight file: magic "FEDKDW01", u32 size count, u32 sizes,
/// then the flat parameters as little-endian 64-bit floats.
void save_weights(const ModelWeights& model, const std::string& path);
ModelWeights load_weights(const std::string& path);

}  // namespace fedkd::nn
