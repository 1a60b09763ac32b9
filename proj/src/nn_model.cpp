#include "fedkd/nn/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fedkd/rng.hpp"

namespace fedkd::nn {

ModelWeights::ModelWeights(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) {
        throw ConfigError("network needs at least an input and an output layer");
    }
    for (std::size_t s : sizes_) {
        if (s == 0) throw ConfigError("layer sizes must be positive");
    }
    if (sizes_.back() != kClassCount) {
        throw ConfigError("output layer must have " + std::to_string(kClassCount) + " units");
    }
    std::size_t total = 0;
    offsets_.reserve(sizes_.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(total);
        total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
    params_.assign(total, 0.0);
}

ModelWeights init_network(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed) {
    ModelWeights model(layer_sizes);
    RngStream rng(seed);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const std::size_t fan_in = layer_sizes[l];
        const std::size_t fan_out = layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : model.weight(l)) w = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return model;
}

namespace {

void affine(const ModelWeights& model, std::size_t layer, const Matrix& in, Matrix& out) {
    const std::size_t fan_in = model.layer_sizes()[layer];
    const std::size_t fan_out = model.layer_sizes()[layer + 1];
    out = Matrix(in.rows, fan_out);
    const std::span<const double> w = model.weight(layer);
    const std::span<const double> b = model.bias(layer);
    for (std::size_t r = 0; r < in.rows; ++r) {
        const double* x = in.data.data() + r * fan_in;
        double* z = out.data.data() + r * fan_out;
        for (std::size_t o = 0; o < fan_out; ++o) {
            const double* wrow = w.data() + o * fan_in;
            double acc = b[o];
            for (std::size_t i = 0; i < fan_in; ++i) acc += wrow[i] * x[i];
            z[o] = acc;
        }
    }
}

void check_input(const ModelWeights& model, const Matrix& x) {
    if (x.cols != model.input_dim()) {
        throw ShapeError("input has " + std::to_string(x.cols) + " features, model expects " +
                         std::to_string(model.input_dim()));
    }
}

}  // namespace

Matrix forward(const ModelWeights& model, const Matrix& x) {
    check_input(model, x);
    Matrix current = x;
    Matrix next;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        affine(model, l, current, next);
        if (l + 1 < model.layer_count()) {
            for (double& v : next.data) v = v > 0.0 ? v : 0.0;
        }
        current = std::move(next);
    }
    return current;
}

ForwardTrace forward_trace(const ModelWeights& model, const Matrix& x) {
    check_input(model, x);
    ForwardTrace trace;
    trace.pre.resize(model.layer_count());
    trace.post.resize(model.layer_count());
    const Matrix* current = &x;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        affine(model, l, *current, trace.pre[l]);
        trace.post[l] = trace.pre[l];
        if (l + 1 < model.layer_count()) {
            for (double& v : trace.post[l].data) v = v > 0.0 ? v : 0.0;
        }
        current = &trace.post[l];
    }
    return trace;
}

Labels predict(const ModelWeights& model, const Matrix& x) {
    const Matrix logits = forward(model, x);
    Labels out(logits.rows, 0);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        out[r] = logits(r, 1) > logits(r, 0) ? 1 : 0;
    }
    return out;
}

double accuracy(const ModelWeights& model, const Matrix& x, const Labels& y) {
    if (x.rows != y.size()) throw ShapeError("accuracy: row/label count mismatch");
    if (x.rows == 0) throw DataError("accuracy: empty dataset");
    const Labels pred = predict(model, x);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        if (pred[r] == y[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

namespace {

constexpr char kMagic[8] = {'F', 'E', 'D', 'K', 'D', 'W', '0', '1'};

template <typename T>
void write_le(std::ofstream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw DataError("weight file truncated");
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void save_weights(const ModelWeights& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.layer_sizes().size()));
    for (std::size_t s : model.layer_sizes()) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
    }
    for (double v : model.params()) write_le<double>(out, v);
    if (!out) throw DataError("failed writing weights to " + path);
}

ModelWeights load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weight file: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("bad weight file magic: " + path);
    }
    const auto count = read_le<std::uint32_t>(in);
    if (count < 2 || count > 64) throw DataError("implausible layer count in " + path);
    std::vector<std::size_t> sizes(count);
    for (auto& s : sizes) s = read_le<std::uint32_t>(in);
    ModelWeights model(sizes);
    for (double& v : model.params()) v = read_le<double>(in);
    return model;
}

}  // namespace fedkd::nn
