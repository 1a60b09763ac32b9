#include "fedkd/nn/train.hpp"

#include <algorithm>
#include <numeric>

namespace fedkd::nn {

double train_minibatch(ModelWeights& model, Optimizer& optimizer, const Matrix& x, const Labels& y,
                       const TrainPlan& plan, std::uint64_t master_seed,
                       std::string_view device_id) {
    if (x.rows != y.size()) throw ShapeError("train_minibatch: row/label count mismatch");
    if (x.rows == 0) throw DataError("train_minibatch: empty training set");
    if (plan.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (plan.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (plan.loss == LossKind::Kd && plan.teacher == nullptr) {
        throw ConfigError("kd training requires a teacher model");
    }
    if (plan.teacher != nullptr && plan.teacher->input_dim() != model.input_dim()) {
        throw ShapeError("teacher input dim " + std::to_string(plan.teacher->input_dim()) +
                         " does not match student input dim " +
                         std::to_string(model.input_dim()));
    }

    const std::size_t batch_size = static_cast<std::size_t>(plan.batch_size);
    std::vector<std::size_t> order(x.rows);
    double last_epoch_loss = 0.0;

    for (int e = 0; e < plan.epochs; ++e) {
        const std::uint64_t epoch_index =
            static_cast<std::uint64_t>(plan.first_epoch_index + e);
        RngStream shuffle_rng = derive_stream(master_seed, device_id, epoch_index, plan.phase);
        RngStream noise_rng = derive_stream(master_seed, device_id, epoch_index, "dp-noise");

        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t step_count = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t count = std::min(batch_size, order.size() - start);
            Matrix batch_x(count, x.cols);
            Labels batch_y(count);
            for (std::size_t b = 0; b < count; ++b) {
                const std::size_t src = order[start + b];
                std::copy(x.row(src).begin(), x.row(src).end(), batch_x.row(b).begin());
                batch_y[b] = y[src];
            }

            LossSpec spec;
            spec.kind = plan.loss;
            spec.temperature = plan.temperature;
            spec.alpha = plan.alpha;
            spec.kl_mode = plan.kl_mode;
            if (plan.loss == LossKind::Kd) {
                spec.teacher_logits = forward(*plan.teacher, batch_x);
            }

            if (plan.dp.has_value()) {
                const Matrix logits = forward(model, batch_x);
                epoch_loss += spec.kind == LossKind::PlainCrossEntropy
                                  ? cross_entropy(softmax_temperature(logits, 1.0), batch_y)
                                  : kd_total_loss(logits, batch_y, *spec.teacher_logits,
                                                  spec.temperature, spec.alpha, spec.kl_mode);
                const auto grads = per_example_gradients(model, batch_x, batch_y, spec);
                const auto noisy =
                    dp_clip_and_noise(grads, plan.dp->clip_norm, plan.dp->noise_std, noise_rng);
                optimizer.step(model, noisy);
            } else {
                const LossAndGrads eval = loss_and_gradients(model, batch_x, batch_y, spec);
                epoch_loss += eval.loss;
                optimizer.step(model, eval.grads);
            }
            ++step_count;
        }
        last_epoch_loss = step_count > 0 ? epoch_loss / static_cast<double>(step_count) : 0.0;
    }
    return last_epoch_loss;
}

}  // namespace fedkd::nn
