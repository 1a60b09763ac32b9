#pragma once

#include <optional>
#include <string>

#include "fedkd/nn/losses.hpp"
#include "fedkd/nn/optimizer.hpp"

namespace fedkd::nn {

struct DpParams {
    double clip_norm = 1.0;
    double noise_std = 0.01;
};

/// One training job: a loss, an epoch budget, and the RNG stream identity.
///
/// Epoch e shuffles with the stream (master, device_id, first_epoch_index + e,
/// phase), so a 10-epoch run and ten chained 1-epoch runs with advancing
/// offsets consume identical streams.
struct TrainPlan {
    LossKind loss = LossKind::PlainCrossEntropy;
    const ModelWeights* teacher = nullptr;  // kd only; logits recomputed per batch
    double temperature = 1.0;
    double alpha = 1.0;
    KlMode kl_mode = KlMode::TeacherRef;

    int epochs = 1;
    int batch_size = 32;
    std::string phase = "train";
    int first_epoch_index = 0;
    std::optional<DpParams> dp;  // routes every step through dp_clip_and_noise
};

/// Runs the plan's epochs of minibatch training in place. Returns the mean
/// loss over the final epoch (0 when epochs == 0).
double train_minibatch(ModelWeights& model, Optimizer& optimizer, const Matrix& x, const Labels& y,
                       const TrainPlan& plan, std::uint64_t master_seed,
                       std::string_view device_id);

}  // namespace fedkd::nn
