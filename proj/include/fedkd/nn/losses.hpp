#pragma once

#include <optional>

#include "fedkd/nn/model.hpp"

namespace fedkd::nn {

enum class LossKind { PlainCrossEntropy, Kd };

/// Which softened distribution anchors the KL term.
/// TeacherRef:  sum p_t * log(p_t / p_s)   (standard distillation, default)
/// AsWritten:   sum p_s * log(p_s / p_t)   (literal argument order)
enum class KlMode { TeacherRef, AsWritten };

struct LossSpec {
    LossKind kind = LossKind::PlainCrossEntropy;
    double temperature = 1.0;
    double alpha = 1.0;  // weight of the hard-label term in the kd loss
    KlMode kl_mode = KlMode::TeacherRef;
    std::optional<Matrix> teacher_logits;  // required iff kind == Kd

    void validate(std::size_t batch_rows) const;
};

/// Row-wise softmax of o/T with max subtraction. Each row sums to 1.
Matrix softmax_temperature(const Matrix& logits, double temperature);

/// Mean over the batch of -log p(y), probabilities clamped to >= 1e-12.
double cross_entropy(const Matrix& probs, const Labels& y);

/// T^2-scaled KL divergence between the T-softened student and teacher rows,
/// averaged over the batch. Gradients flow to the student logits only.
double kd_kl_loss(const Matrix& student_logits, const Matrix& teacher_logits, double temperature,
                  KlMode mode = KlMode::TeacherRef);

/// alpha * cross-entropy + (1 - alpha) * kd_kl_loss. alpha of exactly 0 or 1
/// short-circuits to the single surviving term.
double kd_total_loss(const Matrix& student_logits, const Labels& y, const Matrix& teacher_logits,
                     double temperature, double alpha, KlMode mode = KlMode::TeacherRef);

/// Loss value and exact analytic gradient in canonical flat order.
struct LossAndGrads {
    double loss = 0.0;
    std::vector<double> grads;
};

LossAndGrads loss_and_gradients(const ModelWeights& model, const Matrix& x, const Labels& y,
                                const LossSpec& spec);

/// One gradient per batch row, each the gradient of that row's own loss.
/// Rows of spec.teacher_logits are sliced alongside x.
std::vector<std::vector<double>> per_example_gradients(const ModelWeights& model, const Matrix& x,
                                                       const Labels& y, const LossSpec& spec);

}  // namespace fedkd::nn
