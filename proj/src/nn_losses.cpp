#include "fedkd/nn/losses.hpp"

#include <cmath>

namespace fedkd::nn {

namespace {

constexpr double kProbFloor = 1e-12;

void check_logits(const Matrix& logits) {
    if (logits.cols != kClassCount) {
        throw ShapeError("logits must have " + std::to_string(kClassCount) + " columns, got " +
                         std::to_string(logits.cols));
    }
}

/// Row-wise log-softmax of logits/T.
Matrix log_softmax_temperature(const Matrix& logits, double temperature) {
    check_logits(logits);
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    Matrix out(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double max_u = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < logits.cols; ++c) {
            max_u = std::max(max_u, logits(r, c) / temperature);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            out(r, c) = logits(r, c) / temperature - max_u;
            sum += std::exp(out(r, c));
        }
        const double log_sum = std::log(sum);
        for (std::size_t c = 0; c < logits.cols; ++c) out(r, c) -= log_sum;
    }
    return out;
}

}  // namespace

void LossSpec::validate(std::size_t batch_rows) const {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0,1]");
    if (kind == LossKind::Kd) {
        if (!teacher_logits.has_value()) throw ConfigError("kd loss requires teacher logits");
        if (teacher_logits->rows != batch_rows) {
            throw ShapeError("teacher logits batch mismatch: " +
                             std::to_string(teacher_logits->rows) + " vs " +
                             std::to_string(batch_rows));
        }
        check_logits(*teacher_logits);
    }
}

Matrix softmax_temperature(const Matrix& logits, double temperature) {
    Matrix out = log_softmax_temperature(logits, temperature);
    for (double& v : out.data) v = std::exp(v);
    return out;
}

double cross_entropy(const Matrix& probs, const Labels& y) {
    if (probs.rows != y.size()) throw ShapeError("cross_entropy: row/label count mismatch");
    if (probs.rows == 0) throw DataError("cross_entropy: empty batch");
    require_binary(y);
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        const double p = probs(r, static_cast<std::size_t>(y[r]));
        total += -std::log(std::max(p, kProbFloor));
    }
    return total / static_cast<double>(probs.rows);
}

double kd_kl_loss(const Matrix& student_logits, const Matrix& teacher_logits, double temperature,
                  KlMode mode) {
    if (student_logits.rows != teacher_logits.rows) {
        throw ShapeError("kd_kl_loss: batch mismatch");
    }
    if (student_logits.rows == 0) throw DataError("kd_kl_loss: empty batch");
    const Matrix log_ps = log_softmax_temperature(student_logits, temperature);
    const Matrix log_pt = log_softmax_temperature(teacher_logits, temperature);
    double total = 0.0;
    for (std::size_t r = 0; r < log_ps.rows; ++r) {
        double row_kl = 0.0;
        for (std::size_t c = 0; c < log_ps.cols; ++c) {
            if (mode == KlMode::TeacherRef) {
                row_kl += std::exp(log_pt(r, c)) * (log_pt(r, c) - log_ps(r, c));
            } else {
                row_kl += std::exp(log_ps(r, c)) * (log_ps(r, c) - log_pt(r, c));
            }
        }
        total += row_kl;
    }
    return temperature * temperature * total / static_cast<double>(log_ps.rows);
}

double kd_total_loss(const Matrix& student_logits, const Labels& y, const Matrix& teacher_logits,
                     double temperature, double alpha, KlMode mode) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0,1]");
    if (alpha == 1.0) {
        return cross_entropy(softmax_temperature(student_logits, 1.0), y);
    }
    if (alpha == 0.0) {
        return kd_kl_loss(student_logits, teacher_logits, temperature, mode);
    }
    const double hard = cross_entropy(softmax_temperature(student_logits, 1.0), y);
    const double soft = kd_kl_loss(student_logits, teacher_logits, temperature, mode);
    return alpha * hard + (1.0 - alpha) * soft;
}

namespace {

/// dL/dlogits for the configured loss, batch-mean convention.
Matrix output_gradient(const Matrix& logits, const Labels& y, const LossSpec& spec, double* loss) {
    const std::size_t batch = logits.rows;
    const double inv_batch = 1.0 / static_cast<double>(batch);
    Matrix grad(logits.rows, logits.cols);

    const bool want_hard = spec.kind == LossKind::PlainCrossEntropy || spec.alpha > 0.0;
    const bool want_soft = spec.kind == LossKind::Kd && spec.alpha < 1.0;
    const double hard_weight = spec.kind == LossKind::Kd ? spec.alpha : 1.0;

    double hard_loss = 0.0;
    if (want_hard) {
        require_binary(y);
        const Matrix probs = softmax_temperature(logits, 1.0);
        hard_loss = cross_entropy(probs, y);
        for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t c = 0; c < logits.cols; ++c) {
                const double target = static_cast<std::size_t>(y[r]) == c ? 1.0 : 0.0;
                grad(r, c) += hard_weight * (probs(r, c) - target) * inv_batch;
            }
        }
    }

    double soft_loss = 0.0;
    if (want_soft) {
        const double t = spec.temperature;
        const Matrix log_ps = log_softmax_temperature(logits, t);
        const Matrix log_pt = log_softmax_temperature(*spec.teacher_logits, t);
        const double soft_weight = 1.0 - spec.alpha;
        for (std::size_t r = 0; r < batch; ++r) {
            if (spec.kl_mode == KlMode::TeacherRef) {
                double row_kl = 0.0;
                for (std::size_t c = 0; c < logits.cols; ++c) {
                    const double ps = std::exp(log_ps(r, c));
                    const double pt = std::exp(log_pt(r, c));
                    row_kl += pt * (log_pt(r, c) - log_ps(r, c));
                    grad(r, c) += soft_weight * t * (ps - pt) * inv_batch;
                }
                soft_loss += row_kl;
            } else {
                // d/du_k of sum_j ps_j (log ps_j - log pt_j) = ps_k (c_k - row_kl)
                double row_kl = 0.0;
                for (std::size_t c = 0; c < logits.cols; ++c) {
                    row_kl += std::exp(log_ps(r, c)) * (log_ps(r, c) - log_pt(r, c));
                }
                for (std::size_t c = 0; c < logits.cols; ++c) {
                    const double ps = std::exp(log_ps(r, c));
                    const double ck = log_ps(r, c) - log_pt(r, c);
                    grad(r, c) += soft_weight * t * ps * (ck - row_kl) * inv_batch;
                }
                soft_loss += row_kl;
            }
        }
        soft_loss *= t * t * inv_batch;
    }

    if (loss) {
        if (spec.kind == LossKind::PlainCrossEntropy) {
            *loss = hard_loss;
        } else if (spec.alpha == 1.0) {
            *loss = hard_loss;
        } else if (spec.alpha == 0.0) {
            *loss = soft_loss;
        } else {
            *loss = spec.alpha * hard_loss + (1.0 - spec.alpha) * soft_loss;
        }
    }
    return grad;
}

}  // namespace

LossAndGrads loss_and_gradients(const ModelWeights& model, const Matrix& x, const Labels& y,
                                const LossSpec& spec) {
    if (x.rows != y.size()) throw ShapeError("loss_and_gradients: row/label count mismatch");
    if (x.rows == 0) throw DataError("loss_and_gradients: empty batch");
    spec.validate(x.rows);

    const ForwardTrace trace = forward_trace(model, x);
    const std::size_t layers = model.layer_count();

    LossAndGrads result;
    result.grads.assign(model.parameter_count(), 0.0);
    Matrix delta = output_gradient(trace.post[layers - 1], y, spec, &result.loss);

    for (std::size_t l = layers; l-- > 0;) {
        const Matrix& input = l == 0 ? x : trace.post[l - 1];
        const std::size_t fan_in = model.layer_sizes()[l];
        const std::size_t fan_out = model.layer_sizes()[l + 1];

        double* grad_w = result.grads.data() + model.weight_offset(l);
        double* grad_b = result.grads.data() + model.bias_offset(l);
        for (std::size_t r = 0; r < delta.rows; ++r) {
            const double* d = delta.data.data() + r * fan_out;
            const double* a = input.data.data() + r * fan_in;
            for (std::size_t o = 0; o < fan_out; ++o) {
                double* wrow = grad_w + o * fan_in;
                const double dr = d[o];
                for (std::size_t i = 0; i < fan_in; ++i) wrow[i] += dr * a[i];
                grad_b[o] += dr;
            }
        }

        if (l == 0) break;
        Matrix prev(delta.rows, fan_in);
        const std::span<const double> w = model.weight(l);
        for (std::size_t r = 0; r < delta.rows; ++r) {
            const double* d = delta.data.data() + r * fan_out;
            double* p = prev.data.data() + r * fan_in;
            for (std::size_t o = 0; o < fan_out; ++o) {
                const double dr = d[o];
                const double* wrow = w.data() + o * fan_in;
                for (std::size_t i = 0; i < fan_in; ++i) p[i] += dr * wrow[i];
            }
            const double* z = trace.pre[l - 1].data.data() + r * fan_in;
            for (std::size_t i = 0; i < fan_in; ++i) {
                if (!(z[i] > 0.0)) p[i] = 0.0;
            }
        }
        delta = std::move(prev);
    }
    return result;
}

std::vector<std::vector<double>> per_example_gradients(const ModelWeights& model, const Matrix& x,
                                                       const Labels& y, const LossSpec& spec) {
    if (x.rows != y.size()) throw ShapeError("per_example_gradients: row/label count mismatch");
    spec.validate(x.rows);
    std::vector<std::vector<double>> grads;
    grads.reserve(x.rows);
    Matrix row(1, x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        std::copy(x.row(r).begin(), x.row(r).end(), row.data.begin());
        LossSpec row_spec = spec;
        if (spec.kind == LossKind::Kd) {
            Matrix t_row(1, spec.teacher_logits->cols);
            std::copy(spec.teacher_logits->row(r).begin(), spec.teacher_logits->row(r).end(),
                      t_row.data.begin());
            row_spec.teacher_logits = std::move(t_row);
        }
        grads.push_back(loss_and_gradients(model, row, {y[r]}, row_spec).grads);
    }
    return grads;
}

}  // namespace fedkd::nn
