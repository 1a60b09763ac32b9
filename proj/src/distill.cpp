#include "fedkd/distill.hpp"

#include <algorithm>

#include "fedkd/evaluate.hpp"

namespace fedkd::distill {

std::vector<std::size_t> KdConfig::teacher_arch(std::size_t input_dim) const {
    std::vector<std::size_t> arch{input_dim};
    arch.insert(arch.end(), teacher_hidden.begin(), teacher_hidden.end());
    arch.push_back(nn::kClassCount);
    return arch;
}

std::vector<std::size_t> KdConfig::student_arch(std::size_t input_dim) const {
    std::vector<std::size_t> arch{input_dim};
    arch.insert(arch.end(), student_hidden.begin(), student_hidden.end());
    arch.push_back(nn::kClassCount);
    return arch;
}

void KdConfig::validate() const {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0,1]");
    if (teacher_epochs < 0 || student_epochs < 0 || finetune_epochs < 0 || local_epochs < 0) {
        throw ConfigError("epoch counts must be >= 0");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    teacher_optimizer.validate();
    student_optimizer.validate();
    smote.validate();
}

void DataFlowAudit::record(const std::string& device_id, std::size_t rows, bool synthetic) {
    if (synthetic) {
        cloud_synthetic_rows += rows;
    } else {
        cloud_real_rows += rows;
    }
    events.push_back("cloud-pool device=" + device_id + " rows=" + std::to_string(rows) +
                     " provenance=" + (synthetic ? "synthetic" : "real"));
}

nn::ModelWeights train_local(const data::DeviceDataset& device, const KdConfig& config,
                             std::uint64_t seed) {
    config.validate();
    nn::ModelWeights model = nn::init_network(config.student_arch(device.train.x.cols),
                                              derive_seed(seed, "", 0, "init-student"));
    nn::Optimizer optimizer(config.student_optimizer, model.parameter_count());
    nn::TrainPlan plan;
    plan.loss = nn::LossKind::PlainCrossEntropy;
    plan.epochs = config.local_epochs;
    plan.batch_size = config.batch_size;
    plan.phase = "train";
    train_minibatch(model, optimizer, device.train.x, device.train.y, plan, seed,
                    device.device_id);
    return model;
}

namespace {

smote::SyntheticData device_smote(const data::DeviceDataset& device, const KdConfig& config,
                                  std::uint64_t seed) {
    RngStream rng = derive_stream(seed, device.device_id, 0, "smote");
    return smote::generate_synthetic_dataset(device.train.x, device.train.y, config.smote, rng,
                                             device.device_id);
}

void append_rows(Matrix& dst, Labels& dst_y, const Matrix& src, const Labels& src_y) {
    if (dst.cols == 0) dst.cols = src.cols;
    if (dst.cols != src.cols) throw ShapeError("pool: feature width mismatch");
    dst.data.insert(dst.data.end(), src.data.begin(), src.data.end());
    dst.rows += src.rows;
    dst_y.insert(dst_y.end(), src_y.begin(), src_y.end());
}

}  // namespace

PooledData pool_training_data(const data::Scenario& scenario, PoolSource source,
                              const KdConfig& config, std::uint64_t seed, DataFlowAudit* audit) {
    if (scenario.devices.empty()) throw ConfigError("pool_training_data: no devices");
    PooledData pool;
    for (const data::DeviceDataset& device : scenario.devices) {
        if (source == PoolSource::Real) {
            append_rows(pool.x, pool.y, device.train.x, device.train.y);
            if (audit) audit->record(device.device_id, device.train.x.rows, false);
        } else {
            try {
                const smote::SyntheticData synth = device_smote(device, config, seed);
                append_rows(pool.x, pool.y, synth.x, synth.y);
                if (audit) audit->record(device.device_id, synth.x.rows, true);
            } catch (const DataError& e) {
                pool.failed_devices.insert(device.device_id);
                if (audit) {
                    audit->events.push_back("smote-failed device=" + device.device_id + ": " +
                                            e.what());
                }
            }
        }
    }
    if (pool.x.rows == 0) throw DataError("pool_training_data: pooled dataset is empty");
    return pool;
}

TeacherResult train_teacher(const Matrix& x, const Labels& y, const KdConfig& config,
                            std::uint64_t seed) {
    config.validate();
    TeacherResult result;
    result.weights =
        nn::init_network(config.teacher_arch(x.cols), derive_seed(seed, "", 0, "init-teacher"));
    nn::Optimizer optimizer(config.teacher_optimizer, result.weights.parameter_count());
    for (int e = 0; e < config.teacher_epochs; ++e) {
        nn::TrainPlan plan;
        plan.loss = nn::LossKind::PlainCrossEntropy;
        plan.epochs = 1;
        plan.first_epoch_index = e;
        plan.batch_size = config.batch_size;
        plan.phase = "teacher";
        result.epoch_losses.push_back(
            train_minibatch(result.weights, optimizer, x, y, plan, seed, ""));
    }
    return result;
}

nn::ModelWeights train_student_kd(const Matrix& x, const Labels& y,
                                  const nn::ModelWeights& teacher, const KdConfig& config,
                                  std::uint64_t seed, std::string_view device_id,
                                  std::string_view phase, int epochs_override) {
    config.validate();
    nn::ModelWeights model = nn::init_network(config.student_arch(x.cols),
                                              derive_seed(seed, "", 0, "init-student"));
    nn::Optimizer optimizer(config.student_optimizer, model.parameter_count());
    nn::TrainPlan plan;
    plan.loss = nn::LossKind::Kd;
    plan.teacher = &teacher;
    plan.temperature = config.temperature;
    plan.alpha = config.alpha;
    plan.kl_mode = config.kl_mode;
    plan.epochs = epochs_override >= 0 ? epochs_override : config.student_epochs;
    plan.batch_size = config.batch_size;
    plan.phase = std::string(phase);
    train_minibatch(model, optimizer, x, y, plan, seed, device_id);
    return model;
}

KdOutcome run_kd_pipeline(const data::Scenario& scenario, KdVariant variant,
                          const KdConfig& config, std::uint64_t seed,
                          const nn::ModelWeights* precomputed_teacher) {
    config.validate();
    if (scenario.devices.empty()) throw ConfigError("run_kd_pipeline: scenario has no devices");

    KdOutcome outcome;
    const PoolSource source = variant == KdVariant::KdScr ? PoolSource::Real : PoolSource::Smote;
    const PooledData pool = pool_training_data(scenario, source, config, seed, &outcome.audit);

    if (precomputed_teacher != nullptr) {
        outcome.teacher = *precomputed_teacher;
    } else {
        outcome.teacher = train_teacher(pool.x, pool.y, config, seed).weights;
    }

    const std::size_t n = scenario.devices.size();
    outcome.students.resize(n);
    outcome.report.devices.resize(n);
    std::vector<std::string> fallback_reasons(n);

    parallel_for(n, config.threads, [&](std::size_t d) {
        const data::DeviceDataset& device = scenario.devices[d];
        bool fallback = pool.failed_devices.contains(device.device_id);
        std::string reason = fallback ? "excluded from smote pool" : "";
        nn::ModelWeights student;

        if (!fallback) {
            try {
                if (variant == KdVariant::TfKd) {
                    const smote::SyntheticData synth = device_smote(device, config, seed);
                    student = train_student_kd(synth.x, synth.y, outcome.teacher, config, seed,
                                               device.device_id, "tfkd-kd");
                    if (config.finetune_epochs > 0) {
                        nn::Optimizer optimizer(config.student_optimizer,
                                                student.parameter_count());
                        nn::TrainPlan plan;
                        plan.loss = nn::LossKind::PlainCrossEntropy;
                        plan.epochs = config.finetune_epochs;
                        plan.batch_size = config.batch_size;
                        plan.phase = "finetune";
                        train_minibatch(student, optimizer, device.train.x, device.train.y, plan,
                                        seed, device.device_id);
                    }
                } else if (config.student_trains_on_smote) {
                    const smote::SyntheticData synth = device_smote(device, config, seed);
                    student = train_student_kd(synth.x, synth.y, outcome.teacher, config, seed,
                                               device.device_id, "train");
                } else {
                    student = train_student_kd(device.train.x, device.train.y, outcome.teacher,
                                               config, seed, device.device_id, "train");
                }
            } catch (const DataError& e) {
                fallback = true;
                reason = e.what();
            }
        }

        if (fallback) {
            student = train_local(device, config, seed);
        }
        outcome.students[d] = std::move(student);
        outcome.report.devices[d] = evaluate_device(outcome.students[d], device, fallback);
        fallback_reasons[d] = std::move(reason);
    });

    for (std::size_t d = 0; d < n; ++d) {
        if (!fallback_reasons[d].empty()) {
            outcome.audit.events.push_back("fallback-to-local device=" +
                                           scenario.devices[d].device_id + ": " +
                                           fallback_reasons[d]);
        }
    }

    switch (variant) {
        case KdVariant::KdScr: outcome.report.method = "kd_scr"; break;
        case KdVariant::KdSmote: outcome.report.method = "kd_smote"; break;
        case KdVariant::TfKd: outcome.report.method = "tf_kd"; break;
    }
    outcome.report.seed = seed;
    return outcome;
}

}  // namespace fedkd::distill
