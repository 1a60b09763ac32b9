#pragma once

#include <optional>
#include <set>

#include "fedkd/data/scenario.hpp"
#include "fedkd/metrics/report.hpp"
#include "fedkd/nn/train.hpp"
#include "fedkd/smote.hpp"

namespace fedkd::distill {

enum class KdVariant { KdScr, KdSmote, TfKd };
enum class PoolSource { Real, Smote };

struct KdConfig {
    double temperature = 10.0;
    double alpha = 0.4;  // hard-label weight; 0.4 scr4 profile, 0.5 scr5
    std::vector<std::size_t> teacher_hidden = {256, 256, 256};
    std::vector<std::size_t> student_hidden = {64, 64};
    nn::OptimizerConfig teacher_optimizer{nn::OptimizerKind::Adam, 0.0001};
    nn::OptimizerConfig student_optimizer{nn::OptimizerKind::SgdMomentum, 0.001, 0.9};
    int teacher_epochs = 10;
    int student_epochs = 10;   // kd phase
    int finetune_epochs = 10;  // tf-kd stage 2
    int local_epochs = 10;     // plain local baseline
    int batch_size = 32;
    nn::KlMode kl_mode = nn::KlMode::TeacherRef;
    smote::SmoteConfig smote{};
    /// Ablation: kd_scr/kd_smote students train on their own synthetic data
    /// instead of the real local split.
    bool student_trains_on_smote = false;
    int threads = 1;

    std::vector<std::size_t> teacher_arch(std::size_t input_dim) const;
    std::vector<std::size_t> student_arch(std::size_t input_dim) const;
    void validate() const;
};

/// Counts feature rows seen by cloud-side operations, by provenance.
struct DataFlowAudit {
    std::size_t cloud_real_rows = 0;
    std::size_t cloud_synthetic_rows = 0;
    std::vector<std::string> events;

    void record(const std::string& device_id, std::size_t rows, bool synthetic);
};

/// Plain cross-entropy local baseline on the device's train split.
nn::ModelWeights train_local(const data::DeviceDataset& device, const KdConfig& config,
                             std::uint64_t seed);

struct PooledData {
    Matrix x;
    Labels y;
    /// Devices whose SMOTE generation failed and were excluded from the pool.
    std::set<std::string> failed_devices;
};

/// Concatenates all devices' train splits (real) or their SMOTE counterparts
/// (smote). In smote mode no real row enters the pool; per-device generation
/// failures are recorded rather than fatal.
PooledData pool_training_data(const data::Scenario& scenario, PoolSource source,
                              const KdConfig& config, std::uint64_t seed,
                              DataFlowAudit* audit = nullptr);

struct TeacherResult {
    nn::ModelWeights weights;
    std::vector<double> epoch_losses;
};

/// High-capacity network trained with Adam and plain cross-entropy on the
/// pooled (cloud-side) data.
TeacherResult train_teacher(const Matrix& x, const Labels& y, const KdConfig& config,
                            std::uint64_t seed);

/// Student minimizing alpha * l_hard + (1 - alpha) * l_kl against the frozen
/// teacher, whose logits are recomputed per batch.
nn::ModelWeights train_student_kd(const Matrix& x, const Labels& y,
                                  const nn::ModelWeights& teacher, const KdConfig& config,
                                  std::uint64_t seed, std::string_view device_id,
                                  std::string_view phase = "train", int epochs_override = -1);

struct KdOutcome {
    metrics::MethodReport report;
    nn::ModelWeights teacher;
    std::vector<nn::ModelWeights> students;  // scenario device order
    DataFlowAudit audit;
};

/// The three pipelines:
///   kd_scr   - teacher on pooled real data, students distill on real local data
///   kd_smote - teacher on pooled SMOTE data, students distill on real local data
///   tf_kd    - teacher on pooled SMOTE data, students distill on their own
///              SMOTE data, then fine-tune with plain cross-entropy on real data
/// A device whose SMOTE generation fails falls back to the local baseline and
/// is flagged in the report.
KdOutcome run_kd_pipeline(const data::Scenario& scenario, KdVariant variant,
                          const KdConfig& config, std::uint64_t seed,
                          const nn::ModelWeights* precomputed_teacher = nullptr);

}  // namespace fedkd::distill
