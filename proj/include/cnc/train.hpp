#pragma once

#include <optional>
#include <string>

#include "cnc/dataset.hpp"
#include "cnc/losses.hpp"
#include "cnc/metrics.hpp"
#include "cnc/mlp.hpp"
#include "cnc/sampler.hpp"
#include "cnc/stage1.hpp"

namespace cnc {

struct CncConfig {
    SamplerMode mode = SamplerMode::CncTwoSided;
    std::size_t num_positives = 32;  // M
    std::size_t num_negatives = 32;  // N
    LossConfig loss;
    SgdConfig sgd{1e-3, 0.9, 1e-4};
    std::size_t epochs = 3;
    std::size_t grad_accum_steps = 32;  // 0 = one optimizer step per epoch
    std::size_t eval_every = 1;         // epochs between validation evaluations
};

struct EvalPoint {
    std::size_t epoch = 0;
    MetricsReport val;
};

struct CncResult {
    MlpModel best_model;
    std::size_t best_epoch = 0;
    double best_val_wga = -1.0;
    std::vector<EvalPoint> history;
    std::optional<MlpModel> projection_head;  // final head when the ablation flag is set
};

// Epoch-boundary training state; reloading reproduces the uninterrupted run
// bit-exactly (model, optimizer velocity, sampler rng, best record, history).
struct Checkpoint {
    std::size_t completed_epochs = 0;
    Rng::State sampler_state{};
    MlpModel model;
    GradientStore velocity;
    std::optional<MlpModel> head;
    GradientStore head_velocity;
    std::size_t best_epoch = 0;
    double best_val_wga = -1.0;
    MlpModel best_model;
    std::vector<EvalPoint> history;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

// Algorithm-1 stage 2: drive the sampler over the inference labels, apply the
// joint objective with gradient accumulation, early-stop on validation
// worst-group accuracy (ties resolve to the earliest epoch). checkpoint_path,
// when nonempty, is rewritten after every epoch; resume continues from a
// loaded checkpoint.
CncResult train_cnc(const LabeledDataset& ds, const GroupInference& inference,
                    const ModelConfig& model_cfg, const CncConfig& cfg, std::uint64_t seed,
                    const Checkpoint* resume = nullptr, const std::string& checkpoint_path = "");

// Composes the metrics suite over a split.
MetricsReport evaluate(const MlpModel& model, const LabeledDataset& ds, Split split,
                       bool with_bound = false, bool with_mi = false, double bound_delta = 0.05,
                       double bound_cap = 5.0);

}  // namespace cnc
