#pragma once

#include "cnc/stage1.hpp"
#include "cnc/train.hpp"

namespace cnc {

struct JttPolicy {
    bool auto_balance = true;   // repeat each misclassified point n_correct/n_incorrect times
    std::size_t factor = 1;     // constant repeat count when auto_balance is off
};

struct JttResult {
    MlpModel model;
    std::vector<double> epoch_losses;
    std::size_t upsample_factor = 1;
    bool degenerated_to_erm = false;  // inference had no misclassified points
};

// Upsampled retraining: misclassified (yhat != y) train points are repeated
// per policy, then ordinary ERM runs on the multiset. factor 1 with no
// misclassifications reproduces train_erm byte-for-byte on the same seed.
JttResult train_jtt(const LabeledDataset& ds, const GroupInference& inference, const JttPolicy& policy,
                    const ModelConfig& model_cfg, const TrainRecipe& recipe, std::uint64_t seed);

struct GdroConfig {
    double eta_q = 0.01;  // exponential-weights step size
    double c_adj = 0.0;   // group adjustment, added as c_adj / sqrt(n_g)
};

struct GdroResult {
    MlpModel model;
    std::vector<double> q;  // final group weights (nonzero only for populated train groups)
    std::vector<double> epoch_losses;
};

// Oracle baseline on true group labels: per minibatch the populated groups'
// weights take q_g *= exp(eta_q * (loss_g + c_adj/sqrt(n_g))), renormalized,
// and the weighted group losses backpropagate.
GdroResult train_gdro(const LabeledDataset& ds, const ModelConfig& model_cfg, const TrainRecipe& recipe,
                      const GdroConfig& gdro, std::uint64_t seed);

// One exponential-weights update. Groups with batch_count zero keep their
// weight through the renormalization.
void gdro_reweight(std::vector<double>& q, const std::vector<double>& batch_mean_loss,
                   const std::vector<std::size_t>& batch_count, const std::vector<double>& adjustment,
                   double eta_q);

// Full stage-2 loop with the inference replaced by the oracle map
// yhat := class spuriously associated with the true attribute.
CncResult train_cnc_star(const LabeledDataset& ds, const ModelConfig& model_cfg, const CncConfig& cfg,
                         std::uint64_t seed);

}  // namespace cnc
