#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cnc/dataset.hpp"
#include "cnc/mlp.hpp"

namespace cnc {

// Per-sample pseudo class labels from the stage-1 model, over one split.
// yhat[k] belongs to dataset row sample_index[k].
struct GroupInference {
    std::vector<int> sample_index;
    std::vector<int> yhat;
    std::string method;        // argmax | cluster | oracle | oracle_noised(p=..)
    std::string source_model;  // free-form identifier
    double accuracy_vs_y = 0.0;
    // Fraction where yhat equals the class spuriously associated with the true
    // attribute; NaN when that mapping is undefined (num_attrs != num_classes).
    double accuracy_vs_a_proxy = 0.0;

    void write_csv(const std::string& path, const LabeledDataset& ds) const;
    static GroupInference read_csv(const std::string& path);
};

struct TrainRecipe {
    SgdConfig sgd{1e-3, 0.9, 5e-4};
    std::size_t epochs = 5;
    std::size_t batch_size = 32;
    // Called after every epoch (1-based); used by the harness for
    // validation-based model selection.
    std::function<void(std::size_t, const MlpModel&)> on_epoch;
};

struct ErmResult {
    MlpModel model;
    std::vector<double> epoch_losses;  // mean train CE per epoch
};

// Plain minibatch cross-entropy training; regularization comes from the
// recipe's weight decay and epoch budget. Throws TrainingError on divergence.
ErmResult train_erm(const LabeledDataset& ds, const ModelConfig& model_cfg,
                    const TrainRecipe& recipe, std::uint64_t seed);

// Same loop over an explicit index multiset (rows may repeat); train_erm is
// this over the train split, and the upsampling baseline reuses it.
ErmResult train_erm_over_indices(const LabeledDataset& ds, std::vector<int> indices,
                                 const ModelConfig& model_cfg, const TrainRecipe& recipe,
                                 std::uint64_t seed);

GroupInference predict_argmax(const MlpModel& model, const LabeledDataset& ds, Split split);

// k-means over last-hidden-layer representations of the split, clusters
// matched to classes by exhaustive permutation search on accuracy. pca2
// projects representations to two principal components first.
GroupInference predict_cluster(const MlpModel& model, const LabeledDataset& ds, Split split,
                               std::size_t restarts, std::uint64_t seed, bool pca2);

// yhat := class spuriously associated with the true attribute.
GroupInference oracle_inference(const LabeledDataset& ds, Split split);

// Each label independently replaced by a uniform class with probability p.
GroupInference inject_noise(const GroupInference& inference, double p, std::size_t num_classes,
                            std::uint64_t seed);

// Recomputes the two accuracy fields against the dataset.
void refresh_accuracy(GroupInference& inf, const LabeledDataset& ds);

}  // namespace cnc
