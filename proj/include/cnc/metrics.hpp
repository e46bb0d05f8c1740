#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cnc/dataset.hpp"
#include "cnc/mlp.hpp"

namespace cnc {

struct GroupMetrics {
    int group = 0;
    int y = 0;
    int a = 0;
    std::int64_t count = 0;
    double accuracy = 0.0;
    double mean_loss = 0.0;  // mean cross-entropy
};

struct ClassBound {
    int y = 0;
    double lhs_gap = 0.0;        // L_wg(f;y) - L_avg(f;y), clipped losses
    double align = 0.0;          // largest cross-group alignment loss within the class
    double concentration = 0.0;  // max_g C2 sqrt(8 log(|G_y|/delta) / n_g)
    double rhs = 0.0;
    bool holds = false;
    int groups_present = 0;
};

struct BoundReport {
    double b_spectral = 0.0;  // ||W||_2 of the classifier
    double c1 = 0.0;          // Lipschitz constant of the loss in logits
    double c2 = 0.0;          // loss cap
    double delta = 0.0;
    std::vector<ClassBound> per_class;
    bool all_classes_hold = false;
    // cross-class extension
    double global_worst_loss = 0.0;
    double global_avg_loss = 0.0;
    double min_class_prior = 0.0;
    double global_rhs = 0.0;
    bool global_holds = false;
    bool has_empty_groups = false;
};

struct MetricsReport {
    Split split = Split::Test;
    std::vector<GroupMetrics> per_group;  // empty groups omitted
    bool has_empty_groups = false;
    double avg_acc = 0.0;
    double worst_group_acc = 0.0;
    double avg_loss = 0.0;
    double worst_group_loss = 0.0;
    std::map<int, double> per_class_align;  // only classes with >= 2 populated groups
    double mi_y = 0.0;
    double mi_a = 0.0;
    bool has_mi = false;
    std::optional<BoundReport> bound;

    // Mean over classes of (worst-group error - average error) within the class.
    double mean_class_error_gap() const;
};

// Per-group accuracy and mean CE over one split; worst-group is the min.
MetricsReport group_accuracy(const MlpModel& model, const LabeledDataset& ds, Split split);

// Mean pairwise Euclidean distance between unnormalized representations of two
// groups sharing a class (throws InputError otherwise). normalized switches to
// unit-norm representations for scale-free comparisons.
double alignment_loss(const MlpModel& model, const LabeledDataset& ds, Split split, int group_g,
                      int group_gp, bool normalized = false);

// Largest cross-group alignment loss among populated groups of class y.
double class_alignment(const MlpModel& model, const LabeledDataset& ds, Split split, int y,
                       bool normalized = false);

// Theorem-style bound check on the realized split: per class,
//   L_wg(f;y) - L_avg(f;y) <= B*C1*align(y) + max_g C2 sqrt(8 log(|G_y|/delta)/n_g)
// with per-sample CE clipped at loss_cap so the bounded-loss hypothesis holds,
// plus the cross-class inequality with empirical class priors.
BoundReport check_bound(const MlpModel& model, const LabeledDataset& ds, Split split, double delta = 0.05,
                        double loss_cap = 5.0);

// Internal building blocks, exposed for reuse on precomputed representations.
double alignment_loss_reps(const Matrix& reps, std::span<const int> rows_g, std::span<const int> rows_gp);
std::vector<double> per_sample_ce(const Matrix& logits, std::span<const int> labels);

}  // namespace cnc
