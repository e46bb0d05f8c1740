#pragma once

#include <cstdint>
#include <string>

#include "cnc/mlp.hpp"

namespace cnc {

enum class Objective : std::uint8_t { Cnc = 0, DirectAlign = 1, CeOnly = 2 };

const char* objective_name(Objective o);
Objective objective_from_name(const std::string& name);

struct LossConfig {
    double tau = 0.05;     // contrastive temperature
    double lambda = 0.75;  // contrastive weight in [0,1]
    Objective objective = Objective::Cnc;
    bool projection_head = false;  // ablation only; off by default

    void validate() const;
};

struct SupconResult {
    double loss = 0.0;
    std::vector<double> d_anchor;
    Matrix d_pos;
    Matrix d_neg;
};

// -(1/M) sum_m log[ exp(z.z_m+/tau) / (sum_m exp(z.z_m+/tau) + sum_n exp(z.z_n-/tau)) ]
// Inputs are unit rows; gradients are exact.
SupconResult supcon_loss(std::span<const double> z_anchor, const Matrix& z_pos, const Matrix& z_neg,
                         double tau);

struct TwoSidedResult {
    double loss = 0.0;
    Matrix d_anchors, d_positives, d_negatives, d_negatives2;
};

// supcon(anchor_1; positives; negatives) + supcon(positive_1; anchors; negatives2).
// An empty negatives2 selects the one-sided variant (left term only).
TwoSidedResult two_sided_loss(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                              const Matrix& negatives2, double tau);

// Row layout of a contrastive batch in feature/representation matrices:
// [anchors | positives | negatives | negatives2].
struct BatchLayout {
    std::size_t num_anchors = 0;
    std::size_t num_positives = 0;
    std::size_t num_negatives = 0;
    std::size_t num_negatives2 = 0;

    std::size_t rows() const { return num_anchors + num_positives + num_negatives + num_negatives2; }
};

struct JointLoss {
    double total = 0.0;
    double contrastive = 0.0;  // the lambda-weighted term before weighting
    double ce = 0.0;
    GradientStore grads;
    GradientStore head_grads;  // populated only when a projection head is used
};

// lambda * L_con + (1 - lambda) * L_ce. The contrastive term sees row-normalized
// representations; cross-entropy sees logits from the unnormalized ones,
// averaged over every batch member. projection_head, when given, is applied to
// the representations before normalization (contrastive path only).
JointLoss joint_loss(const MlpModel& model, const Matrix& features, std::span<const int> labels,
                     const BatchLayout& layout, const LossConfig& cfg,
                     const MlpModel* projection_head = nullptr);

// Replaces the contrastive term with the mean pairwise Euclidean distance
// between anchor and positive representations (unnormalized).
JointLoss direct_align_loss(const MlpModel& model, const Matrix& features, std::span<const int> labels,
                            const BatchLayout& layout, const LossConfig& cfg);

// Dispatch on cfg.objective.
JointLoss batch_loss(const MlpModel& model, const Matrix& features, std::span<const int> labels,
                     const BatchLayout& layout, const LossConfig& cfg,
                     const MlpModel* projection_head = nullptr);

}  // namespace cnc
