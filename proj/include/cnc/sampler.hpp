#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnc/rng.hpp"

namespace cnc {

enum class SamplerMode : std::uint8_t {
    CncTwoSided = 0,
    CncOneSided = 1,
    DifferentClass = 2,  // negatives by class only
    SamePrediction = 3,  // negatives by prediction only
    SupCon = 4,          // positives and negatives by class only
};

const char* sampler_mode_name(SamplerMode mode);
SamplerMode sampler_mode_from_name(const std::string& name);

// Train indices partitioned by (true class, predicted class).
struct IndexPools {
    std::size_t num_classes = 0;
    std::vector<std::vector<int>> pools;  // C*C entries, pool(y, yhat) = pools[y*C + yhat]
    std::vector<int> labels;              // y per train-position
    std::vector<int> predictions;         // yhat per train-position

    const std::vector<int>& pool(int y, int yhat) const {
        return pools[static_cast<std::size_t>(y) * num_classes + static_cast<std::size_t>(yhat)];
    }
    std::size_t total() const;
};

// Entries are positions into the arrays handed to index_pools (the trainer
// maps them back to dataset rows).
IndexPools index_pools(std::span<const int> labels, std::span<const int> predictions,
                       std::size_t num_classes);

struct ContrastiveBatch {
    std::vector<int> anchors;     // M (1 for one-sided)
    std::vector<int> positives;   // M
    std::vector<int> negatives;   // N
    std::vector<int> negatives2;  // N (empty for one-sided)
    SamplerMode mode = SamplerMode::CncTwoSided;

    std::size_t size() const {
        return anchors.size() + positives.size() + negatives.size() + negatives2.size();
    }
};

// One two-sided batch around the given primary anchor. Draws are uniform,
// without replacement when the eligible union is at least the request size,
// with replacement otherwise. Throws SamplerExhausted naming the empty pool.
ContrastiveBatch sample_batch(const IndexPools& pools, std::size_t m, std::size_t n, SamplerMode mode,
                              int primary_anchor, Rng& rng);

// Anchors eligible to start a batch under the mode (correctly-predicted
// samples, or everything for supcon).
std::vector<int> eligible_anchors(const IndexPools& pools, SamplerMode mode);

// One batch per eligible primary anchor, anchor order reshuffled per epoch.
class EpochSchedule {
public:
    EpochSchedule(const IndexPools& pools, std::size_t m, std::size_t n, SamplerMode mode, Rng& rng);

    std::size_t batch_count() const { return order_.size(); }
    bool done() const { return next_ == order_.size(); }
    ContrastiveBatch next();

private:
    const IndexPools& pools_;
    std::size_t m_, n_;
    SamplerMode mode_;
    Rng& rng_;
    std::vector<int> order_;
    std::size_t next_ = 0;
};

}  // namespace cnc
