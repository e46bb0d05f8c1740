#include "cnc/sampler.hpp"

#include <string>

#include "cnc/errors.hpp"

namespace cnc {

const char* sampler_mode_name(SamplerMode mode) {
    switch (mode) {
        case SamplerMode::CncTwoSided: return "cnc_two_sided";
        case SamplerMode::CncOneSided: return "cnc_one_sided";
        case SamplerMode::DifferentClass: return "different_class";
        case SamplerMode::SamePrediction: return "same_prediction";
        case SamplerMode::SupCon: return "supcon";
    }
    return "?";
}

SamplerMode sampler_mode_from_name(const std::string& name) {
    for (auto m : {SamplerMode::CncTwoSided, SamplerMode::CncOneSided, SamplerMode::DifferentClass,
                   SamplerMode::SamePrediction, SamplerMode::SupCon})
        if (name == sampler_mode_name(m)) return m;
    throw InputError("unknown sampler mode '" + name + "'");
}

std::size_t IndexPools::total() const {
    std::size_t n = 0;
    for (const auto& p : pools) n += p.size();
    return n;
}

IndexPools index_pools(std::span<const int> labels, std::span<const int> predictions,
                       std::size_t num_classes) {
    if (labels.size() != predictions.size()) throw DimensionError("index_pools: array length mismatch");
    IndexPools out;
    out.num_classes = num_classes;
    out.pools.assign(num_classes * num_classes, {});
    out.labels.assign(labels.begin(), labels.end());
    out.predictions.assign(predictions.begin(), predictions.end());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i], yh = predictions[i];
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes || yh < 0 ||
            static_cast<std::size_t>(yh) >= num_classes)
            throw InputError("index_pools: label or prediction out of range at " + std::to_string(i));
        out.pools[static_cast<std::size_t>(y) * num_classes + static_cast<std::size_t>(yh)].push_back(
            static_cast<int>(i));
    }
    return out;
}

namespace {

// Uniform draw of `count` entries from the concatenation of the given pools;
// without replacement when enough distinct entries exist.
std::vector<int> draw(const std::vector<const std::vector<int>*>& parts, std::size_t count, Rng& rng,
                      const char* what) {
    std::vector<int> universe;
    for (const auto* p : parts) universe.insert(universe.end(), p->begin(), p->end());
    if (universe.empty())
        throw SamplerExhausted(std::string("sampler: no eligible ") + what);
    std::vector<int> out;
    out.reserve(count);
    if (universe.size() >= count) {
        // partial Fisher-Yates
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng.uniform_index(universe.size() - k));
            std::swap(universe[k], universe[j]);
            out.push_back(universe[k]);
        }
    } else {
        for (std::size_t k = 0; k < count; ++k)
            out.push_back(universe[static_cast<std::size_t>(rng.uniform_index(universe.size()))]);
    }
    return out;
}

std::vector<const std::vector<int>*> positive_pools(const IndexPools& p, int y, int yhat,
                                                    SamplerMode mode) {
    std::vector<const std::vector<int>*> parts;
    const int c = static_cast<int>(p.num_classes);
    if (mode == SamplerMode::SupCon) {
        for (int yh = 0; yh < c; ++yh) parts.push_back(&p.pool(y, yh));  // same class, any prediction
    } else {
        for (int yh = 0; yh < c; ++yh)
            if (yh != yhat) parts.push_back(&p.pool(y, yh));  // same class, different prediction
    }
    return parts;
}

std::vector<const std::vector<int>*> negative_pools(const IndexPools& p, int y, int yhat,
                                                    SamplerMode mode) {
    std::vector<const std::vector<int>*> parts;
    const int c = static_cast<int>(p.num_classes);
    switch (mode) {
        case SamplerMode::DifferentClass:
        case SamplerMode::SupCon:
            for (int yy = 0; yy < c; ++yy)
                if (yy != y)
                    for (int yh = 0; yh < c; ++yh) parts.push_back(&p.pool(yy, yh));
            break;
        case SamplerMode::SamePrediction:
            for (int yy = 0; yy < c; ++yy) parts.push_back(&p.pool(yy, yhat));
            break;
        default:  // cnc one/two sided: different class, same prediction
            for (int yy = 0; yy < c; ++yy)
                if (yy != y) parts.push_back(&p.pool(yy, yhat));
            break;
    }
    return parts;
}

}  // namespace

std::vector<int> eligible_anchors(const IndexPools& pools, SamplerMode mode) {
    std::vector<int> out;
    const int c = static_cast<int>(pools.num_classes);
    if (mode == SamplerMode::SupCon) {
        out.resize(pools.labels.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
        return out;
    }
    for (int y = 0; y < c; ++y) {
        const auto& diag = pools.pool(y, y);
        out.insert(out.end(), diag.begin(), diag.end());
    }
    return out;
}

ContrastiveBatch sample_batch(const IndexPools& pools, std::size_t m, std::size_t n, SamplerMode mode,
                              int primary_anchor, Rng& rng) {
    if (m < 1 || n < 1) throw InputError("sample_batch: M and N must be >= 1");
    const int y = pools.labels[static_cast<std::size_t>(primary_anchor)];
    const int yhat = pools.predictions[static_cast<std::size_t>(primary_anchor)];
    if (mode != SamplerMode::SupCon && y != yhat)
        throw InputError("sample_batch: primary anchor must be correctly predicted");

    ContrastiveBatch batch;
    batch.mode = mode;
    batch.anchors.push_back(primary_anchor);

    if (mode != SamplerMode::CncOneSided && m > 1) {
        std::vector<const std::vector<int>*> anchor_parts;
        if (mode == SamplerMode::SupCon) {
            anchor_parts = positive_pools(pools, y, yhat, mode);  // same class, any prediction
        } else {
            anchor_parts.push_back(&pools.pool(y, yhat));
        }
        auto more = draw(anchor_parts, m - 1, rng, "additional anchors");
        batch.anchors.insert(batch.anchors.end(), more.begin(), more.end());
    }

    batch.positives = draw(positive_pools(pools, y, yhat, mode), m, rng,
                           "positives (same class, different prediction)");
    batch.negatives = draw(negative_pools(pools, y, yhat, mode), n, rng,
                           "negatives (different class, same prediction)");

    if (mode != SamplerMode::CncOneSided) {
        const int pos1 = batch.positives.front();
        const int y1 = pools.labels[static_cast<std::size_t>(pos1)];
        const int yhat1 = pools.predictions[static_cast<std::size_t>(pos1)];
        batch.negatives2 = draw(negative_pools(pools, y1, yhat1, mode), n, rng,
                                "negatives for the role-swapped side");
    }
    return batch;
}

EpochSchedule::EpochSchedule(const IndexPools& pools, std::size_t m, std::size_t n, SamplerMode mode,
                             Rng& rng)
    : pools_(pools), m_(m), n_(n), mode_(mode), rng_(rng) {
    order_ = eligible_anchors(pools, mode);
    rng_.shuffle(order_);
}

ContrastiveBatch EpochSchedule::next() {
    if (done()) throw InputError("EpochSchedule: exhausted");
    return sample_batch(pools_, m_, n_, mode_, order_[next_++], rng_);
}

}  // namespace cnc
