#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cnc/dataset.hpp"
#include "cnc/idx.hpp"

namespace cnc {

struct Rgb {
    double r = 0.0, g = 0.0, b = 0.0;
};

// Five digit-pair classes, five colors. Training samples of class y take the
// class-associated color with probability p_corr (else a uniformly random
// palette color); val/test colors are uniformly random. The recorded
// attribute is the color actually applied.
struct CmnistSpec {
    double p_corr = 0.995;
    std::array<Rgb, 5> palette = default_palette();
    std::uint64_t seed = 0;

    static std::array<Rgb, 5> default_palette();  // ff0000 85ff00 00fff3 6e00ff ff0018
    void validate() const;
};

// train_images/train_labels are the MNIST training tensors (split 80/20 into
// train/val, stratified by class); test_* become the test split.
LabeledDataset build_cmnist(const IdxTensor& train_images, const IdxTensor& train_labels,
                            const IdxTensor& test_images, const IdxTensor& test_labels,
                            const CmnistSpec& spec);

// Download-free synthetic stand-in with the same group structure: class means
// in a core block, attribute means in a spurious block, unit Gaussian noise.
// Means are drawn once from seeded spheres of the given radii.
struct BlobSpec {
    std::size_t num_classes = 5;
    std::size_t num_attrs = 5;
    std::size_t d_core = 10;
    std::size_t d_spur = 10;
    double separation = 3.0;       // core sphere radius
    double spur_separation = 6.0;  // spurious sphere radius
    double p_corr = 0.995;
    std::size_t n_train = 10000;
    std::size_t n_val = 2000;
    std::size_t n_test = 4000;
    std::uint64_t seed = 0;

    void validate() const;
};

LabeledDataset build_blobs(const BlobSpec& spec);

// Class spuriously associated with each attribute (inverse of a(y) = y mod A).
// Requires num_attrs == num_classes; used by the oracle inference paths.
int class_for_attr(const LabeledDataset& ds, int attr);

// Groups absent from the train split (the setup assumes there are none, but
// extreme p_corr at small n can produce them; callers treat this as a flag).
std::vector<int> missing_train_groups(const LabeledDataset& ds);

}  // namespace cnc
