#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cnc/matrix.hpp"

namespace cnc {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

// All splits in one container; per-sample arrays are index-aligned.
// group id = y * num_attrs + a.
struct LabeledDataset {
    Matrix features;           // n x D
    std::vector<int> labels;   // y in [0, C)
    std::vector<int> attrs;    // a in [0, A)
    std::vector<Split> split;  // per-sample split tag
    std::size_t num_classes = 0;
    std::size_t num_attrs = 0;
    std::string kind;  // "blobs" | "cmnist"

    std::size_t size() const { return labels.size(); }
    std::size_t num_groups() const { return num_classes * num_attrs; }
    int group_id(std::size_t i) const {
        return labels[i] * static_cast<int>(num_attrs) + attrs[i];
    }

    std::vector<int> indices_of(Split s) const;
    void check_consistent() const;  // throws DataError on broken invariants
};

// Per-group sample counts over one split; table length is C*A, indexed by group id.
std::vector<std::int64_t> group_counts(const LabeledDataset& ds, Split split);

// Versioned binary cache (format documented in docs/formats.md).
void save_dataset(const LabeledDataset& ds, const std::string& path,
                  const std::string& provenance_json);
LabeledDataset load_dataset(const std::string& path, std::string* provenance_json = nullptr);

}  // namespace cnc
