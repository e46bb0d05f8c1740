#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cnc {

// One tensor from an IDX file. Only the two MNIST layouts are accepted:
// magic 0x00000803 (uint8 images, dims count/rows/cols) and
// magic 0x00000801 (uint8 label vector).
struct IdxTensor {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> payload;

    std::size_t element_count() const;
};

IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor);

// Reads a file, transparently gunzipping when the 0x1f8b magic is present.
std::vector<std::uint8_t> read_file_maybe_gzip(const std::string& path);

}  // namespace cnc
