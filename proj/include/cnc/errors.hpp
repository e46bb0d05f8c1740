#pragma once

#include <stdexcept>
#include <string>

namespace cnc {

// Shape disagreement between tensors or model parts.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed external input (bad IDX magic, label out of range, bad config value).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Byte-level file format violations.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative routine failed to reach tolerance.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// A contrastive pool needed for sampling is empty.
struct SamplerExhausted : std::runtime_error {
    explicit SamplerExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Training diverged or hit an unrecoverable state.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset construction impossible (missing class, empty split).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cnc
