#pragma once

#include <cstddef>

#include "cnc/matrix.hpp"

namespace cnc {

struct MiConfig {
    double l2 = 1e-4;       // ridge penalty on regression weights
    double tol = 1e-6;      // max-norm gradient tolerance
    std::size_t max_iter = 50000;
};

// Plug-in mutual information estimate: fit a multinomial logistic regression
// of the targets on the (standardized) representations by full-batch gradient
// descent, then average KL(p(t|z) || p(t)) with the empirical marginal.
// Natural log; throws ConvergenceError with the final gradient norm.
double mutual_information(const Matrix& z, std::span<const int> targets, const MiConfig& cfg = {});

}  // namespace cnc
