#pragma once

#include <vector>

#include "cnc/matrix.hpp"
#include "cnc/rng.hpp"

namespace cnc {

struct KmeansResult {
    Matrix centroids;            // k x d
    std::vector<int> assignment; // per row of the input
    double inertia = 0.0;
};

// Lloyd iterations with k-means++ seeding. Runs `restarts` independent
// attempts and keeps the lowest-inertia result; attempts that produce an
// empty cluster are discarded. Throws ConvergenceError when every attempt
// degenerates.
KmeansResult kmeans(const Matrix& points, std::size_t k, std::size_t restarts, Rng& rng,
                    std::size_t max_iter = 300);

// Principal-component projection to k dims (columns centered first).
Matrix pca_project(const Matrix& x, std::size_t k);

}  // namespace cnc
