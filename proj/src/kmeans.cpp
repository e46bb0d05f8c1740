#include "cnc/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cnc/errors.hpp"

namespace cnc {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

struct Attempt {
    Matrix centroids;
    std::vector<int> assignment;
    double inertia = 0.0;
    bool degenerate = false;
};

Attempt run_attempt(const Matrix& pts, std::size_t k, Rng& rng, std::size_t max_iter) {
    const std::size_t n = pts.rows(), d = pts.cols();
    Attempt out;
    out.centroids = Matrix(k, d);

    // k-means++ seeding.
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = static_cast<std::size_t>(rng.uniform_index(n));
    for (std::size_t c = 0; c < d; ++c) out.centroids(0, c) = pts(first, c);
    for (std::size_t j = 1; j < k; ++j) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = sq_dist(pts.row(i), out.centroids.row(j - 1));
            if (d2 < min_d2[i]) min_d2[i] = d2;
            total += min_d2[i];
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = static_cast<std::size_t>(rng.uniform_index(n));
        } else {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += min_d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        for (std::size_t c = 0; c < d; ++c) out.centroids(j, c) = pts(pick, c);
    }

    out.assignment.assign(n, -1);
    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_j = 0;
            for (std::size_t j = 0; j < k; ++j) {
                const double d2 = sq_dist(pts.row(i), out.centroids.row(j));
                if (d2 < best) {
                    best = d2;
                    best_j = static_cast<int>(j);
                }
            }
            if (out.assignment[i] != best_j) {
                out.assignment[i] = best_j;
                changed = true;
            }
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0u);
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(out.assignment[i]);
            ++counts[j];
            const auto row = pts.row(i);
            for (std::size_t c = 0; c < d; ++c) sums[j * d + c] += row[c];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) {
                out.degenerate = true;
                return out;
            }
            for (std::size_t c = 0; c < d; ++c)
                out.centroids(j, c) = sums[j * d + c] / static_cast<double>(counts[j]);
        }
        if (!changed) break;
    }
    out.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        out.inertia += sq_dist(pts.row(i), out.centroids.row(static_cast<std::size_t>(out.assignment[i])));
    return out;
}

}  // namespace

KmeansResult kmeans(const Matrix& points, std::size_t k, std::size_t restarts, Rng& rng,
                    std::size_t max_iter) {
    if (k == 0 || points.rows() < k) throw InputError("kmeans: need at least k points");
    if (restarts == 0) throw InputError("kmeans: restarts must be >= 1");
    bool have_best = false;
    Attempt best;
    for (std::size_t r = 0; r < restarts; ++r) {
        Attempt a = run_attempt(points, k, rng, max_iter);
        if (a.degenerate) continue;
        if (!have_best || a.inertia < best.inertia) {
            best = std::move(a);
            have_best = true;
        }
    }
    if (!have_best)
        throw ConvergenceError("kmeans: empty cluster in all " + std::to_string(restarts) + " restarts");
    return {std::move(best.centroids), std::move(best.assignment), best.inertia};
}

Matrix pca_project(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows(), d = x.cols();
    if (k > d) throw InputError("pca: k exceeds feature dim");
    Matrix centered = x;
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += centered(i, c);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) centered(i, c) -= mean;
    }
    Matrix cov = matmul_tn(centered, centered);
    scale_inplace(cov, 1.0 / static_cast<double>(n > 1 ? n - 1 : 1));

    // Cyclic Jacobi on the symmetric covariance.
    Matrix v = Matrix::identity(d);
    for (std::size_t sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += cov(p, q) * cov(p, q);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = cov(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (cov(q, q) - cov(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < d; ++i) {
                    const double aip = cov(i, p), aiq = cov(i, q);
                    cov(i, p) = c * aip - s * aiq;
                    cov(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double api = cov(p, i), aqi = cov(q, i);
                    cov(p, i) = c * api - s * aqi;
                    cov(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return cov(a, a) > cov(b, b); });

    Matrix components(d, k);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t col = order[j];
        // Fixed sign: largest-magnitude entry positive.
        std::size_t arg = 0;
        for (std::size_t i = 1; i < d; ++i)
            if (std::fabs(v(i, col)) > std::fabs(v(arg, col))) arg = i;
        const double sign = v(arg, col) >= 0.0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < d; ++i) components(i, j) = sign * v(i, col);
    }
    return matmul(centered, components);
}

}  // namespace cnc
