#include "cnc/mi.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "cnc/errors.hpp"

namespace cnc {

namespace {

// Multinomial logistic regression state: weights (T x d) and biases (T),
// optimized by Nesterov-accelerated gradient descent with a fixed step from
// the curvature bound of standardized inputs, restarting on objective
// increase.
struct Fit {
    Matrix posterior;  // n x T
};

void softmax_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        double mx = r[0];
        for (double v : r)
            if (v > mx) mx = v;
        double z = 0.0;
        for (double& v : r) {
            v = std::exp(v - mx);
            z += v;
        }
        for (double& v : r) v /= z;
    }
}

double objective(const Matrix& x, std::span<const int> t, const Matrix& w,
                 const std::vector<double>& b, double l2, Matrix* posterior_out) {
    const std::size_t n = x.rows();
    Matrix scores = matmul_nt(x, w);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = scores.row(i);
        for (std::size_t c = 0; c < r.size(); ++c) r[c] += b[c];
    }
    softmax_rows(scores);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        loss -= std::log(std::max(scores(i, static_cast<std::size_t>(t[i])), 1e-300));
    loss /= static_cast<double>(n);
    double pen = 0.0;
    for (double v : w.data()) pen += v * v;
    loss += 0.5 * l2 * pen;
    if (posterior_out) *posterior_out = std::move(scores);
    return loss;
}

void gradient(const Matrix& x, std::span<const int> t, const Matrix& posterior, const Matrix& w,
              double l2, Matrix& gw, std::vector<double>& gb) {
    const std::size_t n = x.rows();
    Matrix resid = posterior;  // p - onehot, scaled 1/n
    for (std::size_t i = 0; i < n; ++i) resid(i, static_cast<std::size_t>(t[i])) -= 1.0;
    scale_inplace(resid, 1.0 / static_cast<double>(n));
    gw = matmul_tn(resid, x);
    for (std::size_t i = 0; i < gw.size(); ++i) gw.data()[i] += l2 * w.data()[i];
    gb.assign(w.rows(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = resid.row(i);
        for (std::size_t c = 0; c < r.size(); ++c) gb[c] += r[c];
    }
}

double max_abs(const Matrix& gw, const std::vector<double>& gb) {
    double m = 0.0;
    for (double v : gw.data()) m = std::max(m, std::fabs(v));
    for (double v : gb) m = std::max(m, std::fabs(v));
    return m;
}

}  // namespace

double mutual_information(const Matrix& z, std::span<const int> targets, const MiConfig& cfg) {
    const std::size_t n = z.rows(), d = z.cols();
    if (targets.size() != n) throw DimensionError("mutual_information: target count mismatch");
    int max_t = -1;
    for (int t : targets) {
        if (t < 0) throw InputError("mutual_information: negative target");
        max_t = std::max(max_t, t);
    }
    const auto num_t = static_cast<std::size_t>(max_t + 1);
    std::vector<std::size_t> marginal_count(num_t, 0);
    for (int t : targets) ++marginal_count[static_cast<std::size_t>(t)];
    std::size_t present = 0;
    for (auto c : marginal_count) present += c > 0 ? 1 : 0;
    if (present < 2) throw InputError("mutual_information: needs at least two target values");

    // Standardize per dimension; constant dims become zero.
    Matrix x = z;
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, c);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = x(i, c) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(n);
        const double inv = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
        for (std::size_t i = 0; i < n; ++i) x(i, c) = (x(i, c) - mean) * inv;
    }

    Matrix w(num_t, d);
    std::vector<double> b(num_t, 0.0);
    Matrix w_prev = w;
    std::vector<double> b_prev = b;
    const double lip = 0.5 * static_cast<double>(d + 1) + cfg.l2;
    const double step = 1.0 / lip;

    Matrix posterior;
    double prev_obj = objective(x, targets, w, b, cfg.l2, &posterior);
    double t_k = 1.0;  // FISTA momentum sequence, reset on objective increase
    bool converged = false;
    double grad_norm = 0.0;
    Matrix gw;
    std::vector<double> gb;

    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_k * t_k));
        const double beta = (t_k - 1.0) / t_next;
        Matrix yw = w;
        std::vector<double> yb = b;
        for (std::size_t i = 0; i < yw.size(); ++i)
            yw.data()[i] += beta * (w.data()[i] - w_prev.data()[i]);
        for (std::size_t i = 0; i < yb.size(); ++i) yb[i] += beta * (b[i] - b_prev[i]);

        Matrix post_y;
        objective(x, targets, yw, yb, cfg.l2, &post_y);
        gradient(x, targets, post_y, yw, cfg.l2, gw, gb);
        grad_norm = max_abs(gw, gb);
        if (grad_norm <= cfg.tol) {
            w = std::move(yw);  // the lookahead point is the certified iterate
            b = std::move(yb);
            converged = true;
            break;
        }

        w_prev = w;
        b_prev = b;
        w = yw;
        b = yb;
        for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] -= step * gw.data()[i];
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= step * gb[i];
        t_k = t_next;

        const double obj = objective(x, targets, w, b, cfg.l2, &posterior);
        if (obj > prev_obj) t_k = 1.0;  // adaptive restart
        prev_obj = obj;
    }
    if (!converged) {
        // Final gradient at the converged-candidate point.
        objective(x, targets, w, b, cfg.l2, &posterior);
        gradient(x, targets, posterior, w, cfg.l2, gw, gb);
        grad_norm = max_abs(gw, gb);
        if (grad_norm > cfg.tol)
            throw ConvergenceError("mutual_information: gradient max-norm " + std::to_string(grad_norm) +
                                   " after " + std::to_string(cfg.max_iter) + " iterations");
    }

    objective(x, targets, w, b, cfg.l2, &posterior);
    double mi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = posterior.row(i);
        for (std::size_t t = 0; t < num_t; ++t) {
            if (marginal_count[t] == 0 || p[t] <= 0.0) continue;
            const double pt = static_cast<double>(marginal_count[t]) / static_cast<double>(n);
            mi += p[t] * std::log(p[t] / pt);
        }
    }
    return mi / static_cast<double>(n);
}

}  // namespace cnc
