#pragma once

// Test-only reference implementations, kept independent of the library paths
// they check: a straight-line MLP forward pass, central finite differences
// over model parameters, and a Jacobi-rotation singular value routine.

#include <cmath>
#include <functional>
#include <vector>

#include "cnc/mlp.hpp"

namespace oracle {

// Forward pass written as plain loops over std::vector, no Matrix helpers.
inline std::pair<std::vector<double>, std::vector<double>> straight_line_forward(
    const cnc::MlpModel& model, const std::vector<double>& x) {
    std::vector<double> cur = x;
    for (const auto& layer : model.encoder) {
        std::vector<double> next(layer.out_dim(), 0.0);
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            double acc = layer.bias[o];
            for (std::size_t i = 0; i < layer.in_dim(); ++i) acc += layer.weight(o, i) * cur[i];
            if (layer.act == cnc::Activation::Relu && acc < 0.0) acc = 0.0;
            next[o] = acc;
        }
        cur = std::move(next);
    }
    std::vector<double> logits(model.num_classes(), 0.0);
    for (std::size_t o = 0; o < model.num_classes(); ++o) {
        double acc = model.cls_bias[o];
        for (std::size_t i = 0; i < model.rep_dim(); ++i) acc += model.cls_weight(o, i) * cur[i];
        logits[o] = acc;
    }
    return {cur, logits};
}

// Central finite differences d loss / d theta over every parameter.
inline std::vector<double> fd_gradient(cnc::MlpModel model,
                                       const std::function<double(const cnc::MlpModel&)>& loss,
                                       double h = 1e-5) {
    std::vector<double> grad(model.num_params());
    for (std::size_t j = 0; j < grad.size(); ++j) {
        double* p = model.param_at(j);
        const double saved = *p;
        *p = saved + h;
        const double up = loss(model);
        *p = saved - h;
        const double down = loss(model);
        *p = saved;
        grad[j] = (up - down) / (2.0 * h);
    }
    return grad;
}

// Flatten an analytic GradientStore in the same parameter order as param_at.
inline std::vector<double> flatten(const cnc::GradientStore& g) {
    std::vector<double> out;
    for (std::size_t li = 0; li < g.enc_weight.size(); ++li) {
        out.insert(out.end(), g.enc_weight[li].data().begin(), g.enc_weight[li].data().end());
        out.insert(out.end(), g.enc_bias[li].begin(), g.enc_bias[li].end());
    }
    out.insert(out.end(), g.cls_weight.data().begin(), g.cls_weight.data().end());
    out.insert(out.end(), g.cls_bias.begin(), g.cls_bias.end());
    return out;
}

// Max relative error with an absolute floor for near-zero entries.
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b,
                            double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::fabs(a[i]), std::fabs(b[i]), floor});
        worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
    }
    return worst;
}

// Largest singular value via two-sided Jacobi on W^T W.
inline double jacobi_spectral_norm(const cnc::Matrix& w) {
    const std::size_t d = w.cols();
    std::vector<double> a(d * d, 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = 0; q < d; ++q) a[p * d + q] += w(i, p) * w(i, q);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
        if (off < 1e-28) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a[p * d + q];
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                const double t =
                    (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t i = 0; i < d; ++i) {
                    const double aip = a[i * d + p], aiq = a[i * d + q];
                    a[i * d + p] = c * aip - s * aiq;
                    a[i * d + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double api = a[p * d + i], aqi = a[q * d + i];
                    a[p * d + i] = c * api - s * aqi;
                    a[q * d + i] = s * api + c * aqi;
                }
            }
        }
    }
    double lmax = 0.0;
    for (std::size_t i = 0; i < d; ++i) lmax = std::max(lmax, a[i * d + i]);
    return std::sqrt(std::max(0.0, lmax));
}

}  // namespace oracle
