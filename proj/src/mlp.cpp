#include "cnc/mlp.hpp"

#include <cmath>
#include <string>

#include "cnc/errors.hpp"

namespace cnc {

namespace {

void apply_activation(Matrix& m, Activation act) {
    if (act == Activation::Identity) return;
    for (double& v : m.data())
        if (v < 0.0) v = 0.0;
}

std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> sums(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        for (std::size_t c = 0; c < m.cols(); ++c) sums[c] += r[c];
    }
    return sums;
}

Matrix linear(const Matrix& x, const Layer& layer) {
    if (x.cols() != layer.in_dim())
        throw DimensionError("layer expects in_dim " + std::to_string(layer.in_dim()) + ", got " +
                             std::to_string(x.cols()));
    Matrix out = matmul_nt(x, layer.weight);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t c = 0; c < out.cols(); ++c) r[c] += layer.bias[c];
    }
    return out;
}

}  // namespace

void MlpModel::check_shapes() const {
    std::size_t prev = encoder.empty() ? cls_weight.cols() : encoder.front().in_dim();
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        if (encoder[i].in_dim() != prev)
            throw DimensionError("encoder layer " + std::to_string(i) + " in_dim mismatch");
        if (encoder[i].bias.size() != encoder[i].out_dim())
            throw DimensionError("encoder layer " + std::to_string(i) + " bias size mismatch");
        prev = encoder[i].out_dim();
    }
    if (cls_weight.cols() != prev) throw DimensionError("classifier in_dim mismatch");
    if (cls_bias.size() != cls_weight.rows()) throw DimensionError("classifier bias size mismatch");
}

std::size_t MlpModel::num_params() const {
    std::size_t n = cls_weight.size() + cls_bias.size();
    for (const auto& l : encoder) n += l.weight.size() + l.bias.size();
    return n;
}

double* MlpModel::param_at(std::size_t flat_index) {
    for (auto& l : encoder) {
        if (flat_index < l.weight.size()) return &l.weight.data()[flat_index];
        flat_index -= l.weight.size();
        if (flat_index < l.bias.size()) return &l.bias[flat_index];
        flat_index -= l.bias.size();
    }
    if (flat_index < cls_weight.size()) return &cls_weight.data()[flat_index];
    flat_index -= cls_weight.size();
    if (flat_index < cls_bias.size()) return &cls_bias[flat_index];
    throw DimensionError("param index out of range");
}

MlpModel init_model(const ModelConfig& cfg, Rng& rng) {
    if (cfg.in_dim == 0 || cfg.num_classes == 0 || cfg.hidden_dims.empty())
        throw InputError("model config needs in_dim, num_classes and at least one hidden layer");
    MlpModel model;
    std::size_t prev = cfg.in_dim;
    for (std::size_t h : cfg.hidden_dims) {
        Layer layer;
        layer.weight = Matrix(h, prev);
        const double bound = std::sqrt(6.0 / static_cast<double>(prev + h));
        for (double& v : layer.weight.data()) v = (2.0 * rng.uniform() - 1.0) * bound;
        layer.bias.assign(h, 0.0);
        layer.act = Activation::Relu;
        model.encoder.push_back(std::move(layer));
        prev = h;
    }
    model.cls_weight = Matrix(cfg.num_classes, prev);
    const double bound = std::sqrt(6.0 / static_cast<double>(prev + cfg.num_classes));
    for (double& v : model.cls_weight.data()) v = (2.0 * rng.uniform() - 1.0) * bound;
    model.cls_bias.assign(cfg.num_classes, 0.0);
    model.check_shapes();
    return model;
}

ForwardCache forward_cached(const MlpModel& model, const Matrix& batch) {
    ForwardCache cache;
    cache.input = batch;
    Matrix cur = batch;
    for (const auto& layer : model.encoder) {
        Matrix pre = linear(cur, layer);
        cache.preacts.push_back(pre);
        apply_activation(pre, layer.act);
        cache.postacts.push_back(pre);
        cur = std::move(pre);
    }
    Layer cls{model.cls_weight, model.cls_bias, Activation::Identity};
    cache.logits = linear(cur, cls);
    return cache;
}

Forward forward(const MlpModel& model, const Matrix& batch) {
    ForwardCache cache = forward_cached(model, batch);
    return {cache.postacts.back(), std::move(cache.logits)};
}

GradientStore GradientStore::zeros_like(const MlpModel& model) {
    GradientStore g;
    for (const auto& l : model.encoder) {
        g.enc_weight.emplace_back(l.weight.rows(), l.weight.cols());
        g.enc_bias.emplace_back(l.bias.size(), 0.0);
    }
    g.cls_weight = Matrix(model.cls_weight.rows(), model.cls_weight.cols());
    g.cls_bias.assign(model.cls_bias.size(), 0.0);
    return g;
}

void GradientStore::zero() {
    for (auto& w : enc_weight)
        for (double& v : w.data()) v = 0.0;
    for (auto& b : enc_bias)
        for (double& v : b) v = 0.0;
    for (double& v : cls_weight.data()) v = 0.0;
    for (double& v : cls_bias) v = 0.0;
}

void GradientStore::add(const GradientStore& other) {
    for (std::size_t i = 0; i < enc_weight.size(); ++i) {
        add_inplace(enc_weight[i], other.enc_weight[i]);
        for (std::size_t j = 0; j < enc_bias[i].size(); ++j) enc_bias[i][j] += other.enc_bias[i][j];
    }
    add_inplace(cls_weight, other.cls_weight);
    for (std::size_t j = 0; j < cls_bias.size(); ++j) cls_bias[j] += other.cls_bias[j];
}

double GradientStore::max_abs() const {
    double m = 0.0;
    auto upd = [&m](double v) {
        const double a = std::fabs(v);
        if (a > m) m = a;
    };
    for (const auto& w : enc_weight)
        for (double v : w.data()) upd(v);
    for (const auto& b : enc_bias)
        for (double v : b) upd(v);
    for (double v : cls_weight.data()) upd(v);
    for (double v : cls_bias) upd(v);
    return m;
}

GradientStore backward(const MlpModel& model, const ForwardCache& cache, const Matrix& d_rep,
                       const Matrix& d_logits, Matrix* d_input) {
    const Matrix& rep = cache.representations();
    GradientStore grads = GradientStore::zeros_like(model);

    Matrix d_post(rep.rows(), rep.cols());
    if (d_rep.size() != 0) {
        if (d_rep.rows() != rep.rows() || d_rep.cols() != rep.cols())
            throw DimensionError("backward: d_rep shape mismatch");
        d_post = d_rep;
    }
    if (d_logits.size() != 0) {
        if (d_logits.rows() != cache.logits.rows() || d_logits.cols() != cache.logits.cols())
            throw DimensionError("backward: d_logits shape mismatch");
        grads.cls_weight = matmul_tn(d_logits, rep);
        grads.cls_bias = column_sums(d_logits);
        add_inplace(d_post, matmul(d_logits, model.cls_weight));
    }

    for (std::size_t li = model.encoder.size(); li-- > 0;) {
        const Layer& layer = model.encoder[li];
        Matrix d_pre = std::move(d_post);
        if (layer.act == Activation::Relu) {
            const Matrix& pre = cache.preacts[li];
            for (std::size_t i = 0; i < d_pre.size(); ++i)
                if (pre.data()[i] <= 0.0) d_pre.data()[i] = 0.0;
        }
        const Matrix& input = (li == 0) ? cache.input : cache.postacts[li - 1];
        grads.enc_weight[li] = matmul_tn(d_pre, input);
        grads.enc_bias[li] = column_sums(d_pre);
        if (li > 0)
            d_post = matmul(d_pre, layer.weight);
        else if (d_input)
            *d_input = matmul(d_pre, layer.weight);
    }
    if (model.encoder.empty() && d_input) *d_input = std::move(d_post);
    return grads;
}

CrossEntropy cross_entropy(const Matrix& logits, std::span<const int> labels) {
    const std::size_t n = logits.rows(), c = logits.cols();
    if (labels.size() != n) throw DimensionError("cross_entropy: label count mismatch");
    CrossEntropy out;
    out.dlogits = Matrix(n, c);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw InputError("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                             std::to_string(c) + ")");
        const auto l = logits.row(i);
        double mx = l[0];
        for (double v : l)
            if (v > mx) mx = v;
        double z = 0.0;
        for (double v : l) z += std::exp(v - mx);
        const double log_z = std::log(z) + mx;
        total += log_z - l[static_cast<std::size_t>(y)];
        auto d = out.dlogits.row(i);
        for (std::size_t j = 0; j < c; ++j) d[j] = std::exp(l[j] - log_z) / static_cast<double>(n);
        d[static_cast<std::size_t>(y)] -= 1.0 / static_cast<double>(n);
    }
    out.loss = total / static_cast<double>(n);
    return out;
}

namespace {

void sgd_update(Matrix& theta, const Matrix& grad, Matrix& vel, const SgdConfig& cfg) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double& v = vel.data()[i];
        v = cfg.momentum * v + grad.data()[i] + cfg.weight_decay * theta.data()[i];
        theta.data()[i] -= cfg.learning_rate * v;
    }
}

void sgd_update(std::vector<double>& theta, const std::vector<double>& grad, std::vector<double>& vel,
                const SgdConfig& cfg) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double& v = vel[i];
        v = cfg.momentum * v + grad[i] + cfg.weight_decay * theta[i];
        theta[i] -= cfg.learning_rate * v;
    }
}

}  // namespace

void sgd_step(MlpModel& model, const GradientStore& grads, const SgdConfig& cfg, SgdState& state) {
    for (std::size_t i = 0; i < model.encoder.size(); ++i) {
        sgd_update(model.encoder[i].weight, grads.enc_weight[i], state.velocity.enc_weight[i], cfg);
        sgd_update(model.encoder[i].bias, grads.enc_bias[i], state.velocity.enc_bias[i], cfg);
    }
    sgd_update(model.cls_weight, grads.cls_weight, state.velocity.cls_weight, cfg);
    sgd_update(model.cls_bias, grads.cls_bias, state.velocity.cls_bias, cfg);
}

NormalizedRows l2_normalize_rows(const Matrix& m) {
    NormalizedRows out;
    out.values = m;
    out.degenerate.assign(m.rows(), 0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = out.values.row(i);
        const double norm = l2_norm(r);
        if (norm < 1e-12) {
            out.degenerate[i] = 1;
            continue;
        }
        for (double& v : r) v /= norm;
    }
    return out;
}

Matrix l2_normalize_backward(const Matrix& original, const Matrix& d_normalized) {
    if (original.rows() != d_normalized.rows() || original.cols() != d_normalized.cols())
        throw DimensionError("l2_normalize_backward: shape mismatch");
    Matrix out(original.rows(), original.cols());
    for (std::size_t i = 0; i < original.rows(); ++i) {
        const auto r = original.row(i);
        const auto g = d_normalized.row(i);
        auto o = out.row(i);
        const double norm = l2_norm(r);
        if (norm < 1e-12) {
            for (std::size_t c = 0; c < r.size(); ++c) o[c] = g[c];
            continue;
        }
        const double inv = 1.0 / norm;
        const double zg = dot(r, g) * inv * inv;  // (r . g) / norm^2
        for (std::size_t c = 0; c < r.size(); ++c) o[c] = (g[c] - r[c] * zg) * inv;
    }
    return out;
}

double spectral_norm(const Matrix& w, double tol, std::size_t max_iter) {
    if (tol <= 0.0) throw InputError("spectral_norm: tol must be positive");
    if (w.size() == 0) return 0.0;
    Rng rng(0x5eedULL);
    std::vector<double> v(w.cols());
    for (double& x : v) x = rng.normal();
    double vn = l2_norm(v);
    if (vn == 0.0) v[0] = vn = 1.0;
    for (double& x : v) x /= vn;

    double sigma_prev = -1.0;
    std::vector<double> u(w.rows());
    for (std::size_t it = 0; it < max_iter; ++it) {
        // u = W v
        for (std::size_t i = 0; i < w.rows(); ++i) u[i] = dot(w.row(i), v);
        const double sigma = l2_norm(u);
        if (sigma < 1e-300) return 0.0;
        // v = W^T u, normalized
        std::vector<double> vt(w.cols(), 0.0);
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const auto r = w.row(i);
            for (std::size_t j = 0; j < w.cols(); ++j) vt[j] += r[j] * u[i];
        }
        const double vtn = l2_norm(vt);
        for (std::size_t j = 0; j < w.cols(); ++j) v[j] = vt[j] / vtn;
        if (sigma_prev >= 0.0 && std::fabs(sigma - sigma_prev) <= tol * sigma) return sigma;
        sigma_prev = sigma;
    }
    throw ConvergenceError("spectral_norm: no convergence after " + std::to_string(max_iter) +
                           " iterations");
}

}  // namespace cnc
