#include "cnc/losses.hpp"

#include <cmath>

#include "cnc/errors.hpp"

namespace cnc {

const char* objective_name(Objective o) {
    switch (o) {
        case Objective::Cnc: return "cnc";
        case Objective::DirectAlign: return "direct_align";
        case Objective::CeOnly: return "ce_only";
    }
    return "?";
}

Objective objective_from_name(const std::string& name) {
    for (auto o : {Objective::Cnc, Objective::DirectAlign, Objective::CeOnly})
        if (name == objective_name(o)) return o;
    throw InputError("unknown objective '" + name + "'");
}

void LossConfig::validate() const {
    if (tau <= 0.0) throw InputError("loss: tau must be positive");
    if (lambda < 0.0 || lambda > 1.0) throw InputError("loss: lambda must be in [0,1]");
}

SupconResult supcon_loss(std::span<const double> z_anchor, const Matrix& z_pos, const Matrix& z_neg,
                         double tau) {
    const std::size_t m = z_pos.rows(), n = z_neg.rows(), d = z_anchor.size();
    if (m == 0) throw InputError("supcon: needs at least one positive");
    if (z_pos.cols() != d || (n > 0 && z_neg.cols() != d))
        throw DimensionError("supcon: representation dims disagree");
    for (double v : z_anchor)
        if (!std::isfinite(v)) throw InputError("supcon: non-finite anchor");
    if (!z_pos.all_finite() || !z_neg.all_finite()) throw InputError("supcon: non-finite input");

    // logits s_m, t_n scaled by 1/tau; stable log-sum-exp over all of them
    std::vector<double> logits(m + n);
    for (std::size_t i = 0; i < m; ++i) logits[i] = dot(z_anchor, z_pos.row(i)) / tau;
    for (std::size_t j = 0; j < n; ++j) logits[m + j] = dot(z_anchor, z_neg.row(j)) / tau;
    double mx = logits[0];
    for (double v : logits)
        if (v > mx) mx = v;
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    const double lse = mx + std::log(z);

    double mean_pos = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean_pos += logits[i];
    mean_pos /= static_cast<double>(m);

    SupconResult out;
    out.loss = lse - mean_pos;

    // dloss/dlogit_k = p_k - [k positive]/M
    std::vector<double> dlogit(m + n);
    for (std::size_t k = 0; k < m + n; ++k) dlogit[k] = std::exp(logits[k] - lse);
    for (std::size_t i = 0; i < m; ++i) dlogit[i] -= 1.0 / static_cast<double>(m);

    out.d_anchor.assign(d, 0.0);
    out.d_pos = Matrix(m, d);
    out.d_neg = Matrix(n, d);
    for (std::size_t i = 0; i < m; ++i) {
        const double g = dlogit[i] / tau;
        const auto zp = z_pos.row(i);
        auto dp = out.d_pos.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            out.d_anchor[c] += g * zp[c];
            dp[c] = g * z_anchor[c];
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double g = dlogit[m + j] / tau;
        const auto zn = z_neg.row(j);
        auto dn = out.d_neg.row(j);
        for (std::size_t c = 0; c < d; ++c) {
            out.d_anchor[c] += g * zn[c];
            dn[c] = g * z_anchor[c];
        }
    }
    return out;
}

TwoSidedResult two_sided_loss(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                              const Matrix& negatives2, double tau) {
    if (anchors.rows() == 0 || positives.rows() == 0)
        throw DimensionError("two_sided_loss: anchors and positives required");
    TwoSidedResult out;
    out.d_anchors = Matrix(anchors.rows(), anchors.cols());
    out.d_positives = Matrix(positives.rows(), positives.cols());
    out.d_negatives = Matrix(negatives.rows(), negatives.cols());
    out.d_negatives2 = Matrix(negatives2.rows(), negatives2.cols());

    SupconResult left = supcon_loss(anchors.row(0), positives, negatives, tau);
    out.loss = left.loss;
    for (std::size_t c = 0; c < anchors.cols(); ++c) out.d_anchors(0, c) += left.d_anchor[c];
    add_inplace(out.d_positives, left.d_pos);
    add_inplace(out.d_negatives, left.d_neg);

    if (negatives2.rows() > 0) {
        SupconResult right = supcon_loss(positives.row(0), anchors, negatives2, tau);
        out.loss += right.loss;
        for (std::size_t c = 0; c < positives.cols(); ++c) out.d_positives(0, c) += right.d_anchor[c];
        add_inplace(out.d_anchors, right.d_pos);
        add_inplace(out.d_negatives2, right.d_neg);
    }
    return out;
}

namespace {

JointLoss assemble(const MlpModel& model, const Matrix& features, std::span<const int> labels,
                   const BatchLayout& layout, const LossConfig& cfg, const MlpModel* projection_head) {
    cfg.validate();
    if (features.rows() != layout.rows()) throw DimensionError("batch rows do not match layout");
    if (labels.size() != features.rows()) throw DimensionError("label count does not match batch");

    JointLoss out;
    ForwardCache cache = forward_cached(model, features);
    const Matrix& rep = cache.representations();

    Matrix d_rep;  // lambda-weighted contrastive inflow at the representations
    if (cfg.objective == Objective::CeOnly || cfg.lambda == 0.0) {
        out.contrastive = 0.0;
    } else if (cfg.objective == Objective::Cnc) {
        const Matrix* con_input = &rep;
        ForwardCache head_cache;
        if (projection_head) {
            head_cache = forward_cached(*projection_head, rep);
            con_input = &head_cache.logits;
        }
        NormalizedRows norm = l2_normalize_rows(*con_input);

        const auto take = [&](std::size_t off, std::size_t count) {
            Matrix m(count, norm.values.cols());
            for (std::size_t i = 0; i < count; ++i)
                for (std::size_t c = 0; c < m.cols(); ++c) m(i, c) = norm.values(off + i, c);
            return m;
        };
        const std::size_t off_pos = layout.num_anchors;
        const std::size_t off_neg = off_pos + layout.num_positives;
        const std::size_t off_neg2 = off_neg + layout.num_negatives;
        TwoSidedResult con = two_sided_loss(take(0, layout.num_anchors),
                                            take(off_pos, layout.num_positives),
                                            take(off_neg, layout.num_negatives),
                                            take(off_neg2, layout.num_negatives2), cfg.tau);
        out.contrastive = con.loss;

        Matrix d_norm(norm.values.rows(), norm.values.cols());
        const auto put = [&](const Matrix& part, std::size_t off) {
            for (std::size_t i = 0; i < part.rows(); ++i)
                for (std::size_t c = 0; c < part.cols(); ++c) d_norm(off + i, c) += part(i, c);
        };
        put(con.d_anchors, 0);
        put(con.d_positives, off_pos);
        put(con.d_negatives, off_neg);
        put(con.d_negatives2, off_neg2);

        Matrix d_con_input = l2_normalize_backward(*con_input, d_norm);
        if (projection_head) {
            Matrix d_head_in;
            out.head_grads =
                backward(*projection_head, head_cache, Matrix(), d_con_input, &d_head_in);
            // scale head grads by lambda
            for (auto& w : out.head_grads.enc_weight) scale_inplace(w, cfg.lambda);
            for (auto& b : out.head_grads.enc_bias)
                for (double& v : b) v *= cfg.lambda;
            scale_inplace(out.head_grads.cls_weight, cfg.lambda);
            for (double& v : out.head_grads.cls_bias) v *= cfg.lambda;
            d_rep = std::move(d_head_in);
        } else {
            d_rep = std::move(d_con_input);
        }
        scale_inplace(d_rep, cfg.lambda);
    } else {  // DirectAlign: mean pairwise distance between anchor and positive reps
        const std::size_t ma = layout.num_anchors, mp = layout.num_positives;
        if (ma == 0 || mp == 0) throw DimensionError("direct_align: needs anchors and positives");
        d_rep = Matrix(rep.rows(), rep.cols());
        const double scale = 1.0 / static_cast<double>(ma * mp);
        double align = 0.0;
        for (std::size_t i = 0; i < ma; ++i) {
            for (std::size_t j = 0; j < mp; ++j) {
                const auto ri = rep.row(i);
                const auto rj = rep.row(layout.num_anchors + j);
                double d2 = 0.0;
                for (std::size_t c = 0; c < rep.cols(); ++c) {
                    const double diff = ri[c] - rj[c];
                    d2 += diff * diff;
                }
                const double dist = std::sqrt(d2);
                align += dist;
                if (dist > 1e-12) {
                    for (std::size_t c = 0; c < rep.cols(); ++c) {
                        const double g = scale * (ri[c] - rj[c]) / dist;
                        d_rep(i, c) += g;
                        d_rep(layout.num_anchors + j, c) -= g;
                    }
                }
            }
        }
        out.contrastive = align * scale;
        scale_inplace(d_rep, cfg.lambda);
    }

    CrossEntropy ce = cross_entropy(cache.logits, labels);
    out.ce = ce.loss;
    Matrix d_logits = std::move(ce.dlogits);
    if (cfg.objective == Objective::CeOnly) {
        out.total = out.ce;  // d_logits stays unweighted
    } else {
        scale_inplace(d_logits, 1.0 - cfg.lambda);
        out.total = cfg.lambda * out.contrastive + (1.0 - cfg.lambda) * out.ce;
    }

    out.grads = backward(model, cache, d_rep, d_logits);
    return out;
}

}  // namespace

JointLoss joint_loss(const MlpModel& model, const Matrix& features, std::span<const int> labels,
                     const BatchLayout& layout, const LossConfig& cfg, const MlpModel* projection_head) {
    if (cfg.objective != Objective::Cnc) throw InputError("joint_loss: objective must be cnc");
    return assemble(model, features, labels, layout, cfg, projection_head);
}

JointLoss direct_align_loss(const MlpModel& model, const Matrix& features, std::span<const int> labels,
                            const BatchLayout& layout, const LossConfig& cfg) {
    if (cfg.objective != Objective::DirectAlign)
        throw InputError("direct_align_loss: objective must be direct_align");
    return assemble(model, features, labels, layout, cfg, nullptr);
}

JointLoss batch_loss(const MlpModel& model, const Matrix& features, std::span<const int> labels,
                     const BatchLayout& layout, const LossConfig& cfg, const MlpModel* projection_head) {
    return assemble(model, features, labels, layout, cfg,
                    cfg.objective == Objective::Cnc ? projection_head : nullptr);
}

}  // namespace cnc
