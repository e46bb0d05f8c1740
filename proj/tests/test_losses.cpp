#include <cmath>

#include "cnc/errors.hpp"
#include "cnc/losses.hpp"
#include "cnc/metrics.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cnc;

namespace {

Matrix random_unit_rows(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return l2_normalize_rows(m).values;
}

std::vector<double> unit_vec(std::size_t d, Rng& rng) {
    Matrix m = random_unit_rows(1, d, rng);
    return {m.row(0).begin(), m.row(0).end()};
}

// Direct transcription of the per-anchor loss, no log-sum-exp tricks.
double supcon_brute(std::span<const double> z, const Matrix& pos, const Matrix& neg, double tau) {
    double denom = 0.0;
    for (std::size_t i = 0; i < pos.rows(); ++i) denom += std::exp(dot(z, pos.row(i)) / tau);
    for (std::size_t j = 0; j < neg.rows(); ++j) denom += std::exp(dot(z, neg.row(j)) / tau);
    double loss = 0.0;
    for (std::size_t i = 0; i < pos.rows(); ++i)
        loss -= std::log(std::exp(dot(z, pos.row(i)) / tau) / denom);
    return loss / static_cast<double>(pos.rows());
}

MlpModel tiny_net(std::uint64_t seed) {
    Rng rng(seed);
    return init_model({2, {4}, 3}, rng);  // 2-4-3: 27 parameters
}

}  // namespace

TEST_CASE("supcon: symmetric M=1 N=1 gives ln 2, separation drives to zero") {
    Matrix pos(1, 2), neg(1, 2);
    pos(0, 0) = 1.0;
    neg(0, 0) = 1.0;
    std::vector<double> z{1.0, 0.0};
    SupconResult r = supcon_loss(z, pos, neg, 0.5);
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // z.z+ = 1, z.z- = -1, small tau saturates the positive
    neg(0, 0) = -1.0;
    CHECK(supcon_loss(z, pos, neg, 0.01).loss < 1e-12);
}

TEST_CASE("supcon: all-equal similarities give ln(M+N)") {
    for (auto [m, n] : {std::pair<std::size_t, std::size_t>{1, 3}, {3, 3}, {4, 2}}) {
        Matrix pos(m, 2), neg(n, 2);
        for (std::size_t i = 0; i < m; ++i) pos(i, 0) = 1.0;
        for (std::size_t j = 0; j < n; ++j) neg(j, 0) = 1.0;
        std::vector<double> z{1.0, 0.0};
        CHECK(supcon_loss(z, pos, neg, 0.1).loss ==
              doctest::Approx(std::log(static_cast<double>(m + n))).epsilon(1e-12));
    }
}

TEST_CASE("supcon: matches brute-force recomputation and stays nonnegative") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        Matrix pos = random_unit_rows(3, 6, rng);
        Matrix neg = random_unit_rows(4, 6, rng);
        auto z = unit_vec(6, rng);
        SupconResult r = supcon_loss(z, pos, neg, 0.7);
        CHECK(r.loss >= 0.0);
        CHECK(r.loss == doctest::Approx(supcon_brute(z, pos, neg, 0.7)).epsilon(1e-12));
    }
}

TEST_CASE("supcon: invariant under permutations of positives and negatives") {
    Rng rng(6);
    Matrix pos = random_unit_rows(4, 5, rng);
    Matrix neg = random_unit_rows(3, 5, rng);
    auto z = unit_vec(5, rng);
    const double base = supcon_loss(z, pos, neg, 0.2).loss;

    Matrix pos_swapped = pos;
    for (std::size_t c = 0; c < pos.cols(); ++c) {
        std::swap(pos_swapped(0, c), pos_swapped(3, c));
        std::swap(pos_swapped(1, c), pos_swapped(2, c));
    }
    Matrix neg_swapped = neg;
    for (std::size_t c = 0; c < neg.cols(); ++c) std::swap(neg_swapped(0, c), neg_swapped(2, c));
    CHECK(supcon_loss(z, pos_swapped, neg_swapped, 0.2).loss == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("supcon: gradients match finite differences at tau=0.1") {
    Rng rng(7);
    Matrix pos = random_unit_rows(3, 4, rng);
    Matrix neg = random_unit_rows(4, 4, rng);
    auto z = unit_vec(4, rng);
    SupconResult r = supcon_loss(z, pos, neg, 0.1);

    const double h = 1e-6;
    for (std::size_t c = 0; c < z.size(); ++c) {
        auto up = z, down = z;
        up[c] += h;
        down[c] -= h;
        const double fd = (supcon_loss(up, pos, neg, 0.1).loss - supcon_loss(down, pos, neg, 0.1).loss) /
                          (2.0 * h);
        CHECK(r.d_anchor[c] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (std::size_t i = 0; i < pos.size(); ++i) {
        Matrix up = pos, down = pos;
        up.data()[i] += h;
        down.data()[i] -= h;
        const double fd = (supcon_loss(z, up, neg, 0.1).loss - supcon_loss(z, down, neg, 0.1).loss) /
                          (2.0 * h);
        CHECK(r.d_pos.data()[i] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (std::size_t i = 0; i < neg.size(); ++i) {
        Matrix up = neg, down = neg;
        up.data()[i] += h;
        down.data()[i] -= h;
        const double fd = (supcon_loss(z, pos, up, 0.1).loss - supcon_loss(z, pos, down, 0.1).loss) /
                          (2.0 * h);
        CHECK(r.d_neg.data()[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("supcon: rejects non-finite input") {
    Matrix pos(1, 2), neg(1, 2);
    pos(0, 0) = std::nan("");
    std::vector<double> z{1.0, 0.0};
    CHECK_THROWS_AS(supcon_loss(z, pos, neg, 0.1), InputError);
}

TEST_CASE("two_sided: equal similarities, M=N=1 gives 2 ln 2") {
    Matrix a(1, 2), p(1, 2), n1(1, 2), n2(1, 2);
    a(0, 0) = p(0, 0) = n1(0, 0) = n2(0, 0) = 1.0;
    TwoSidedResult r = two_sided_loss(a, p, n1, n2, 0.3);
    CHECK(r.loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("two_sided: decomposes into two supcon calls") {
    Rng rng(8);
    Matrix a = random_unit_rows(3, 5, rng);
    Matrix p = random_unit_rows(3, 5, rng);
    Matrix n1 = random_unit_rows(2, 5, rng);
    Matrix n2 = random_unit_rows(2, 5, rng);
    TwoSidedResult r = two_sided_loss(a, p, n1, n2, 0.4);
    const double left = supcon_loss(a.row(0), p, n1, 0.4).loss;
    const double right = supcon_loss(p.row(0), a, n2, 0.4).loss;
    CHECK(r.loss == doctest::Approx(left + right).epsilon(1e-12));
}

TEST_CASE("two_sided: gradients match finite differences on 8 random vectors") {
    Rng rng(9);
    Matrix a = random_unit_rows(2, 3, rng);
    Matrix p = random_unit_rows(2, 3, rng);
    Matrix n1 = random_unit_rows(2, 3, rng);
    Matrix n2 = random_unit_rows(2, 3, rng);
    TwoSidedResult r = two_sided_loss(a, p, n1, n2, 0.25);

    const double h = 1e-6;
    auto fd_check = [&](Matrix& part, const Matrix& analytic) {
        for (std::size_t i = 0; i < part.size(); ++i) {
            const double saved = part.data()[i];
            part.data()[i] = saved + h;
            const double up = two_sided_loss(a, p, n1, n2, 0.25).loss;
            part.data()[i] = saved - h;
            const double down = two_sided_loss(a, p, n1, n2, 0.25).loss;
            part.data()[i] = saved;
            CHECK(analytic.data()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
        }
    };
    fd_check(a, r.d_anchors);
    fd_check(p, r.d_positives);
    fd_check(n1, r.d_negatives);
    fd_check(n2, r.d_negatives2);
}

TEST_CASE("joint: lambda=0 equals plain cross-entropy") {
    MlpModel model = tiny_net(11);
    Rng rng(12);
    Matrix feats(6, 2);
    for (double& v : feats.data()) v = rng.normal();
    std::vector<int> labels{0, 1, 2, 0, 1, 2};
    BatchLayout layout{2, 2, 1, 1};

    LossConfig cfg;
    cfg.lambda = 0.0;
    JointLoss jl = joint_loss(model, feats, labels, layout, cfg);
    CrossEntropy ce = cross_entropy(forward(model, feats).logits, labels);
    CHECK(jl.total == doctest::Approx(ce.loss).epsilon(1e-12));

    ForwardCache cache = forward_cached(model, feats);
    GradientStore pure = backward(model, cache, Matrix(), ce.dlogits);
    const auto a = oracle::flatten(jl.grads), b = oracle::flatten(pure);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("joint: lambda=1 leaves classifier gradients exactly zero") {
    MlpModel model = tiny_net(13);
    Rng rng(14);
    Matrix feats(6, 2);
    for (double& v : feats.data()) v = rng.normal();
    std::vector<int> labels{0, 1, 2, 0, 1, 2};
    BatchLayout layout{2, 2, 1, 1};
    LossConfig cfg;
    cfg.lambda = 1.0;
    JointLoss jl = joint_loss(model, feats, labels, layout, cfg);
    for (double v : jl.grads.cls_weight.data()) CHECK(v == 0.0);
    for (double v : jl.grads.cls_bias) CHECK(v == 0.0);
    // encoder still receives contrastive gradient
    CHECK(jl.grads.max_abs() > 0.0);
}

TEST_CASE("joint: loss is affine in lambda") {
    MlpModel model = tiny_net(15);
    Rng rng(16);
    Matrix feats(8, 2);
    for (double& v : feats.data()) v = rng.normal();
    std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1};
    BatchLayout layout{2, 2, 2, 2};
    auto at = [&](double lambda) {
        LossConfig cfg;
        cfg.lambda = lambda;
        return joint_loss(model, feats, labels, layout, cfg).total;
    };
    CHECK(at(0.5) == doctest::Approx(0.5 * (at(0.0) + at(1.0))).epsilon(1e-12));
}

TEST_CASE("joint: full-parameter gradient matches finite differences (lambda=0.75)") {
    MlpModel model = tiny_net(17);
    Rng rng(18);
    Matrix feats(8, 2);
    for (double& v : feats.data()) v = rng.normal();
    std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1};
    BatchLayout layout{2, 2, 2, 2};
    LossConfig cfg;  // tau 0.05, lambda 0.75

    JointLoss jl = joint_loss(model, feats, labels, layout, cfg);
    auto loss = [&](const MlpModel& m) { return joint_loss(m, feats, labels, layout, cfg).total; };
    const auto fd = oracle::fd_gradient(model, loss);
    CHECK(oracle::max_rel_error(oracle::flatten(jl.grads), fd, 1e-7) < 1e-4);
}

TEST_CASE("joint: projection-head path gradient matches finite differences") {
    MlpModel model = tiny_net(19);
    Rng head_rng(20);
    MlpModel head = init_model({4, {4}, 4}, head_rng);
    Rng rng(21);
    Matrix feats(8, 2);
    for (double& v : feats.data()) v = rng.normal();
    std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1};
    BatchLayout layout{2, 2, 2, 2};
    LossConfig cfg;
    cfg.projection_head = true;

    JointLoss jl = joint_loss(model, feats, labels, layout, cfg, &head);
    auto model_loss = [&](const MlpModel& m) {
        return joint_loss(m, feats, labels, layout, cfg, &head).total;
    };
    CHECK(oracle::max_rel_error(oracle::flatten(jl.grads), oracle::fd_gradient(model, model_loss), 1e-7) <
          1e-4);
    auto head_loss = [&](const MlpModel& h) {
        return joint_loss(model, feats, labels, layout, cfg, &h).total;
    };
    CHECK(oracle::max_rel_error(oracle::flatten(jl.head_grads), oracle::fd_gradient(head, head_loss),
                                1e-7) < 1e-4);
}

TEST_CASE("direct_align: zero for identical representations, distance for a single pair") {
    // identity encoder, so representations equal features
    MlpModel model;
    Layer l;
    l.weight = Matrix::identity(2);
    l.bias.assign(2, 0.0);
    l.act = Activation::Identity;
    model.encoder.push_back(l);
    Rng rng(22);
    model.cls_weight = Matrix(2, 2);
    for (double& v : model.cls_weight.data()) v = rng.normal();
    model.cls_bias.assign(2, 0.0);

    Matrix feats(2, 2);
    feats(1, 0) = 3.0;  // anchor (0,0), positive (3,0): distance 3
    std::vector<int> labels{0, 0};
    BatchLayout layout{1, 1, 0, 0};
    LossConfig cfg;
    cfg.objective = Objective::DirectAlign;
    JointLoss jl = direct_align_loss(model, feats, labels, layout, cfg);
    CHECK(jl.contrastive == doctest::Approx(3.0).epsilon(1e-12));

    Matrix same(2, 2, 0.5);
    JointLoss zero = direct_align_loss(model, same, labels, layout, cfg);
    CHECK(zero.contrastive == 0.0);
}

TEST_CASE("direct_align: gradient matches finite differences") {
    MlpModel model = tiny_net(23);
    Rng rng(24);
    Matrix feats(6, 2);
    for (double& v : feats.data()) v = rng.normal();
    std::vector<int> labels{0, 1, 2, 0, 1, 2};
    BatchLayout layout{2, 2, 1, 1};
    LossConfig cfg;
    cfg.objective = Objective::DirectAlign;

    JointLoss jl = direct_align_loss(model, feats, labels, layout, cfg);
    auto loss = [&](const MlpModel& m) { return direct_align_loss(m, feats, labels, layout, cfg).total; };
    CHECK(oracle::max_rel_error(oracle::flatten(jl.grads), oracle::fd_gradient(model, loss), 1e-7) < 1e-4);
}

TEST_CASE("direct_align: alignment term equals the metrics-module computation") {
    MlpModel model = tiny_net(25);
    Rng rng(26);
    Matrix feats(7, 2);
    for (double& v : feats.data()) v = rng.normal();
    std::vector<int> labels{0, 0, 0, 0, 0, 1, 1};
    BatchLayout layout{2, 3, 1, 1};
    LossConfig cfg;
    cfg.objective = Objective::DirectAlign;
    JointLoss jl = direct_align_loss(model, feats, labels, layout, cfg);

    Matrix reps = forward(model, feats).representations;
    std::vector<int> anchor_rows{0, 1}, positive_rows{2, 3, 4};
    CHECK(jl.contrastive ==
          doctest::Approx(alignment_loss_reps(reps, anchor_rows, positive_rows)).epsilon(1e-12));
}
