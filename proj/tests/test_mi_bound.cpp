#include <cmath>

#include "cnc/errors.hpp"
#include "cnc/metrics.hpp"
#include "cnc/mi.hpp"
#include "cnc/mlp.hpp"
#include "cnc/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cnc;

TEST_CASE("mutual_information: one-hot representations recover ln C within 1%") {
    const std::size_t c = 5, n = 500;
    Matrix z(n, c);
    std::vector<int> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = static_cast<int>(i % c);
        z(i, static_cast<std::size_t>(t[i])) = 1.0;
    }
    const double mi = mutual_information(z, t);
    CHECK(std::fabs(mi - std::log(5.0)) < 0.01 * std::log(5.0));
}

TEST_CASE("mutual_information: independent representations score near zero") {
    Rng rng(51);
    const std::size_t n = 2000, d = 8;
    Matrix z(n, d);
    for (double& v : z.data()) v = rng.normal();
    std::vector<int> t(n);
    for (auto& v : t) v = static_cast<int>(rng.uniform_index(5));
    CHECK(mutual_information(z, t) < 0.05);
}

TEST_CASE("mutual_information: KL bounds hold") {
    Rng rng(52);
    const std::size_t n = 400, d = 4;
    Matrix z(n, d);
    for (double& v : z.data()) v = rng.normal();
    std::vector<int> t(n);
    std::vector<std::size_t> counts(3, 0);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = static_cast<int>(rng.uniform_index(3));
        ++counts[static_cast<std::size_t>(t[i])];
        z(i, 0) += t[i];  // some signal
    }
    const double mi = mutual_information(z, t);
    double min_p = 1.0;
    for (auto ct : counts) min_p = std::min(min_p, static_cast<double>(ct) / static_cast<double>(n));
    CHECK(mi >= 0.0);
    CHECK(mi <= std::log(1.0 / min_p));
}

TEST_CASE("mutual_information: invariant under sample permutation") {
    Rng rng(53);
    const std::size_t n = 300, d = 5;
    Matrix z(n, d);
    for (double& v : z.data()) v = rng.normal();
    std::vector<int> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = static_cast<int>(rng.uniform_index(3));
        z(i, 1) += 0.8 * t[i];
    }
    const double base = mutual_information(z, t);

    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(n - 1 - i);
    Matrix zp = z.gather_rows(order);
    std::vector<int> tp(n);
    for (std::size_t i = 0; i < n; ++i) tp[i] = t[static_cast<std::size_t>(order[i])];
    CHECK(mutual_information(zp, tp) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("mutual_information: needs two target values") {
    Matrix z(10, 2);
    std::vector<int> t(10, 0);
    CHECK_THROWS_AS(mutual_information(z, t), InputError);
}

namespace {

// Two groups of one class, two samples each, plus a second class so the
// classifier has something to separate. Representations and weights are small
// integers so every bound term is hand-computable.
struct Fixture {
    LabeledDataset ds;
    MlpModel model;
};

Fixture bound_fixture() {
    Fixture f;
    f.ds.kind = "manual";
    f.ds.num_classes = 2;
    f.ds.num_attrs = 2;
    // Features ARE the representations (identity encoder).
    // class 0 attr 0: (0,0), (0,1); class 0 attr 1: (3,4), (3,3);
    // class 1 attr 0: (-2,0), (-2,1); group (1,1) left empty.
    f.ds.features = Matrix(6, 2);
    f.ds.features(1, 1) = 1.0;
    f.ds.features(2, 0) = 3.0;
    f.ds.features(2, 1) = 4.0;
    f.ds.features(3, 0) = 3.0;
    f.ds.features(3, 1) = 3.0;
    f.ds.features(4, 0) = -2.0;
    f.ds.features(5, 0) = -2.0;
    f.ds.features(5, 1) = 1.0;
    f.ds.labels = {0, 0, 0, 0, 1, 1};
    f.ds.attrs = {0, 0, 1, 1, 0, 0};
    f.ds.split.assign(6, Split::Test);

    Layer l;
    l.weight = Matrix::identity(2);
    l.bias.assign(2, 0.0);
    l.act = Activation::Identity;
    f.model.encoder.push_back(l);
    f.model.cls_weight = Matrix(2, 2);
    f.model.cls_weight(0, 0) = 1.0;
    f.model.cls_weight(0, 1) = 0.5;
    f.model.cls_weight(1, 0) = -1.0;
    f.model.cls_weight(1, 1) = 0.25;
    f.model.cls_bias.assign(2, 0.0);
    return f;
}

double clipped_ce(const MlpModel& m, const Matrix& x, int label, double cap) {
    Forward f = forward(m, x);
    std::vector<int> l{label};
    return std::min(per_sample_ce(f.logits, l)[0], cap);
}

}  // namespace

TEST_CASE("check_bound: every term matches the hand computation on the fixture") {
    Fixture f = bound_fixture();
    const double delta = 0.05, cap = 5.0;
    BoundReport rep = check_bound(f.model, f.ds, Split::Test, delta, cap);

    CHECK(rep.c1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(rep.c2 == cap);
    CHECK(rep.b_spectral == doctest::Approx(oracle::jacobi_spectral_norm(f.model.cls_weight)).epsilon(1e-8));

    // class 0: groups (0,0) and (0,1), two samples each
    std::vector<double> losses;
    for (std::size_t i = 0; i < 4; ++i) {
        Matrix row(1, 2);
        row(0, 0) = f.ds.features(i, 0);
        row(0, 1) = f.ds.features(i, 1);
        losses.push_back(clipped_ce(f.model, row, 0, cap));
    }
    const double g00 = 0.5 * (losses[0] + losses[1]);
    const double g01 = 0.5 * (losses[2] + losses[3]);
    const double lhs = std::max(g00, g01) - 0.25 * (losses[0] + losses[1] + losses[2] + losses[3]);

    // alignment between the 2x2 groups: mean pairwise euclidean distance
    auto dist = [&](std::size_t i, std::size_t j) {
        const double dx = f.ds.features(i, 0) - f.ds.features(j, 0);
        const double dy = f.ds.features(i, 1) - f.ds.features(j, 1);
        return std::sqrt(dx * dx + dy * dy);
    };
    const double align = (dist(0, 2) + dist(0, 3) + dist(1, 2) + dist(1, 3)) / 4.0;
    const double conc = cap * std::sqrt(8.0 * std::log(2.0 / delta) / 2.0);  // |G_y|=2, n_g=2
    const double rhs = rep.b_spectral * std::sqrt(2.0) * align + conc;

    REQUIRE(rep.per_class.size() == 2);
    const ClassBound& c0 = rep.per_class[0];
    CHECK(c0.y == 0);
    CHECK(c0.lhs_gap == doctest::Approx(lhs).epsilon(1e-12));
    CHECK(c0.align == doctest::Approx(align).epsilon(1e-12));
    CHECK(c0.concentration == doctest::Approx(conc).epsilon(1e-12));
    CHECK(c0.rhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(c0.holds == (lhs <= rhs));

    // class 1 has a single populated group: gap 0, alignment 0
    const ClassBound& c1 = rep.per_class[1];
    CHECK(c1.groups_present == 1);
    CHECK(c1.lhs_gap == doctest::Approx(0.0));
    CHECK(c1.align == 0.0);
    CHECK(c1.holds);
    CHECK(rep.has_empty_groups);  // (1,1) unpopulated

    // cross-class inequality: worst group loss vs prior-scaled average
    double all_mean = 0.0;
    std::vector<double> l1;
    for (std::size_t i = 4; i < 6; ++i) {
        Matrix row(1, 2);
        row(0, 0) = f.ds.features(i, 0);
        row(0, 1) = f.ds.features(i, 1);
        l1.push_back(clipped_ce(f.model, row, 1, cap));
    }
    for (double v : losses) all_mean += v;
    for (double v : l1) all_mean += v;
    all_mean /= 6.0;
    const double worst_group = std::max({g00, g01, 0.5 * (l1[0] + l1[1])});
    CHECK(rep.global_worst_loss == doctest::Approx(worst_group).epsilon(1e-12));
    CHECK(rep.global_avg_loss == doctest::Approx(all_mean).epsilon(1e-12));
    CHECK(rep.min_class_prior == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    const double global_conc = cap * std::sqrt(8.0 * std::log(4.0 / delta) / 2.0);  // |G|=4, min n_g=2
    const double global_rhs = all_mean * 3.0 + rep.b_spectral * std::sqrt(2.0) * align + global_conc;
    CHECK(rep.global_rhs == doctest::Approx(global_rhs).epsilon(1e-12));
    CHECK(rep.global_holds == (worst_group <= global_rhs));
}

TEST_CASE("check_bound: identical per-group losses give a zero gap that always holds") {
    Fixture f = bound_fixture();
    // collapse all representations: every loss identical, alignment zero
    f.ds.features = Matrix(6, 2, 0.5);
    BoundReport rep = check_bound(f.model, f.ds, Split::Test);
    for (const auto& cb : rep.per_class) {
        CHECK(cb.lhs_gap == doctest::Approx(0.0));
        CHECK(cb.align == doctest::Approx(0.0));
        CHECK(cb.holds);
    }
    CHECK(rep.all_classes_hold);
}

TEST_CASE("check_bound: clipping keeps per-sample losses within C2") {
    Fixture f = bound_fixture();
    scale_inplace(f.model.cls_weight, 50.0);  // saturate some losses far beyond the cap
    BoundReport rep = check_bound(f.model, f.ds, Split::Test, 0.05, 5.0);
    for (const auto& cb : rep.per_class) {
        CHECK(cb.lhs_gap <= 5.0 + 1e-12);
    }
    CHECK(rep.global_worst_loss <= 5.0 + 1e-12);
}

TEST_CASE("check_bound: rejects bad delta") {
    Fixture f = bound_fixture();
    CHECK_THROWS_AS(check_bound(f.model, f.ds, Split::Test, 0.0, 5.0), InputError);
    CHECK_THROWS_AS(check_bound(f.model, f.ds, Split::Test, 1.0, 5.0), InputError);
}
