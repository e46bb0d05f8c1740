#include "cnc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cnc/errors.hpp"

namespace cnc {

double MetricsReport::mean_class_error_gap() const {
    std::map<int, std::pair<double, double>> per_class;  // y -> (worst acc, weighted sum / n)
    std::map<int, std::int64_t> class_n;
    for (const auto& g : per_group) {
        auto it = per_class.find(g.y);
        if (it == per_class.end()) {
            per_class[g.y] = {g.accuracy, g.accuracy * static_cast<double>(g.count)};
        } else {
            it->second.first = std::min(it->second.first, g.accuracy);
            it->second.second += g.accuracy * static_cast<double>(g.count);
        }
        class_n[g.y] += g.count;
    }
    if (per_class.empty()) return 0.0;
    double total = 0.0;
    for (const auto& [y, wa] : per_class) {
        const double avg_acc_y = wa.second / static_cast<double>(class_n[y]);
        total += (1.0 - wa.first) - (1.0 - avg_acc_y);  // worst error minus avg error
    }
    return total / static_cast<double>(per_class.size());
}

std::vector<double> per_sample_ce(const Matrix& logits, std::span<const int> labels) {
    std::vector<double> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        double mx = row[0];
        for (double v : row)
            if (v > mx) mx = v;
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        out[i] = mx + std::log(z) - row[static_cast<std::size_t>(labels[i])];
    }
    return out;
}

MetricsReport group_accuracy(const MlpModel& model, const LabeledDataset& ds, Split split) {
    const std::vector<int> idx = ds.indices_of(split);
    if (idx.empty()) throw InputError("group_accuracy: empty split");
    Matrix feats = ds.features.gather_rows(idx);
    Forward fwd = forward(model, feats);
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = ds.labels[static_cast<std::size_t>(idx[i])];
    const std::vector<double> losses = per_sample_ce(fwd.logits, labels);

    const std::size_t num_groups = ds.num_groups();
    std::vector<std::int64_t> count(num_groups, 0), hits(num_groups, 0);
    std::vector<double> loss_sum(num_groups, 0.0);
    std::int64_t total_hits = 0;
    double total_loss = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto row = fwd.logits.row(i);
        std::size_t arg = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[arg]) arg = c;
        const auto g = static_cast<std::size_t>(ds.group_id(static_cast<std::size_t>(idx[i])));
        ++count[g];
        loss_sum[g] += losses[i];
        total_loss += losses[i];
        if (static_cast<int>(arg) == labels[i]) {
            ++hits[g];
            ++total_hits;
        }
    }

    MetricsReport rep;
    rep.split = split;
    rep.avg_acc = static_cast<double>(total_hits) / static_cast<double>(idx.size());
    rep.avg_loss = total_loss / static_cast<double>(idx.size());
    rep.worst_group_acc = 1.0;
    rep.worst_group_loss = 0.0;
    for (std::size_t g = 0; g < num_groups; ++g) {
        if (count[g] == 0) {
            rep.has_empty_groups = true;
            continue;
        }
        GroupMetrics gm;
        gm.group = static_cast<int>(g);
        gm.y = static_cast<int>(g / ds.num_attrs);
        gm.a = static_cast<int>(g % ds.num_attrs);
        gm.count = count[g];
        gm.accuracy = static_cast<double>(hits[g]) / static_cast<double>(count[g]);
        gm.mean_loss = loss_sum[g] / static_cast<double>(count[g]);
        rep.worst_group_acc = std::min(rep.worst_group_acc, gm.accuracy);
        rep.worst_group_loss = std::max(rep.worst_group_loss, gm.mean_loss);
        rep.per_group.push_back(gm);
    }
    return rep;
}

double alignment_loss_reps(const Matrix& reps, std::span<const int> rows_g,
                           std::span<const int> rows_gp) {
    if (rows_g.empty() || rows_gp.empty()) throw InputError("alignment_loss: empty group");
    double total = 0.0;
    for (int i : rows_g) {
        const auto ri = reps.row(static_cast<std::size_t>(i));
        for (int j : rows_gp) {
            const auto rj = reps.row(static_cast<std::size_t>(j));
            double d2 = 0.0;
            for (std::size_t c = 0; c < reps.cols(); ++c) {
                const double d = ri[c] - rj[c];
                d2 += d * d;
            }
            total += std::sqrt(d2);
        }
    }
    return total / (static_cast<double>(rows_g.size()) * static_cast<double>(rows_gp.size()));
}

namespace {

// Representations of one split plus row lookup per group.
struct SplitReps {
    Matrix reps;
    std::vector<std::vector<int>> group_rows;  // rows into reps, per group id
};

SplitReps split_representations(const MlpModel& model, const LabeledDataset& ds, Split split,
                                bool normalized) {
    const std::vector<int> idx = ds.indices_of(split);
    if (idx.empty()) throw InputError("alignment: empty split");
    SplitReps out;
    Matrix feats = ds.features.gather_rows(idx);
    out.reps = forward(model, feats).representations;
    if (normalized) out.reps = l2_normalize_rows(out.reps).values;
    out.group_rows.assign(ds.num_groups(), {});
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.group_rows[static_cast<std::size_t>(ds.group_id(static_cast<std::size_t>(idx[i])))].push_back(
            static_cast<int>(i));
    return out;
}

double class_alignment_from(const SplitReps& sr, const LabeledDataset& ds, int y) {
    std::vector<int> populated;
    for (std::size_t a = 0; a < ds.num_attrs; ++a) {
        const int g = y * static_cast<int>(ds.num_attrs) + static_cast<int>(a);
        if (!sr.group_rows[static_cast<std::size_t>(g)].empty()) populated.push_back(g);
    }
    if (populated.size() < 2)
        throw InputError("class_alignment: class " + std::to_string(y) + " has fewer than 2 groups");
    double worst = 0.0;
    for (std::size_t i = 0; i < populated.size(); ++i)
        for (std::size_t j = i + 1; j < populated.size(); ++j)
            worst = std::max(worst, alignment_loss_reps(sr.reps,
                                                        sr.group_rows[static_cast<std::size_t>(populated[i])],
                                                        sr.group_rows[static_cast<std::size_t>(populated[j])]));
    return worst;
}

}  // namespace

double alignment_loss(const MlpModel& model, const LabeledDataset& ds, Split split, int group_g,
                      int group_gp, bool normalized) {
    const int a = static_cast<int>(ds.num_attrs);
    if (group_g / a != group_gp / a) throw InputError("alignment_loss: groups must share a class");
    if (group_g == group_gp) throw InputError("alignment_loss: groups must differ in attribute");
    SplitReps sr = split_representations(model, ds, split, normalized);
    return alignment_loss_reps(sr.reps, sr.group_rows[static_cast<std::size_t>(group_g)],
                               sr.group_rows[static_cast<std::size_t>(group_gp)]);
}

double class_alignment(const MlpModel& model, const LabeledDataset& ds, Split split, int y,
                       bool normalized) {
    SplitReps sr = split_representations(model, ds, split, normalized);
    return class_alignment_from(sr, ds, y);
}

BoundReport check_bound(const MlpModel& model, const LabeledDataset& ds, Split split, double delta,
                        double loss_cap) {
    if (delta <= 0.0 || delta >= 1.0) throw InputError("check_bound: delta must be in (0,1)");
    if (loss_cap <= 0.0) throw InputError("check_bound: loss_cap must be positive");

    const std::vector<int> idx = ds.indices_of(split);
    if (idx.empty()) throw InputError("check_bound: empty split");
    Matrix feats = ds.features.gather_rows(idx);
    Forward fwd = forward(model, feats);
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = ds.labels[static_cast<std::size_t>(idx[i])];
    std::vector<double> losses = per_sample_ce(fwd.logits, labels);
    for (double& l : losses) l = std::min(l, loss_cap);  // boundedness hypothesis, checker only

    SplitReps sr;
    sr.reps = fwd.representations;
    sr.group_rows.assign(ds.num_groups(), {});
    for (std::size_t i = 0; i < idx.size(); ++i)
        sr.group_rows[static_cast<std::size_t>(ds.group_id(static_cast<std::size_t>(idx[i])))].push_back(
            static_cast<int>(i));

    BoundReport rep;
    rep.b_spectral = spectral_norm(model.cls_weight);
    rep.c1 = std::sqrt(2.0);  // ||softmax - onehot||_2 <= sqrt(2)
    rep.c2 = loss_cap;
    rep.delta = delta;

    const auto num_attrs = static_cast<int>(ds.num_attrs);
    double global_worst = 0.0;
    double global_max_align = 0.0;
    double global_max_conc = 0.0;
    rep.all_classes_hold = true;

    std::vector<double> class_loss_sum(ds.num_classes, 0.0);
    std::vector<std::int64_t> class_n(ds.num_classes, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        class_loss_sum[static_cast<std::size_t>(labels[i])] += losses[i];
        ++class_n[static_cast<std::size_t>(labels[i])];
    }

    for (std::size_t y = 0; y < ds.num_classes; ++y) {
        ClassBound cb;
        cb.y = static_cast<int>(y);
        double worst = 0.0;
        std::int64_t min_ng = 0;
        for (int a = 0; a < num_attrs; ++a) {
            const auto g = y * ds.num_attrs + static_cast<std::size_t>(a);
            const auto& rows = sr.group_rows[g];
            if (rows.empty()) {
                rep.has_empty_groups = true;
                continue;
            }
            double mean = 0.0;
            for (int r : rows) mean += losses[static_cast<std::size_t>(r)];
            mean /= static_cast<double>(rows.size());
            worst = std::max(worst, mean);
            ++cb.groups_present;
            if (min_ng == 0 || static_cast<std::int64_t>(rows.size()) < min_ng)
                min_ng = static_cast<std::int64_t>(rows.size());
        }
        if (cb.groups_present == 0) continue;
        const double avg = class_loss_sum[y] / static_cast<double>(class_n[y]);
        cb.lhs_gap = worst - avg;
        cb.align = cb.groups_present >= 2 ? class_alignment_from(sr, ds, static_cast<int>(y)) : 0.0;
        const double log_term = std::log(static_cast<double>(ds.num_attrs) / delta);
        cb.concentration = loss_cap * std::sqrt(8.0 * log_term / static_cast<double>(min_ng));
        cb.rhs = rep.b_spectral * rep.c1 * cb.align + cb.concentration;
        cb.holds = cb.lhs_gap <= cb.rhs;
        rep.all_classes_hold = rep.all_classes_hold && cb.holds;
        rep.per_class.push_back(cb);
        global_worst = std::max(global_worst, worst);
        global_max_align = std::max(global_max_align, cb.align);
    }

    // Cross-class extension with empirical class priors.
    double total_loss = 0.0;
    for (double l : losses) total_loss += l;
    rep.global_worst_loss = global_worst;
    rep.global_avg_loss = total_loss / static_cast<double>(idx.size());
    rep.min_class_prior = 1.0;
    for (std::size_t y = 0; y < ds.num_classes; ++y)
        if (class_n[y] > 0)
            rep.min_class_prior = std::min(
                rep.min_class_prior, static_cast<double>(class_n[y]) / static_cast<double>(idx.size()));
    std::int64_t global_min_ng = 0;
    for (const auto& rows : sr.group_rows)
        if (!rows.empty() && (global_min_ng == 0 || static_cast<std::int64_t>(rows.size()) < global_min_ng))
            global_min_ng = static_cast<std::int64_t>(rows.size());
    const double global_log = std::log(static_cast<double>(ds.num_groups()) / delta);
    global_max_conc = loss_cap * std::sqrt(8.0 * global_log / static_cast<double>(global_min_ng));
    rep.global_rhs = rep.global_avg_loss / rep.min_class_prior +
                     rep.b_spectral * rep.c1 * global_max_align + global_max_conc;
    rep.global_holds = rep.global_worst_loss <= rep.global_rhs;
    return rep;
}

}  // namespace cnc
