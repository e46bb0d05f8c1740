#include "cnc/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cnc/datagen.hpp"
#include "cnc/errors.hpp"
#include "cnc/kmeans.hpp"

namespace cnc {

void GroupInference::write_csv(const std::string& path, const LabeledDataset& ds) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out << "sample_index,y,a_if_known,yhat,method\n";
    for (std::size_t k = 0; k < yhat.size(); ++k) {
        const auto i = static_cast<std::size_t>(sample_index[k]);
        out << sample_index[k] << ',' << ds.labels[i] << ',' << ds.attrs[i] << ',' << yhat[k] << ','
            << method << '\n';
    }
}

GroupInference GroupInference::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    GroupInference inf;
    std::string line;
    if (!std::getline(in, line)) throw FormatError("inference csv: empty file " + path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5) throw FormatError("inference csv: bad row '" + line + "'");
        inf.sample_index.push_back(std::stoi(fields[0]));
        inf.yhat.push_back(std::stoi(fields[3]));
        inf.method = fields[4];
    }
    return inf;
}

void refresh_accuracy(GroupInference& inf, const LabeledDataset& ds) {
    std::size_t agree_y = 0, agree_a = 0;
    const bool a_proxy = ds.num_attrs == ds.num_classes;
    for (std::size_t k = 0; k < inf.yhat.size(); ++k) {
        const auto i = static_cast<std::size_t>(inf.sample_index[k]);
        if (inf.yhat[k] == ds.labels[i]) ++agree_y;
        if (a_proxy && inf.yhat[k] == class_for_attr(ds, ds.attrs[i])) ++agree_a;
    }
    const double n = static_cast<double>(inf.yhat.size());
    inf.accuracy_vs_y = n > 0 ? static_cast<double>(agree_y) / n : 0.0;
    inf.accuracy_vs_a_proxy =
        a_proxy && n > 0 ? static_cast<double>(agree_a) / n : std::numeric_limits<double>::quiet_NaN();
}

ErmResult train_erm(const LabeledDataset& ds, const ModelConfig& model_cfg, const TrainRecipe& recipe,
                    std::uint64_t seed) {
    return train_erm_over_indices(ds, ds.indices_of(Split::Train), model_cfg, recipe, seed);
}

ErmResult train_erm_over_indices(const LabeledDataset& ds, std::vector<int> indices,
                                 const ModelConfig& model_cfg, const TrainRecipe& recipe,
                                 std::uint64_t seed) {
    if (indices.empty()) throw TrainingError("train_erm: empty index set");

    Rng root(seed);
    Rng init_rng = root.fork("init");
    Rng batch_rng = root.fork("batches");

    ErmResult out;
    out.model = init_model(model_cfg, init_rng);
    SgdState state = SgdState::zeros_like(out.model);

    std::vector<int>& order = indices;
    for (std::size_t epoch = 0; epoch < recipe.epochs; ++epoch) {
        batch_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += recipe.batch_size) {
            const std::size_t stop = std::min(order.size(), start + recipe.batch_size);
            std::span<const int> idx(order.data() + start, stop - start);
            Matrix batch = ds.features.gather_rows(idx);
            std::vector<int> labels(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k)
                labels[k] = ds.labels[static_cast<std::size_t>(idx[k])];

            ForwardCache cache = forward_cached(out.model, batch);
            CrossEntropy ce = cross_entropy(cache.logits, labels);
            if (!std::isfinite(ce.loss))
                throw TrainingError("train_erm: loss diverged at epoch " + std::to_string(epoch));
            GradientStore grads = backward(out.model, cache, Matrix(), ce.dlogits);
            sgd_step(out.model, grads, recipe.sgd, state);
            epoch_loss += ce.loss;
            ++batches;
        }
        out.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
        if (recipe.on_epoch) recipe.on_epoch(epoch + 1, out.model);
    }
    return out;
}

GroupInference predict_argmax(const MlpModel& model, const LabeledDataset& ds, Split split) {
    GroupInference inf;
    inf.method = "argmax";
    inf.sample_index = ds.indices_of(split);
    Matrix feats = ds.features.gather_rows(inf.sample_index);
    Forward fwd = forward(model, feats);
    inf.yhat.resize(inf.sample_index.size());
    for (std::size_t i = 0; i < fwd.logits.rows(); ++i) {
        const auto row = fwd.logits.row(i);
        std::size_t arg = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[arg]) arg = c;  // ties resolve to the lowest class id
        inf.yhat[i] = static_cast<int>(arg);
    }
    refresh_accuracy(inf, ds);
    return inf;
}

GroupInference predict_cluster(const MlpModel& model, const LabeledDataset& ds, Split split,
                               std::size_t restarts, std::uint64_t seed, bool pca2) {
    const std::size_t c = ds.num_classes;
    if (c < 2) throw InputError("predict_cluster: needs C >= 2");
    if (c > 8) throw InputError("predict_cluster: permutation matching unsupported for C > 8");

    GroupInference inf;
    inf.method = pca2 ? "cluster(pca2)" : "cluster";
    inf.sample_index = ds.indices_of(split);
    Matrix feats = ds.features.gather_rows(inf.sample_index);
    Matrix reps = forward(model, feats).representations;
    if (pca2) reps = pca_project(reps, 2);

    Rng rng(seed);
    KmeansResult km = kmeans(reps, c, restarts, rng);

    // cluster x class contingency, then exhaustive assignment search.
    std::vector<std::size_t> table(c * c, 0);
    for (std::size_t i = 0; i < inf.sample_index.size(); ++i) {
        const auto y = static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(inf.sample_index[i])]);
        table[static_cast<std::size_t>(km.assignment[i]) * c + y]++;
    }
    std::vector<int> perm(c);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best_perm = perm;
    std::size_t best_hits = 0;
    do {
        std::size_t hits = 0;
        for (std::size_t cl = 0; cl < c; ++cl) hits += table[cl * c + static_cast<std::size_t>(perm[cl])];
        if (hits > best_hits) {
            best_hits = hits;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    inf.yhat.resize(inf.sample_index.size());
    for (std::size_t i = 0; i < inf.yhat.size(); ++i)
        inf.yhat[i] = best_perm[static_cast<std::size_t>(km.assignment[i])];
    refresh_accuracy(inf, ds);
    return inf;
}

GroupInference oracle_inference(const LabeledDataset& ds, Split split) {
    GroupInference inf;
    inf.method = "oracle";
    inf.sample_index = ds.indices_of(split);
    inf.yhat.resize(inf.sample_index.size());
    for (std::size_t i = 0; i < inf.yhat.size(); ++i)
        inf.yhat[i] = class_for_attr(ds, ds.attrs[static_cast<std::size_t>(inf.sample_index[i])]);
    refresh_accuracy(inf, ds);
    return inf;
}

GroupInference inject_noise(const GroupInference& inference, double p, std::size_t num_classes,
                            std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw InputError("inject_noise: p must be in [0,1]");
    GroupInference out = inference;
    char tag[64];
    std::snprintf(tag, sizeof(tag), "%s_noised(p=%g)", inference.method.c_str(), p);
    out.method = tag;
    Rng rng(seed);
    for (int& y : out.yhat)
        if (rng.uniform() < p) y = static_cast<int>(rng.uniform_index(num_classes));
    return out;
}

}  // namespace cnc
