#include "cnc/baselines.hpp"

#include <cmath>
#include <iostream>

#include "cnc/datagen.hpp"
#include "cnc/errors.hpp"
#include "cnc/metrics.hpp"

namespace cnc {

JttResult train_jtt(const LabeledDataset& ds, const GroupInference& inference, const JttPolicy& policy,
                    const ModelConfig& model_cfg, const TrainRecipe& recipe, std::uint64_t seed) {
    if (inference.yhat.empty()) throw TrainingError("train_jtt: empty inference");

    std::vector<int> correct, incorrect;
    for (std::size_t k = 0; k < inference.yhat.size(); ++k) {
        const int row = inference.sample_index[k];
        if (inference.yhat[k] == ds.labels[static_cast<std::size_t>(row)])
            correct.push_back(row);
        else
            incorrect.push_back(row);
    }

    JttResult out;
    if (incorrect.empty()) {
        std::cerr << "[jtt] inference has no misclassified points; training reduces to ERM\n";
        out.degenerated_to_erm = true;
        out.upsample_factor = 1;
    } else if (policy.auto_balance) {
        out.upsample_factor = std::max<std::size_t>(1, correct.size() / incorrect.size());
    } else {
        if (policy.factor == 0) throw InputError("train_jtt: factor must be >= 1");
        out.upsample_factor = policy.factor;
    }

    // Multiset in inference order so that factor 1 matches plain ERM exactly.
    std::vector<int> multiset;
    multiset.reserve(correct.size() + incorrect.size() * out.upsample_factor);
    for (std::size_t k = 0; k < inference.yhat.size(); ++k) {
        const int row = inference.sample_index[k];
        const bool wrong = inference.yhat[k] != ds.labels[static_cast<std::size_t>(row)];
        const std::size_t copies = wrong ? out.upsample_factor : 1;
        for (std::size_t c = 0; c < copies; ++c) multiset.push_back(row);
    }

    ErmResult erm = train_erm_over_indices(ds, std::move(multiset), model_cfg, recipe, seed);
    out.model = std::move(erm.model);
    out.epoch_losses = std::move(erm.epoch_losses);
    return out;
}

void gdro_reweight(std::vector<double>& q, const std::vector<double>& batch_mean_loss,
                   const std::vector<std::size_t>& batch_count, const std::vector<double>& adjustment,
                   double eta_q) {
    double total = 0.0;
    for (std::size_t g = 0; g < q.size(); ++g) {
        if (batch_count[g] > 0) q[g] *= std::exp(eta_q * (batch_mean_loss[g] + adjustment[g]));
        total += q[g];
    }
    for (double& v : q) v /= total;
}

GdroResult train_gdro(const LabeledDataset& ds, const ModelConfig& model_cfg, const TrainRecipe& recipe,
                      const GdroConfig& gdro, std::uint64_t seed) {
    const std::vector<int> train_idx = ds.indices_of(Split::Train);
    if (train_idx.empty()) throw TrainingError("train_gdro: empty train split");
    if (gdro.eta_q < 0.0 || gdro.c_adj < 0.0) throw InputError("train_gdro: eta_q/c_adj must be >= 0");

    const auto counts = group_counts(ds, Split::Train);
    const std::size_t num_groups = counts.size();
    std::vector<std::size_t> populated;
    for (std::size_t g = 0; g < num_groups; ++g)
        if (counts[g] > 0) populated.push_back(g);

    std::vector<double> q(num_groups, 0.0);
    for (std::size_t g : populated) q[g] = 1.0 / static_cast<double>(populated.size());
    std::vector<double> adjustment(num_groups, 0.0);
    for (std::size_t g : populated)
        adjustment[g] = gdro.c_adj / std::sqrt(static_cast<double>(counts[g]));

    Rng root(seed);
    Rng init_rng = root.fork("init");
    Rng batch_rng = root.fork("batches");

    GdroResult out;
    out.model = init_model(model_cfg, init_rng);
    SgdState state = SgdState::zeros_like(out.model);

    std::vector<int> order = train_idx;
    for (std::size_t epoch = 0; epoch < recipe.epochs; ++epoch) {
        batch_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += recipe.batch_size) {
            const std::size_t stop = std::min(order.size(), start + recipe.batch_size);
            std::span<const int> idx(order.data() + start, stop - start);
            Matrix batch = ds.features.gather_rows(idx);
            std::vector<int> labels(idx.size());
            std::vector<int> groups(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) {
                labels[k] = ds.labels[static_cast<std::size_t>(idx[k])];
                groups[k] = ds.group_id(static_cast<std::size_t>(idx[k]));
            }

            ForwardCache cache = forward_cached(out.model, batch);
            const std::vector<double> losses = per_sample_ce(cache.logits, labels);

            std::vector<double> group_loss(num_groups, 0.0);
            std::vector<std::size_t> group_n(num_groups, 0);
            for (std::size_t k = 0; k < idx.size(); ++k) {
                group_loss[static_cast<std::size_t>(groups[k])] += losses[k];
                ++group_n[static_cast<std::size_t>(groups[k])];
            }
            for (std::size_t g = 0; g < num_groups; ++g)
                if (group_n[g] > 0) group_loss[g] /= static_cast<double>(group_n[g]);
            gdro_reweight(q, group_loss, group_n, adjustment, gdro.eta_q);

            // Weighted loss sum_g q_g * mean-batch-loss_g.
            double weighted = 0.0;
            for (std::size_t g = 0; g < num_groups; ++g)
                if (group_n[g] > 0) weighted += q[g] * group_loss[g];
            if (!std::isfinite(weighted))
                throw TrainingError("train_gdro: loss diverged at epoch " + std::to_string(epoch));

            // d(weighted)/dlogits_k = q_g(k)/n_{g(k),batch} * (softmax_k - onehot_k)
            Matrix dlogits(cache.logits.rows(), cache.logits.cols());
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const auto row = cache.logits.row(k);
                auto d = dlogits.row(k);
                double mx = row[0];
                for (double v : row)
                    if (v > mx) mx = v;
                double z = 0.0;
                for (double v : row) z += std::exp(v - mx);
                const double g_scale = q[static_cast<std::size_t>(groups[k])] /
                                       static_cast<double>(group_n[static_cast<std::size_t>(groups[k])]);
                for (std::size_t c = 0; c < row.size(); ++c)
                    d[c] = g_scale * std::exp(row[c] - mx) / z;
                d[static_cast<std::size_t>(labels[k])] -= g_scale;
            }
            GradientStore grads = backward(out.model, cache, Matrix(), dlogits);
            sgd_step(out.model, grads, recipe.sgd, state);
            epoch_loss += weighted;
            ++batches;
        }
        out.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
        if (recipe.on_epoch) recipe.on_epoch(epoch + 1, out.model);
    }
    out.q = std::move(q);
    return out;
}

CncResult train_cnc_star(const LabeledDataset& ds, const ModelConfig& model_cfg, const CncConfig& cfg,
                         std::uint64_t seed) {
    GroupInference oracle = oracle_inference(ds, Split::Train);
    return train_cnc(ds, oracle, model_cfg, cfg, seed);
}

}  // namespace cnc
