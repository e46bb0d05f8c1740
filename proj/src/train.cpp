#include "cnc/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cnc/errors.hpp"
#include "cnc/mi.hpp"
#include "cnc/serialize.hpp"

namespace cnc {

namespace {

constexpr char kCkptMagic[8] = {'C', 'N', 'C', 'C', 'K', 'P', 'T', '1'};

ModelConfig head_config(std::size_t d) {
    // SimCLR-style two-layer head: d -> d (relu) -> d (linear).
    ModelConfig cfg;
    cfg.in_dim = d;
    cfg.hidden_dims = {d};
    cfg.num_classes = d;
    return cfg;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    const std::uint64_t epochs = completed_epochs;
    out.write(reinterpret_cast<const char*>(&epochs), 8);
    out.write(reinterpret_cast<const char*>(sampler_state.data()), 32);
    write_model(out, model);
    write_grad_store(out, velocity);
    const std::uint64_t has_head = head.has_value() ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&has_head), 8);
    if (head) {
        write_model(out, *head);
        write_grad_store(out, head_velocity);
    }
    const std::uint64_t be = best_epoch;
    out.write(reinterpret_cast<const char*>(&be), 8);
    out.write(reinterpret_cast<const char*>(&best_val_wga), 8);
    write_model(out, best_model);
    const std::uint64_t hist = history.size();
    out.write(reinterpret_cast<const char*>(&hist), 8);
    for (const auto& h : history) {
        const std::uint64_t e = h.epoch;
        out.write(reinterpret_cast<const char*>(&e), 8);
        write_report(out, h.val);
    }
    if (!out) throw FormatError("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    Checkpoint ck;
    std::uint64_t u = 0;
    in.read(reinterpret_cast<char*>(&u), 8);
    ck.completed_epochs = u;
    in.read(reinterpret_cast<char*>(ck.sampler_state.data()), 32);
    ck.model = read_model(in);
    ck.velocity = read_grad_store(in);
    in.read(reinterpret_cast<char*>(&u), 8);
    if (u != 0) {
        ck.head = read_model(in);
        ck.head_velocity = read_grad_store(in);
    }
    in.read(reinterpret_cast<char*>(&u), 8);
    ck.best_epoch = u;
    in.read(reinterpret_cast<char*>(&ck.best_val_wga), 8);
    ck.best_model = read_model(in);
    in.read(reinterpret_cast<char*>(&u), 8);
    for (std::uint64_t i = 0; i < u; ++i) {
        EvalPoint ep;
        std::uint64_t e = 0;
        in.read(reinterpret_cast<char*>(&e), 8);
        ep.epoch = e;
        ep.val = read_report(in);
        ck.history.push_back(std::move(ep));
    }
    if (!in) throw FormatError("checkpoint: truncated " + path);
    return ck;
}

CncResult train_cnc(const LabeledDataset& ds, const GroupInference& inference,
                    const ModelConfig& model_cfg, const CncConfig& cfg, std::uint64_t seed,
                    const Checkpoint* resume, const std::string& checkpoint_path) {
    if (inference.yhat.empty()) throw TrainingError("train_cnc: empty inference");
    cfg.loss.validate();

    // Pools over the inference rows; positions map back to dataset rows.
    std::vector<int> labels(inference.sample_index.size());
    for (std::size_t k = 0; k < labels.size(); ++k)
        labels[k] = ds.labels[static_cast<std::size_t>(inference.sample_index[k])];
    IndexPools pools = index_pools(labels, inference.yhat, ds.num_classes);

    Rng root(seed);
    Rng init_rng = root.fork("stage2-init");
    Rng head_rng = root.fork("stage2-head-init");
    Rng sampler_rng = root.fork("stage2-sampler");

    MlpModel model;
    std::optional<MlpModel> head;
    SgdState state;
    SgdState head_state;
    std::size_t start_epoch = 0;
    std::size_t best_epoch = 0;
    double best_val = -1.0;
    MlpModel best_model;
    std::vector<EvalPoint> history;

    if (resume) {
        model = resume->model;
        state.velocity = resume->velocity;
        head = resume->head;
        if (head) head_state.velocity = resume->head_velocity;
        sampler_rng.set_state(resume->sampler_state);
        start_epoch = resume->completed_epochs;
        best_epoch = resume->best_epoch;
        best_val = resume->best_val_wga;
        best_model = resume->best_model;
        history = resume->history;
    } else {
        model = init_model(model_cfg, init_rng);
        state = SgdState::zeros_like(model);
        if (cfg.loss.projection_head) {
            head = init_model(head_config(model.rep_dim()), head_rng);
            head_state = SgdState::zeros_like(*head);
        }
        best_model = model;
    }

    GradientStore accum = GradientStore::zeros_like(model);
    GradientStore head_accum = head ? GradientStore::zeros_like(*head) : GradientStore{};

    for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        EpochSchedule schedule(pools, cfg.num_positives, cfg.num_negatives, cfg.mode, sampler_rng);
        std::size_t pending = 0;
        std::size_t step_index = 0;

        auto flush = [&]() {
            sgd_step(model, accum, cfg.sgd, state);
            accum.zero();
            if (head) {
                sgd_step(*head, head_accum, cfg.sgd, head_state);
                head_accum.zero();
            }
            pending = 0;
        };

        while (!schedule.done()) {
            ContrastiveBatch batch = schedule.next();
            std::vector<int> members;
            members.reserve(batch.size());
            for (const auto* part : {&batch.anchors, &batch.positives, &batch.negatives, &batch.negatives2})
                for (int pos : *part) members.push_back(inference.sample_index[static_cast<std::size_t>(pos)]);
            Matrix features = ds.features.gather_rows(members);
            std::vector<int> member_labels(members.size());
            for (std::size_t i = 0; i < members.size(); ++i)
                member_labels[i] = ds.labels[static_cast<std::size_t>(members[i])];
            BatchLayout layout{batch.anchors.size(), batch.positives.size(), batch.negatives.size(),
                               batch.negatives2.size()};

            JointLoss jl = batch_loss(model, features, member_labels, layout, cfg.loss,
                                      head ? &*head : nullptr);
            if (!std::isfinite(jl.total))
                throw TrainingError("train_cnc: non-finite loss at epoch " + std::to_string(epoch) +
                                    " step " + std::to_string(step_index));
            accum.add(jl.grads);
            if (head && cfg.loss.objective == Objective::Cnc) head_accum.add(jl.head_grads);
            ++pending;
            ++step_index;
            if (cfg.grad_accum_steps > 0 && pending == cfg.grad_accum_steps) flush();
        }
        if (pending > 0) flush();

        const std::size_t epoch_1 = epoch + 1;
        if (epoch_1 % cfg.eval_every == 0 || epoch_1 == cfg.epochs) {
            MetricsReport val = group_accuracy(model, ds, Split::Val);
            history.push_back({epoch_1, val});
            if (val.worst_group_acc > best_val) {  // ties keep the earliest epoch
                best_val = val.worst_group_acc;
                best_epoch = epoch_1;
                best_model = model;
            }
        }

        if (!checkpoint_path.empty()) {
            Checkpoint ck;
            ck.completed_epochs = epoch_1;
            ck.sampler_state = sampler_rng.state();
            ck.model = model;
            ck.velocity = state.velocity;
            ck.head = head;
            if (head) ck.head_velocity = head_state.velocity;
            ck.best_epoch = best_epoch;
            ck.best_val_wga = best_val;
            ck.best_model = best_model;
            ck.history = history;
            ck.save(checkpoint_path);
        }
    }

    CncResult out;
    out.best_model = best_val >= 0.0 ? best_model : model;
    out.best_epoch = best_epoch;
    out.best_val_wga = best_val;
    out.history = std::move(history);
    out.projection_head = head;
    return out;
}

MetricsReport evaluate(const MlpModel& model, const LabeledDataset& ds, Split split, bool with_bound,
                       bool with_mi, double bound_delta, double bound_cap) {
    MetricsReport rep = group_accuracy(model, ds, split);
    for (std::size_t y = 0; y < ds.num_classes; ++y) {
        std::size_t populated = 0;
        for (const auto& g : rep.per_group)
            if (g.y == static_cast<int>(y)) ++populated;
        if (populated >= 2)
            rep.per_class_align[static_cast<int>(y)] =
                class_alignment(model, ds, split, static_cast<int>(y));
    }
    if (with_mi) {
        const std::vector<int> idx = ds.indices_of(split);
        Matrix feats = ds.features.gather_rows(idx);
        Matrix reps = forward(model, feats).representations;
        std::vector<int> ys(idx.size()), as(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            ys[i] = ds.labels[static_cast<std::size_t>(idx[i])];
            as[i] = ds.attrs[static_cast<std::size_t>(idx[i])];
        }
        rep.mi_y = mutual_information(reps, ys);
        rep.mi_a = mutual_information(reps, as);
        rep.has_mi = true;
    }
    if (with_bound) rep.bound = check_bound(model, ds, split, bound_delta, bound_cap);
    return rep;
}

}  // namespace cnc
