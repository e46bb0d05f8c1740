#include "cnc/serialize.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cnc/errors.hpp"

namespace cnc {

namespace {

constexpr char kModelMagic[8] = {'C', 'N', 'C', 'M', 'D', 'L', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw FormatError("model stream: truncated");
    return v;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    put_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

std::vector<double> get_doubles(std::istream& in) {
    std::vector<double> v(get_u64(in));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
    if (!in) throw FormatError("model stream: truncated");
    return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
    put_u64(out, m.rows());
    put_u64(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.size() * 8));
}

Matrix get_matrix(std::istream& in) {
    const auto rows = get_u64(in), cols = get_u64(in);
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data().data()), static_cast<std::streamsize>(m.size() * 8));
    if (!in) throw FormatError("model stream: truncated");
    return m;
}

}  // namespace

void write_model(std::ostream& out, const MlpModel& model) {
    out.write(kModelMagic, sizeof(kModelMagic));
    put_u64(out, model.encoder.size());
    for (const auto& l : model.encoder) {
        put_u64(out, static_cast<std::uint64_t>(l.act));
        put_matrix(out, l.weight);
        put_doubles(out, l.bias);
    }
    put_matrix(out, model.cls_weight);
    put_doubles(out, model.cls_bias);
}

MlpModel read_model(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw FormatError("model stream: bad magic");
    MlpModel model;
    const auto layers = get_u64(in);
    for (std::uint64_t i = 0; i < layers; ++i) {
        Layer l;
        l.act = static_cast<Activation>(get_u64(in));
        l.weight = get_matrix(in);
        l.bias = get_doubles(in);
        model.encoder.push_back(std::move(l));
    }
    model.cls_weight = get_matrix(in);
    model.cls_bias = get_doubles(in);
    model.check_shapes();
    return model;
}

void write_grad_store(std::ostream& out, const GradientStore& g) {
    put_u64(out, g.enc_weight.size());
    for (std::size_t i = 0; i < g.enc_weight.size(); ++i) {
        put_matrix(out, g.enc_weight[i]);
        put_doubles(out, g.enc_bias[i]);
    }
    put_matrix(out, g.cls_weight);
    put_doubles(out, g.cls_bias);
}

GradientStore read_grad_store(std::istream& in) {
    GradientStore g;
    const auto layers = get_u64(in);
    for (std::uint64_t i = 0; i < layers; ++i) {
        g.enc_weight.push_back(get_matrix(in));
        g.enc_bias.push_back(get_doubles(in));
    }
    g.cls_weight = get_matrix(in);
    g.cls_bias = get_doubles(in);
    return g;
}

void write_report(std::ostream& out, const MetricsReport& r) {
    put_u64(out, static_cast<std::uint64_t>(r.split));
    put_u64(out, r.has_empty_groups ? 1 : 0);
    std::vector<double> scalars{r.avg_acc, r.worst_group_acc, r.avg_loss, r.worst_group_loss,
                                r.mi_y,    r.mi_a,            r.has_mi ? 1.0 : 0.0};
    put_doubles(out, scalars);
    put_u64(out, r.per_group.size());
    for (const auto& g : r.per_group) {
        put_u64(out, static_cast<std::uint64_t>(g.group));
        put_u64(out, static_cast<std::uint64_t>(g.y));
        put_u64(out, static_cast<std::uint64_t>(g.a));
        put_u64(out, static_cast<std::uint64_t>(g.count));
        put_doubles(out, {g.accuracy, g.mean_loss});
    }
    put_u64(out, r.per_class_align.size());
    for (const auto& [y, v] : r.per_class_align) {
        put_u64(out, static_cast<std::uint64_t>(y));
        put_doubles(out, {v});
    }
}

MetricsReport read_report(std::istream& in) {
    MetricsReport r;
    r.split = static_cast<Split>(get_u64(in));
    r.has_empty_groups = get_u64(in) != 0;
    const auto scalars = get_doubles(in);
    if (scalars.size() != 7) throw FormatError("report stream: bad scalar block");
    r.avg_acc = scalars[0];
    r.worst_group_acc = scalars[1];
    r.avg_loss = scalars[2];
    r.worst_group_loss = scalars[3];
    r.mi_y = scalars[4];
    r.mi_a = scalars[5];
    r.has_mi = scalars[6] != 0.0;
    const auto groups = get_u64(in);
    for (std::uint64_t i = 0; i < groups; ++i) {
        GroupMetrics g;
        g.group = static_cast<int>(get_u64(in));
        g.y = static_cast<int>(get_u64(in));
        g.a = static_cast<int>(get_u64(in));
        g.count = static_cast<std::int64_t>(get_u64(in));
        const auto vals = get_doubles(in);
        if (vals.size() != 2) throw FormatError("report stream: bad group block");
        g.accuracy = vals[0];
        g.mean_loss = vals[1];
        r.per_group.push_back(g);
    }
    const auto aligns = get_u64(in);
    for (std::uint64_t i = 0; i < aligns; ++i) {
        const int y = static_cast<int>(get_u64(in));
        r.per_class_align[y] = get_doubles(in)[0];
    }
    return r;
}

void save_model_file(const MlpModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    write_model(out, model);
}

MlpModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return read_model(in);
}

}  // namespace cnc
