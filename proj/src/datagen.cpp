#include "cnc/datagen.hpp"

#include <cmath>

#include "cnc/errors.hpp"
#include "cnc/rng.hpp"

namespace cnc {

std::array<Rgb, 5> CmnistSpec::default_palette() {
    auto hex = [](int r, int g, int b) {
        return Rgb{r / 255.0, g / 255.0, b / 255.0};
    };
    return {hex(0xff, 0x00, 0x00), hex(0x85, 0xff, 0x00), hex(0x00, 0xff, 0xf3),
            hex(0x6e, 0x00, 0xff), hex(0xff, 0x00, 0x18)};
}

void CmnistSpec::validate() const {
    if (p_corr < 0.0 || p_corr > 1.0) throw InputError("cmnist: p_corr must be in [0,1]");
    for (std::size_t i = 0; i < palette.size(); ++i)
        for (std::size_t j = i + 1; j < palette.size(); ++j)
            if (palette[i].r == palette[j].r && palette[i].g == palette[j].g &&
                palette[i].b == palette[j].b)
                throw InputError("cmnist: palette entries must be distinct");
}

void BlobSpec::validate() const {
    if (num_classes == 0 || num_attrs == 0 || d_core == 0 || d_spur == 0)
        throw InputError("blobs: counts must be positive");
    if (n_train == 0 || n_val == 0 || n_test == 0) throw InputError("blobs: split sizes must be positive");
    if (p_corr < 0.0 || p_corr > 1.0) throw InputError("blobs: p_corr must be in [0,1]");
    if (separation < 0.0 || spur_separation < 0.0) throw InputError("blobs: separations must be >= 0");
}

namespace {

constexpr std::size_t kNumCmnistClasses = 5;

// Attribute assignment shared by both generators: associated attribute with
// probability p_corr on train, uniform otherwise and on val/test.
int draw_attr(Split split, int y, double p_corr, std::size_t num_attrs, Rng& rng) {
    const int assoc = y % static_cast<int>(num_attrs);
    if (split == Split::Train && rng.uniform() < p_corr) return assoc;
    return static_cast<int>(rng.uniform_index(num_attrs));
}

}  // namespace

LabeledDataset build_cmnist(const IdxTensor& train_images, const IdxTensor& train_labels,
                            const IdxTensor& test_images, const IdxTensor& test_labels,
                            const CmnistSpec& spec) {
    spec.validate();
    if (train_images.magic != 0x00000803u || test_images.magic != 0x00000803u)
        throw InputError("cmnist: image tensors must have magic 0x00000803");
    if (train_labels.magic != 0x00000801u || test_labels.magic != 0x00000801u)
        throw InputError("cmnist: label tensors must have magic 0x00000801");
    if (train_images.dims[0] != train_labels.dims[0] || test_images.dims[0] != test_labels.dims[0])
        throw InputError("cmnist: image/label counts disagree");
    const std::size_t rows = train_images.dims[1], cols = train_images.dims[2];
    if (test_images.dims[1] != rows || test_images.dims[2] != cols)
        throw InputError("cmnist: train/test image shapes disagree");

    Rng rng(spec.seed);
    Rng split_rng = rng.fork("split");
    Rng color_rng = rng.fork("color");

    // Stratified 80/20 of the MNIST train set into train/val.
    const std::size_t n_mnist_train = train_labels.dims[0];
    std::vector<std::vector<int>> by_class(kNumCmnistClasses);
    for (std::size_t i = 0; i < n_mnist_train; ++i) {
        const int digit = train_labels.payload[i];
        if (digit < 0 || digit > 9) throw DataError("cmnist: digit out of range");
        by_class[static_cast<std::size_t>(digit / 2)].push_back(static_cast<int>(i));
    }
    for (std::size_t c = 0; c < kNumCmnistClasses; ++c)
        if (by_class[c].empty())
            throw DataError("cmnist: no train digits for class " + std::to_string(c));

    std::vector<std::pair<int, Split>> order;  // (mnist train index, split)
    order.reserve(n_mnist_train);
    for (auto& idxs : by_class) {
        split_rng.shuffle(idxs);
        const std::size_t n_tr = idxs.size() * 4 / 5;
        for (std::size_t k = 0; k < idxs.size(); ++k)
            order.emplace_back(idxs[k], k < n_tr ? Split::Train : Split::Val);
    }

    const std::size_t n_test = test_labels.dims[0];
    const std::size_t n_total = n_mnist_train + n_test;
    const std::size_t pix = rows * cols;

    LabeledDataset ds;
    ds.kind = "cmnist";
    ds.num_classes = kNumCmnistClasses;
    ds.num_attrs = spec.palette.size();
    ds.features = Matrix(n_total, pix * 3);
    ds.labels.resize(n_total);
    ds.attrs.resize(n_total);
    ds.split.resize(n_total);

    auto emit = [&](std::size_t out_row, const IdxTensor& images, const IdxTensor& labels,
                    std::size_t src_row, Split sp) {
        const int digit = labels.payload[src_row];
        if (digit < 0 || digit > 9) throw DataError("cmnist: digit out of range");
        const int y = digit / 2;
        const int a = draw_attr(sp, y, spec.p_corr, ds.num_attrs, color_rng);
        const Rgb& color = spec.palette[static_cast<std::size_t>(a)];
        auto feat = ds.features.row(out_row);
        const std::uint8_t* src = images.payload.data() + src_row * pix;
        for (std::size_t p = 0; p < pix; ++p) {
            const double g = src[p] / 255.0;
            feat[3 * p + 0] = g * color.r;
            feat[3 * p + 1] = g * color.g;
            feat[3 * p + 2] = g * color.b;
        }
        ds.labels[out_row] = y;
        ds.attrs[out_row] = a;
        ds.split[out_row] = sp;
    };

    std::size_t row = 0;
    for (const auto& [src, sp] : order) emit(row++, train_images, train_labels, static_cast<std::size_t>(src), sp);
    bool test_class_seen[kNumCmnistClasses] = {};
    for (std::size_t i = 0; i < n_test; ++i) {
        test_class_seen[static_cast<std::size_t>(test_labels.payload[i] / 2)] = true;
        emit(row++, test_images, test_labels, i, Split::Test);
    }
    for (std::size_t c = 0; c < kNumCmnistClasses; ++c)
        if (!test_class_seen[c]) throw DataError("cmnist: no test digits for class " + std::to_string(c));

    ds.check_consistent();
    return ds;
}

LabeledDataset build_blobs(const BlobSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Rng mean_rng = rng.fork("means");
    Rng sample_rng = rng.fork("samples");

    auto sphere_point = [&](std::size_t dim, double radius) {
        std::vector<double> v(dim);
        double norm = 0.0;
        do {
            for (double& x : v) x = mean_rng.normal();
            norm = l2_norm(v);
        } while (norm < 1e-12);
        for (double& x : v) x *= radius / norm;
        return v;
    };

    std::vector<std::vector<double>> core_means, spur_means;
    for (std::size_t y = 0; y < spec.num_classes; ++y)
        core_means.push_back(sphere_point(spec.d_core, spec.separation));
    for (std::size_t a = 0; a < spec.num_attrs; ++a)
        spur_means.push_back(sphere_point(spec.d_spur, spec.spur_separation));

    const std::size_t n_total = spec.n_train + spec.n_val + spec.n_test;
    const std::size_t d = spec.d_core + spec.d_spur;
    LabeledDataset ds;
    ds.kind = "blobs";
    ds.num_classes = spec.num_classes;
    ds.num_attrs = spec.num_attrs;
    ds.features = Matrix(n_total, d);
    ds.labels.resize(n_total);
    ds.attrs.resize(n_total);
    ds.split.resize(n_total);

    std::size_t row = 0;
    auto emit_split = [&](Split sp, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i, ++row) {
            const int y = static_cast<int>(sample_rng.uniform_index(spec.num_classes));
            const int a = draw_attr(sp, y, spec.p_corr, spec.num_attrs, sample_rng);
            auto feat = ds.features.row(row);
            for (std::size_t k = 0; k < spec.d_core; ++k)
                feat[k] = core_means[static_cast<std::size_t>(y)][k] + sample_rng.normal();
            for (std::size_t k = 0; k < spec.d_spur; ++k)
                feat[spec.d_core + k] = spur_means[static_cast<std::size_t>(a)][k] + sample_rng.normal();
            ds.labels[row] = y;
            ds.attrs[row] = a;
            ds.split[row] = sp;
        }
    };
    emit_split(Split::Train, spec.n_train);
    emit_split(Split::Val, spec.n_val);
    emit_split(Split::Test, spec.n_test);

    ds.check_consistent();
    return ds;
}

int class_for_attr(const LabeledDataset& ds, int attr) {
    if (ds.num_attrs != ds.num_classes)
        throw DataError("oracle inference needs num_attrs == num_classes");
    return attr;
}

std::vector<int> missing_train_groups(const LabeledDataset& ds) {
    const auto counts = group_counts(ds, Split::Train);
    std::vector<int> missing;
    for (std::size_t g = 0; g < counts.size(); ++g)
        if (counts[g] == 0) missing.push_back(static_cast<int>(g));
    return missing;
}

}  // namespace cnc
