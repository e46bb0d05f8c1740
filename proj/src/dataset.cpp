#include "cnc/dataset.hpp"

#include <cstring>
#include <fstream>

#include "cnc/errors.hpp"

namespace cnc {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw InputError("unknown split '" + name + "'");
}

std::vector<int> LabeledDataset::indices_of(Split s) const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) idx.push_back(static_cast<int>(i));
    return idx;
}

void LabeledDataset::check_consistent() const {
    const std::size_t n = labels.size();
    if (features.rows() != n || attrs.size() != n || split.size() != n)
        throw DataError("dataset: per-sample arrays disagree on n");
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
            throw DataError("dataset: label out of range at " + std::to_string(i));
        if (attrs[i] < 0 || static_cast<std::size_t>(attrs[i]) >= num_attrs)
            throw DataError("dataset: attribute out of range at " + std::to_string(i));
    }
    if (!features.all_finite()) throw DataError("dataset: non-finite feature");
}

std::vector<std::int64_t> group_counts(const LabeledDataset& ds, Split split) {
    std::vector<std::int64_t> counts(ds.num_groups(), 0);
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.split[i] == split) ++counts[static_cast<std::size_t>(ds.group_id(i))];
    return counts;
}

// ---------------------------------------------------------------------------
// Binary cache. Layout (little-endian):
//   magic "CNCDATA1" | u32 provenance_len | provenance bytes (JSON)
//   | u64 n | u64 D | u32 C | u32 A | u32 kind_len | kind bytes
//   | features (n*D f64) | labels (n i32) | attrs (n i32) | split (n u8)
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'N', 'C', 'D', 'A', 'T', 'A', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("dataset cache: truncated");
    return v;
}

}  // namespace

void save_dataset(const LabeledDataset& ds, const std::string& path, const std::string& provenance_json) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(provenance_json.size()));
    out.write(provenance_json.data(), static_cast<std::streamsize>(provenance_json.size()));
    put<std::uint64_t>(out, ds.size());
    put<std::uint64_t>(out, ds.features.cols());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_classes));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_attrs));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.kind.size()));
    out.write(ds.kind.data(), static_cast<std::streamsize>(ds.kind.size()));
    out.write(reinterpret_cast<const char*>(ds.features.data().data()),
              static_cast<std::streamsize>(ds.features.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(ds.labels.data()),
              static_cast<std::streamsize>(ds.labels.size() * sizeof(int)));
    out.write(reinterpret_cast<const char*>(ds.attrs.data()),
              static_cast<std::streamsize>(ds.attrs.size() * sizeof(int)));
    out.write(reinterpret_cast<const char*>(ds.split.data()),
              static_cast<std::streamsize>(ds.split.size() * sizeof(Split)));
    if (!out) throw FormatError("dataset cache: write failed for " + path);
}

LabeledDataset load_dataset(const std::string& path, std::string* provenance_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("dataset cache: bad magic in " + path);
    const auto prov_len = get<std::uint32_t>(in);
    std::string prov(prov_len, '\0');
    in.read(prov.data(), prov_len);
    if (provenance_json) *provenance_json = prov;
    const auto n = get<std::uint64_t>(in);
    const auto d = get<std::uint64_t>(in);
    LabeledDataset ds;
    ds.num_classes = get<std::uint32_t>(in);
    ds.num_attrs = get<std::uint32_t>(in);
    const auto kind_len = get<std::uint32_t>(in);
    ds.kind.resize(kind_len);
    in.read(ds.kind.data(), kind_len);
    ds.features = Matrix(n, d);
    in.read(reinterpret_cast<char*>(ds.features.data().data()),
            static_cast<std::streamsize>(n * d * sizeof(double)));
    ds.labels.resize(n);
    in.read(reinterpret_cast<char*>(ds.labels.data()), static_cast<std::streamsize>(n * sizeof(int)));
    ds.attrs.resize(n);
    in.read(reinterpret_cast<char*>(ds.attrs.data()), static_cast<std::streamsize>(n * sizeof(int)));
    ds.split.resize(n);
    in.read(reinterpret_cast<char*>(ds.split.data()), static_cast<std::streamsize>(n * sizeof(Split)));
    if (!in) throw FormatError("dataset cache: truncated " + path);
    ds.check_consistent();
    return ds;
}

}  // namespace cnc
