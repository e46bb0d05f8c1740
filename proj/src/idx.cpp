#include "cnc/idx.hpp"

#include <zlib.h>

#include <fstream>

#include "cnc/errors.hpp"

namespace cnc {

std::size_t IdxTensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

namespace {

std::uint32_t read_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) throw FormatError("idx: file shorter than magic");
    IdxTensor t;
    t.magic = read_be32(bytes.data());
    std::size_t ndims;
    if (t.magic == 0x00000803u)
        ndims = 3;
    else if (t.magic == 0x00000801u)
        ndims = 1;
    else
        throw FormatError("idx: unsupported magic " + std::to_string(t.magic));
    const std::size_t header = 4 + 4 * ndims;
    if (bytes.size() < header) throw FormatError("idx: truncated dimension header");
    for (std::size_t i = 0; i < ndims; ++i) t.dims.push_back(read_be32(bytes.data() + 4 + 4 * i));
    const std::size_t expected = t.element_count();
    if (bytes.size() != header + expected)
        throw FormatError("idx: payload length " + std::to_string(bytes.size() - header) +
                          " does not match dims product " + std::to_string(expected));
    t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return t;
}

std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 * tensor.dims.size() + tensor.payload.size());
    write_be32(out, tensor.magic);
    for (auto d : tensor.dims) write_be32(out, d);
    out.insert(out.end(), tensor.payload.begin(), tensor.payload.end());
    return out;
}

std::vector<std::uint8_t> read_file_maybe_gzip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < 2 || raw[0] != 0x1f || raw[1] != 0x8b) return raw;

    // gzip member: inflate with 16+MAX_WBITS to let zlib handle the wrapper.
    std::vector<std::uint8_t> out;
    out.resize(raw.size() * 4 + 1024);
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FormatError("gzip: inflateInit failed");
    zs.next_in = raw.data();
    zs.avail_in = static_cast<uInt>(raw.size());
    std::size_t written = 0;
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        if (written == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + written;
        zs.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw FormatError("gzip: corrupt stream in " + path);
        }
        written = out.size() - zs.avail_out;
    }
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

}  // namespace cnc
