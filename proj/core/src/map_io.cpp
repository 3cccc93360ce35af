#include "eslkit/map_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>

namespace esl {
namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::int64_t kMaxDim = 1 << 20;          // per-axis cap
constexpr std::int64_t kMaxElements = 1LL << 31;   // total payload cap

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) {
        throw MapIoError(IoErrorKind::OpenFailed,
                         "cannot open '" + path.string() + "'");
    }
    return f;
}

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_all(std::FILE* f, const void* data, std::size_t n,
               const std::filesystem::path& path) {
    if (n != 0 && std::fwrite(data, 1, n, f) != n) {
        throw MapIoError(IoErrorKind::WriteFailed,
                         "short write to '" + path.string() + "'");
    }
}

// Header reader shared by all formats: magic, version, `dims` uint32 fields.
std::vector<std::int64_t> read_header(std::FILE* f, const char magic[4], int dims,
                                      const std::filesystem::path& path) {
    unsigned char buf[4];
    if (std::fread(buf, 1, 4, f) != 4) {
        throw MapIoError(IoErrorKind::Truncated,
                         "file shorter than header in '" + path.string() + "'");
    }
    if (std::memcmp(buf, magic, 4) != 0) {
        throw MapIoError(IoErrorKind::BadMagic,
                         "bad magic in '" + path.string() + "' (expected " +
                             std::string(magic, 4) + ")");
    }
    if (std::fread(buf, 1, 4, f) != 4) {
        throw MapIoError(IoErrorKind::Truncated,
                         "file shorter than header in '" + path.string() + "'");
    }
    if (get_u32(buf) != kVersion) {
        throw MapIoError(IoErrorKind::BadVersion,
                         "unsupported version " + std::to_string(get_u32(buf)) +
                             " in '" + path.string() + "'");
    }
    std::vector<std::int64_t> out(dims);
    for (int i = 0; i < dims; ++i) {
        if (std::fread(buf, 1, 4, f) != 4) {
            throw MapIoError(IoErrorKind::Truncated,
                             "file shorter than header in '" + path.string() + "'");
        }
        out[i] = get_u32(buf);
    }
    return out;
}

std::int64_t checked_elements(const std::vector<std::int64_t>& dims,
                              const std::filesystem::path& path) {
    std::int64_t n = 1;
    for (std::int64_t d : dims) {
        if (d < 1 || d > kMaxDim) {
            throw MapIoError(IoErrorKind::DimensionOverflow,
                             "dimension " + std::to_string(d) + " out of range in '" +
                                 path.string() + "'");
        }
        n *= d;  // kMaxDim^3 < 2^63, no wraparound possible
        if (n > kMaxElements) {
            throw MapIoError(IoErrorKind::DimensionOverflow,
                             "declared payload too large in '" + path.string() + "'");
        }
    }
    return n;
}

std::vector<float> read_floats(std::FILE* f, std::int64_t n,
                               const std::filesystem::path& path) {
    std::vector<float> out(n);
    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * 4);
    if (std::fread(raw.data(), 1, raw.size(), f) != raw.size()) {
        throw MapIoError(IoErrorKind::Truncated,
                         "payload shorter than header declares in '" + path.string() + "'");
    }
    for (std::int64_t i = 0; i < n; ++i) {
        out[i] = std::bit_cast<float>(get_u32(raw.data() + i * 4));
    }
    if (std::fgetc(f) != EOF) {
        throw MapIoError(IoErrorKind::TrailingBytes,
                         "unexpected bytes after payload in '" + path.string() + "'");
    }
    return out;
}

void write_floats(std::FILE* f, const std::vector<float>& values,
                  const std::filesystem::path& path) {
    std::string raw;
    raw.reserve(values.size() * 4);
    for (float v : values) put_u32(raw, std::bit_cast<std::uint32_t>(v));
    write_all(f, raw.data(), raw.size(), path);
}

void write_header(std::FILE* f, const char magic[4],
                  std::initializer_list<std::uint32_t> dims,
                  const std::filesystem::path& path) {
    std::string hdr(magic, 4);
    put_u32(hdr, kVersion);
    for (std::uint32_t d : dims) put_u32(hdr, d);
    write_all(f, hdr.data(), hdr.size(), path);
}

}  // namespace

ProbMap read_probmap(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    auto dims = read_header(f.get(), "SEGP", 3, path);
    const std::int64_t n = checked_elements(dims, path);
    if (dims[2] < 2 || dims[2] > kMaxClasses) {
        throw MapIoError(IoErrorKind::DimensionOverflow,
                         "num_classes " + std::to_string(dims[2]) +
                             " out of range in '" + path.string() + "'");
    }
    ProbMap map;
    map.height = static_cast<std::int32_t>(dims[0]);
    map.width = static_cast<std::int32_t>(dims[1]);
    map.num_classes = static_cast<std::int32_t>(dims[2]);
    map.values = read_floats(f.get(), n, path);
    return map;
}

void write_probmap(const ProbMap& map, const std::filesystem::path& path) {
    if (static_cast<std::int64_t>(map.values.size()) !=
        map.pixel_count() * map.num_classes) {
        throw MapIoError(IoErrorKind::DimensionOverflow,
                         "value count does not match H*W*C");
    }
    FilePtr f = open_file(path, "wb");
    write_header(f.get(), "SEGP",
                 {static_cast<std::uint32_t>(map.height),
                  static_cast<std::uint32_t>(map.width),
                  static_cast<std::uint32_t>(map.num_classes)},
                 path);
    write_floats(f.get(), map.values, path);
}

namespace {

// SEGL body shared by LabelMap and PseudoLabelMap.
template <typename MapT>
MapT read_byte_map(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    auto dims = read_header(f.get(), "SEGL", 3, path);
    checked_elements({dims[0], dims[1]}, path);
    if (dims[2] < 1 || dims[2] > kMaxClasses) {
        throw MapIoError(IoErrorKind::DimensionOverflow,
                         "num_classes " + std::to_string(dims[2]) +
                             " out of range in '" + path.string() + "'");
    }
    MapT map;
    map.height = static_cast<std::int32_t>(dims[0]);
    map.width = static_cast<std::int32_t>(dims[1]);
    map.num_classes = static_cast<std::int32_t>(dims[2]);
    map.labels.resize(map.pixel_count());
    if (std::fread(map.labels.data(), 1, map.labels.size(), f.get()) !=
        map.labels.size()) {
        throw MapIoError(IoErrorKind::Truncated,
                         "payload shorter than header declares in '" + path.string() + "'");
    }
    if (std::fgetc(f.get()) != EOF) {
        throw MapIoError(IoErrorKind::TrailingBytes,
                         "unexpected bytes after payload in '" + path.string() + "'");
    }
    for (std::uint8_t v : map.labels) {
        if (v != kUnlabeled && v >= map.num_classes) {
            throw MapIoError(IoErrorKind::RangeError,
                             "class id " + std::to_string(v) + " >= num_classes in '" +
                                 path.string() + "'");
        }
    }
    return map;
}

template <typename MapT>
void write_byte_map(const MapT& map, const std::filesystem::path& path) {
    if (static_cast<std::int64_t>(map.labels.size()) != map.pixel_count()) {
        throw MapIoError(IoErrorKind::DimensionOverflow,
                         "label count does not match H*W");
    }
    if (map.num_classes > kMaxClasses) {
        throw MapIoError(IoErrorKind::DimensionOverflow, "num_classes > 255");
    }
    FilePtr f = open_file(path, "wb");
    write_header(f.get(), "SEGL",
                 {static_cast<std::uint32_t>(map.height),
                  static_cast<std::uint32_t>(map.width),
                  static_cast<std::uint32_t>(map.num_classes)},
                 path);
    write_all(f.get(), map.labels.data(), map.labels.size(), path);
}

}  // namespace

LabelMap read_labelmap(const std::filesystem::path& path) {
    return read_byte_map<LabelMap>(path);
}

void write_labelmap(const LabelMap& map, const std::filesystem::path& path) {
    write_byte_map(map, path);
}

PseudoLabelMap read_pseudolabels(const std::filesystem::path& path) {
    return read_byte_map<PseudoLabelMap>(path);
}

void write_pseudolabels(const PseudoLabelMap& map, const std::filesystem::path& path) {
    write_byte_map(map, path);
}

EntropyMap read_entropymap(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    auto dims = read_header(f.get(), "SEGE", 2, path);
    const std::int64_t n = checked_elements(dims, path);
    EntropyMap map;
    map.height = static_cast<std::int32_t>(dims[0]);
    map.width = static_cast<std::int32_t>(dims[1]);
    map.values = read_floats(f.get(), n, path);
    return map;
}

void write_entropymap(const EntropyMap& map, const std::filesystem::path& path) {
    if (static_cast<std::int64_t>(map.values.size()) != map.pixel_count()) {
        throw MapIoError(IoErrorKind::DimensionOverflow,
                         "value count does not match H*W");
    }
    FilePtr f = open_file(path, "wb");
    write_header(f.get(), "SEGE",
                 {static_cast<std::uint32_t>(map.height),
                  static_cast<std::uint32_t>(map.width)},
                 path);
    write_floats(f.get(), map.values, path);
}

FeatureMap read_featuremap(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    auto dims = read_header(f.get(), "SEGF", 3, path);
    const std::int64_t n = checked_elements(dims, path);
    FeatureMap map;
    map.height = static_cast<std::int32_t>(dims[0]);
    map.width = static_cast<std::int32_t>(dims[1]);
    map.feature_dim = static_cast<std::int32_t>(dims[2]);
    map.values = read_floats(f.get(), n, path);
    return map;
}

void write_featuremap(const FeatureMap& map, const std::filesystem::path& path) {
    if (static_cast<std::int64_t>(map.values.size()) !=
        map.pixel_count() * map.feature_dim) {
        throw MapIoError(IoErrorKind::DimensionOverflow,
                         "value count does not match H*W*D");
    }
    FilePtr f = open_file(path, "wb");
    write_header(f.get(), "SEGF",
                 {static_cast<std::uint32_t>(map.height),
                  static_cast<std::uint32_t>(map.width),
                  static_cast<std::uint32_t>(map.feature_dim)},
                 path);
    write_floats(f.get(), map.values, path);
}

}  // namespace esl
