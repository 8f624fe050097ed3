#include "dudospect/archive.hpp"

#include <cstring>
#include <fstream>

#include <zlib.h>

#include "dudospect/errors.hpp"

namespace dudospect {

namespace {

constexpr char kMagic[8] = {'N', 'T', 'A', 'R', 'v', '0', '0', '1'};

template <class T>
void append_le(std::vector<uint8_t>& out, T value) {
    // written byte-by-byte so the format is little-endian on any host
    for (size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<uint8_t>((static_cast<uint64_t>(value) >> (8 * i)) & 0xff));
}

template <class T>
T read_le(const std::vector<uint8_t>& in, size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw IoError("tensor archive truncated");
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(in[pos + i]) << (8 * i);
    pos += sizeof(T);
    return static_cast<T>(v);
}

template <class T>
void append_payload(std::vector<uint8_t>& out, const std::vector<T>& data) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    for (T v : data) {
        if constexpr (sizeof(T) == 4) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            append_le(out, bits);
        } else {
            uint64_t bits;
            std::memcpy(&bits, &v, 8);
            append_le(out, bits);
        }
    }
}

}  // namespace

uint64_t NamedTensor::num_elems() const {
    uint64_t n = 1;
    for (uint64_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

std::vector<double> NamedTensor::as_f64() const {
    if (dtype == DType::f64) return f64;
    return std::vector<double>(f32.begin(), f32.end());
}

void TensorArchive::put_f32(const std::string& name, std::vector<uint64_t> shape,
                            std::vector<float> data) {
    NamedTensor t;
    t.dtype = NamedTensor::DType::f32;
    t.shape = std::move(shape);
    t.f32 = std::move(data);
    if (t.num_elems() != t.f32.size()) throw ShapeError("tensor '" + name + "': shape/data mismatch");
    entries_[name] = std::move(t);
}

void TensorArchive::put_f64(const std::string& name, std::vector<uint64_t> shape,
                            std::vector<double> data) {
    NamedTensor t;
    t.dtype = NamedTensor::DType::f64;
    t.shape = std::move(shape);
    t.f64 = std::move(data);
    if (t.num_elems() != t.f64.size()) throw ShapeError("tensor '" + name + "': shape/data mismatch");
    entries_[name] = std::move(t);
}

const NamedTensor& TensorArchive::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IoError("tensor '" + name + "' not found in archive");
    return it->second;
}

std::vector<std::string> TensorArchive::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
}

std::vector<uint8_t> TensorArchive::serialize() const {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    append_le<uint32_t>(out, static_cast<uint32_t>(entries_.size()));
    for (const auto& [name, t] : entries_) {
        append_le<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(static_cast<uint8_t>(t.dtype));
        out.push_back(static_cast<uint8_t>(t.shape.size()));
        for (uint64_t d : t.shape) append_le<uint64_t>(out, d);
        if (t.dtype == NamedTensor::DType::f32)
            append_payload(out, t.f32);
        else
            append_payload(out, t.f64);
    }
    return out;
}

TensorArchive TensorArchive::deserialize(const std::vector<uint8_t>& bytes) {
    size_t pos = 0;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw IoError("not a tensor archive (bad magic)");
    pos = 8;
    const uint32_t count = read_le<uint32_t>(bytes, pos);
    TensorArchive ar;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_le<uint32_t>(bytes, pos);
        if (pos + name_len > bytes.size()) throw IoError("tensor archive truncated");
        std::string name(bytes.begin() + static_cast<long>(pos),
                         bytes.begin() + static_cast<long>(pos + name_len));
        pos += name_len;
        const auto dtype = static_cast<NamedTensor::DType>(read_le<uint8_t>(bytes, pos));
        const uint8_t ndim = read_le<uint8_t>(bytes, pos);
        std::vector<uint64_t> shape(ndim);
        for (auto& d : shape) d = read_le<uint64_t>(bytes, pos);
        uint64_t n = 1;
        for (uint64_t d : shape) n *= d;
        if (ndim == 0) n = 0;
        if (dtype == NamedTensor::DType::f32) {
            std::vector<float> data(n);
            for (auto& v : data) {
                const uint32_t bits = read_le<uint32_t>(bytes, pos);
                std::memcpy(&v, &bits, 4);
            }
            ar.put_f32(name, std::move(shape), std::move(data));
        } else if (dtype == NamedTensor::DType::f64) {
            std::vector<double> data(n);
            for (auto& v : data) {
                const uint64_t bits = read_le<uint64_t>(bytes, pos);
                std::memcpy(&v, &bits, 8);
            }
            ar.put_f64(name, std::move(shape), std::move(data));
        } else {
            throw IoError("tensor archive: unknown dtype tag");
        }
    }
    return ar;
}

void TensorArchive::save(const std::string& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
    if (!out) throw IoError("failed writing archive '" + path + "'");
}

TensorArchive TensorArchive::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open archive '" + path + "'");
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw IoError("failed reading archive '" + path + "'");
    return deserialize(bytes);
}

std::string bytes_crc32_hex(const uint8_t* data, size_t size) {
    const auto crc = crc32(0L, data, static_cast<uInt>(size));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

std::string file_crc32_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for checksum");
    uLong crc = crc32(0L, Z_NULL, 0);
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(in.gcount()));
        if (in.eof()) break;
    }
    char hex[16];
    std::snprintf(hex, sizeof(hex), "%08lx", static_cast<unsigned long>(crc));
    return hex;
}

}  // namespace dudospect
