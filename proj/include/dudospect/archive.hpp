#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dudospect {

// Minimal named-tensor container; one file holds several tensors.
//
// Layout (all integers little-endian):
//   magic   "NTARv001" (8 bytes)
//   count   u32
//   entry*  { name_len u32, name bytes, dtype u8 (0=f32, 1=f64),
//             ndim u8, dims u64[ndim] (C-order), raw payload }
//
// Dataset blobs store float32; checkpoints follow the dtype they were
// trained in.
struct NamedTensor {
    enum class DType : uint8_t { f32 = 0, f64 = 1 };
    DType dtype = DType::f32;
    std::vector<uint64_t> shape;  // C-order, last dim fastest
    std::vector<float> f32;
    std::vector<double> f64;

    uint64_t num_elems() const;
    // Reads the payload as double regardless of storage dtype.
    std::vector<double> as_f64() const;
};

class TensorArchive {
public:
    void put_f32(const std::string& name, std::vector<uint64_t> shape, std::vector<float> data);
    void put_f64(const std::string& name, std::vector<uint64_t> shape, std::vector<double> data);

    bool contains(const std::string& name) const { return entries_.count(name) > 0; }
    const NamedTensor& get(const std::string& name) const;
    std::vector<std::string> names() const;
    size_t size() const { return entries_.size(); }

    std::vector<uint8_t> serialize() const;
    static TensorArchive deserialize(const std::vector<uint8_t>& bytes);

    void save(const std::string& path) const;
    static TensorArchive load(const std::string& path);

private:
    std::map<std::string, NamedTensor> entries_;
};

// zlib CRC32 as 8 hex digits.
std::string file_crc32_hex(const std::string& path);
std::string bytes_crc32_hex(const uint8_t* data, size_t size);

}  // namespace dudospect
