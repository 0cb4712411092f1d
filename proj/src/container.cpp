// SPDX-License-Identifier: Apache-2.0
#include "astroq/container.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "astroq/errors.hpp"

namespace astroq {

namespace {

constexpr char kMagic[4] = {'A', 'S', 'T', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kMaxNameLen = 4096;
constexpr std::size_t kMaxDims = 255;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
    put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Cursor {
public:
    Cursor(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }

    void need(std::size_t n, const std::string& what) const {
        if (pos_ + n > bytes_.size()) {
            throw FormatError("container: truncated while reading " + what +
                              " at offset " + std::to_string(pos_) + " (need " +
                              std::to_string(n) + " bytes, have " +
                              std::to_string(bytes_.size() - pos_) + ")");
        }
    }

    std::uint8_t u8(const std::string& what) {
        need(1, what);
        return bytes_[pos_++];
    }

    std::uint32_t u32(const std::string& what) {
        need(4, what);
        std::uint32_t v = 0;
        v |= static_cast<std::uint32_t>(bytes_[pos_]);
        v |= static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8;
        v |= static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16;
        v |= static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24;
        pos_ += 4;
        return v;
    }

    std::string str(std::size_t n, const std::string& what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    const std::uint8_t* raw(std::size_t n, const std::string& what) {
        need(n, what);
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

std::size_t dtype_size(DType d) {
    return d == DType::f32 ? 4 : 1;
}

} // namespace

std::size_t Tensor::elem_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) {
        n *= d;
    }
    return dims.empty() ? 0 : n;
}

Tensor Tensor::from_matrix(const std::string& name, const DenseMatrix& m) {
    Tensor t;
    t.name = name;
    t.dtype = DType::f32;
    t.dims = {static_cast<std::uint32_t>(m.rows()),
              static_cast<std::uint32_t>(m.cols())};
    t.f32.reserve(m.size());
    for (double v : m.data()) {
        const float f = static_cast<float>(v);
        if (!std::isfinite(f)) {
            throw DataError("tensor '" + name +
                            "': value not representable as finite float32");
        }
        t.f32.push_back(f);
    }
    return t;
}

Tensor Tensor::from_bytes(const std::string& name, const std::string& bytes) {
    Tensor t;
    t.name = name;
    t.dtype = DType::i8;
    t.dims = {static_cast<std::uint32_t>(bytes.size())};
    t.i8.reserve(bytes.size());
    for (char c : bytes) {
        t.i8.push_back(static_cast<std::int8_t>(c));
    }
    return t;
}

DenseMatrix Tensor::to_matrix() const {
    if (dtype != DType::f32 || dims.size() != 2) {
        throw FormatError("tensor '" + name +
                          "' is not a 2-D float32 tensor");
    }
    DenseMatrix m(dims[0], dims[1]);
    for (std::size_t i = 0; i < f32.size(); ++i) {
        m.data()[i] = static_cast<double>(f32[i]);
    }
    m.require_finite("tensor '" + name + "'");
    return m;
}

std::vector<std::uint8_t> serialize_container(const std::vector<Tensor>& tensors) {
    std::set<std::string> names;
    for (const Tensor& t : tensors) {
        if (!names.insert(t.name).second) {
            throw DataError("container: duplicate tensor name '" + t.name + "'");
        }
        if (t.name.size() > kMaxNameLen) {
            throw std::invalid_argument("container: tensor name too long");
        }
        if (t.dims.empty() || t.dims.size() > kMaxDims) {
            throw std::invalid_argument("tensor '" + t.name +
                                        "': ndim must be in [1, 255]");
        }
        std::size_t expected = 1;
        for (std::uint32_t d : t.dims) {
            expected *= d;
            if (expected > kMaxElements) {
                throw SizingError("tensor '" + t.name +
                                  "' exceeds the element budget");
            }
        }
        const std::size_t actual =
            t.dtype == DType::f32 ? t.f32.size() : t.i8.size();
        if (expected != actual) {
            throw std::invalid_argument("tensor '" + t.name +
                                        "': payload length does not match dims");
        }
        if (t.dtype == DType::f32) {
            for (float f : t.f32) {
                if (!std::isfinite(f)) {
                    throw DataError("tensor '" + t.name +
                                    "': non-finite float32 value");
                }
            }
        }
    }

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor& t : tensors) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.insert(out.end(), t.name.begin(), t.name.end());
        out.push_back(static_cast<std::uint8_t>(t.dtype));
        out.push_back(static_cast<std::uint8_t>(t.dims.size()));
        for (std::uint32_t d : t.dims) {
            put_u32(out, d);
        }
        if (t.dtype == DType::f32) {
            for (float f : t.f32) {
                put_f32(out, f);
            }
        } else {
            for (std::int8_t v : t.i8) {
                out.push_back(static_cast<std::uint8_t>(v));
            }
        }
    }
    return out;
}

std::vector<Tensor> parse_container(const std::vector<std::uint8_t>& bytes) {
    Cursor cur(bytes);

    const std::size_t magic_offset = cur.offset();
    const std::string magic = cur.str(4, "magic");
    if (magic != std::string(kMagic, 4)) {
        throw FormatError("container: bad magic at offset " +
                          std::to_string(magic_offset));
    }
    const std::size_t version_offset = cur.offset();
    const std::uint32_t version = cur.u32("version");
    if (version != kVersion) {
        throw FormatError("container: unsupported version " +
                          std::to_string(version) + " at offset " +
                          std::to_string(version_offset));
    }
    const std::uint32_t count = cur.u32("entry count");

    std::vector<Tensor> tensors;
    std::set<std::string> names;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::string entry_tag = "entry " + std::to_string(e);
        const std::uint32_t name_len = cur.u32(entry_tag + " name length");
        if (name_len > kMaxNameLen) {
            throw FormatError("container: name length " +
                              std::to_string(name_len) + " of " + entry_tag +
                              " exceeds the limit at offset " +
                              std::to_string(cur.offset() - 4));
        }
        Tensor t;
        t.name = cur.str(name_len, entry_tag + " name");
        const std::string tag = "entry '" + t.name + "'";
        if (!names.insert(t.name).second) {
            throw FormatError("container: duplicate tensor name '" + t.name +
                              "' at offset " + std::to_string(cur.offset()));
        }

        const std::size_t dtype_offset = cur.offset();
        const std::uint8_t dtype_raw = cur.u8(tag + " dtype");
        if (dtype_raw != static_cast<std::uint8_t>(DType::f32) &&
            dtype_raw != static_cast<std::uint8_t>(DType::i8)) {
            throw FormatError("container: unknown dtype " +
                              std::to_string(dtype_raw) + " for " + tag +
                              " at offset " + std::to_string(dtype_offset));
        }
        t.dtype = static_cast<DType>(dtype_raw);

        const std::uint8_t ndim = cur.u8(tag + " ndim");
        if (ndim == 0) {
            throw FormatError("container: zero ndim for " + tag +
                              " at offset " + std::to_string(cur.offset() - 1));
        }
        std::size_t elems = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            const std::uint32_t dim = cur.u32(tag + " dims");
            t.dims.push_back(dim);
            elems *= dim;
            if (elems > kMaxElements) {
                throw FormatError("container: " + tag +
                                  " exceeds the element budget at offset " +
                                  std::to_string(cur.offset() - 4));
            }
        }

        const std::size_t payload_bytes = elems * dtype_size(t.dtype);
        const std::uint8_t* payload =
            cur.raw(payload_bytes, tag + " payload");
        if (t.dtype == DType::f32) {
            t.f32.resize(elems);
            for (std::size_t i = 0; i < elems; ++i) {
                std::uint32_t v = 0;
                v |= static_cast<std::uint32_t>(payload[4 * i]);
                v |= static_cast<std::uint32_t>(payload[4 * i + 1]) << 8;
                v |= static_cast<std::uint32_t>(payload[4 * i + 2]) << 16;
                v |= static_cast<std::uint32_t>(payload[4 * i + 3]) << 24;
                t.f32[i] = std::bit_cast<float>(v);
            }
        } else {
            t.i8.resize(elems);
            for (std::size_t i = 0; i < elems; ++i) {
                t.i8[i] = static_cast<std::int8_t>(payload[i]);
            }
        }
        tensors.push_back(std::move(t));
    }
    if (!cur.at_end()) {
        throw FormatError("container: " +
                          std::to_string(bytes.size() - cur.offset()) +
                          " trailing bytes at offset " +
                          std::to_string(cur.offset()));
    }
    return tensors;
}

void write_container(const std::vector<Tensor>& tensors,
                     const std::string& path) {
    const std::vector<std::uint8_t> bytes = serialize_container(tensors);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("container: cannot open '" + tmp +
                                     "' for writing");
        }
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw std::runtime_error("container: write to '" + tmp + "' failed");
        }
    }
    std::filesystem::rename(tmp, path);
}

std::vector<Tensor> read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("container: cannot open '" + path + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_container(bytes);
}

const Tensor& find_tensor(const std::vector<Tensor>& tensors,
                          const std::string& name) {
    for (const Tensor& t : tensors) {
        if (t.name == name) {
            return t;
        }
    }
    throw FormatError("container: missing tensor '" + name + "'");
}

} // namespace astroq
