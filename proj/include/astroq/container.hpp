// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "astroq/matrix.hpp"

namespace astroq {

// Binary tensor container, fixed little-endian regardless of host:
//
//   offset 0   magic            4 bytes  "ASTT"
//   offset 4   version          u32 LE   (= 1)
//   offset 8   entry_count      u32 LE
//   then per entry:
//              name_len         u32 LE
//              name             name_len bytes, UTF-8
//              dtype            u8       (1 = float32, 2 = int8)
//              ndim             u8
//              dims             ndim x u32 LE
//              payload          product(dims) * dtype_size bytes, row-major LE
//
// Names are unique within a container. Any structural violation on read
// raises FormatError carrying the byte offset (and entry name when known).

enum class DType : std::uint8_t { f32 = 1, i8 = 2 };

struct Tensor {
    std::string name;
    DType dtype = DType::f32;
    std::vector<std::uint32_t> dims;
    std::vector<float> f32;      // used when dtype == f32
    std::vector<std::int8_t> i8; // used when dtype == i8

    std::size_t elem_count() const;

    static Tensor from_matrix(const std::string& name, const DenseMatrix& m);
    static Tensor from_bytes(const std::string& name,
                             const std::string& bytes);

    /// Widens a 2-D float32 tensor to a DenseMatrix; validates finiteness.
    DenseMatrix to_matrix() const;
};

/// Serializes to the byte layout above. Writes atomically
/// (temp file + rename). Throws DataError for non-finite float payloads or
/// duplicate names, std::invalid_argument for shape/payload mismatches.
void write_container(const std::vector<Tensor>& tensors,
                     const std::string& path);

std::vector<Tensor> read_container(const std::string& path);

/// Parses an in-memory image; read_container is this plus file I/O.
std::vector<Tensor> parse_container(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> serialize_container(const std::vector<Tensor>& tensors);

/// Returns the tensor with the given name or throws FormatError naming it.
const Tensor& find_tensor(const std::vector<Tensor>& tensors,
                          const std::string& name);

} // namespace astroq
