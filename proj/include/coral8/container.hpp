// SPDX-License-Identifier: Apache-2.0
//
// Binary containers.
//
// CR8T tensor blob:
//   "CR8T" | u8 version (0x01) | u8 dtype (0 = f32, 1 = f64) | u16 rank |
//   rank x u32 dims | row-major payload. All integers and scalars little-endian.
//
// CR8C checkpoint:
//   "CR8C" | u32 entry count | per entry: u16 name length, UTF-8 name, CR8T blob.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>

#include "coral8/tensor.hpp"

namespace coral8 {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

class FormatError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, bad_version, unknown_dtype, truncated, payload_mismatch, bad_header };

  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_tensor(std::ostream& out, const Tensor& t, DType dtype = DType::f64);
/// Reads exactly one blob from the stream.
Tensor read_tensor(std::istream& in);

void write_tensor_file(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::f64);
/// Whole-file read; trailing or missing payload bytes are a payload_mismatch.
Tensor read_tensor_file(const std::filesystem::path& path);

using NamedTensors = std::map<std::string, Tensor>;

void write_checkpoint(const std::filesystem::path& path, const NamedTensors& entries);
NamedTensors read_checkpoint(const std::filesystem::path& path);

}  // namespace coral8
