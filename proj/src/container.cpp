// SPDX-License-Identifier: Apache-2.0

#include "coral8/container.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <vector>

namespace coral8 {

namespace {

constexpr std::array<char, 4> kTensorMagic{'C', 'R', '8', 'T'};
constexpr std::array<char, 4> kCheckpointMagic{'C', 'R', '8', 'C'};
constexpr std::uint8_t kVersion = 0x01;

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw FormatError(FormatError::Kind::truncated, std::string("truncated while reading ") + what);
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void read_magic(std::istream& in, const std::array<char, 4>& magic, const char* kind) {
  std::array<char, 4> got{};
  if (!in.read(got.data(), got.size()) || got != magic)
    throw FormatError(FormatError::Kind::bad_magic, std::string("bad magic: not a ") + kind + " container");
}

std::size_t scalar_size(DType d) { return d == DType::f32 ? 4 : 8; }

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t, DType dtype) {
  if (t.rank() == 0 || t.rank() > UINT16_MAX) throw ShapeError("write_tensor: unsupported rank");
  out.write(kTensorMagic.data(), kTensorMagic.size());
  put_le<std::uint8_t>(out, kVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.rank()));
  for (auto d : t.dims()) {
    if (d > UINT32_MAX) throw ShapeError("write_tensor: extent exceeds u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (double v : t.values()) {
    if (dtype == DType::f32)
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    else
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("write_tensor: stream failure");
}

namespace {

struct Header {
  DType dtype;
  Shape dims;
};

Header read_header(std::istream& in) {
  read_magic(in, kTensorMagic, "CR8T tensor");
  const auto version = get_le<std::uint8_t>(in, "version");
  if (version != kVersion)
    throw FormatError(FormatError::Kind::bad_version, "unsupported CR8T version " + std::to_string(version));
  const auto dtype = get_le<std::uint8_t>(in, "dtype");
  if (dtype > 1) throw FormatError(FormatError::Kind::unknown_dtype, "unknown dtype " + std::to_string(dtype));
  const auto rank = get_le<std::uint16_t>(in, "rank");
  if (rank == 0) throw FormatError(FormatError::Kind::bad_header, "rank 0 tensor");
  Header h{static_cast<DType>(dtype), {}};
  for (std::uint16_t i = 0; i < rank; ++i) {
    const auto d = get_le<std::uint32_t>(in, "dims");
    if (d == 0) throw FormatError(FormatError::Kind::bad_header, "zero extent in dims");
    h.dims.push_back(d);
  }
  return h;
}

Tensor decode_payload(const Header& h, const unsigned char* bytes) {
  const std::size_t n = element_count(h.dims);
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (h.dtype == DType::f32) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
      data[i] = static_cast<double>(std::bit_cast<float>(u));
    } else {
      std::uint64_t u = 0;
      for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
      data[i] = std::bit_cast<double>(u);
    }
  }
  return Tensor(h.dims, std::move(data));
}

}  // namespace

Tensor read_tensor(std::istream& in) {
  const Header h = read_header(in);
  const std::size_t bytes = element_count(h.dims) * scalar_size(h.dtype);
  std::vector<unsigned char> payload(bytes);
  if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes)))
    throw FormatError(FormatError::Kind::truncated,
                      "payload shorter than dims " + to_string(h.dims) + " require");
  return decode_payload(h, payload.data());
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& t, DType dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(out, t, dtype);
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const Header h = read_header(in);
  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = element_count(h.dims) * scalar_size(h.dtype);
  if (payload.size() != expected)
    throw FormatError(FormatError::Kind::payload_mismatch,
                      path.string() + ": dims " + to_string(h.dims) + " need " + std::to_string(expected) +
                          " payload bytes, found " + std::to_string(payload.size()));
  return decode_payload(h, payload.data());
}

void write_checkpoint(const std::filesystem::path& path, const NamedTensors& entries) {
  std::ostringstream buf(std::ios::binary);
  buf.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    if (name.size() > UINT16_MAX) throw std::invalid_argument("checkpoint entry name too long");
    put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(name.size()));
    buf.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(buf, t, DType::f64);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string bytes = buf.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

NamedTensors read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  read_magic(in, kCheckpointMagic, "CR8C checkpoint");
  const auto count = get_le<std::uint32_t>(in, "entry count");
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint16_t>(in, "entry name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError(FormatError::Kind::truncated, "truncated entry name");
    if (!out.emplace(name, read_tensor(in)).second)
      throw FormatError(FormatError::Kind::bad_header, "duplicate checkpoint entry " + name);
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(FormatError::Kind::payload_mismatch, "trailing bytes after last checkpoint entry");
  return out;
}

}  // namespace coral8
