// SPDX-License-Identifier: Apache-2.0
#include "setrank/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace setrank {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");
static_assert(sizeof(double) == 8 &&
                  std::numeric_limits<double>::is_iec559,
              "checkpoint serialization assumes IEEE-754 binary64");

namespace {

constexpr char kMagic[8] = {'S', 'E', 'T', 'R', 'A', 'N', 'K', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    throw std::runtime_error("checkpoint: truncated stream");
  }
  return v;
}

}  // namespace

void save_records(std::ostream& out,
                  const std::vector<TensorRecord>& records) {
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(records.size()));
  for (const TensorRecord& r : records) {
    write_pod(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    write_pod(out, static_cast<std::uint32_t>(r.shape.size()));
    Index n = 1;
    for (Index d : r.shape) {
      write_pod(out, static_cast<std::uint64_t>(d));
      n *= d;
    }
    if (n != r.values.size()) {
      throw std::invalid_argument("checkpoint: record '" + r.name +
                                  "' shape does not match value count");
    }
    out.write(reinterpret_cast<const char*>(r.values.data()),
              static_cast<std::streamsize>(sizeof(double)) * n);
  }
  if (!out) {
    throw std::runtime_error("checkpoint: write failed");
  }
}

std::vector<TensorRecord> load_records(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  }
  const auto count = read_pod<std::uint64_t>(in);
  std::vector<TensorRecord> records;
  records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    TensorRecord r;
    const auto name_len = read_pod<std::uint32_t>(in);
    r.name.resize(name_len);
    in.read(r.name.data(), name_len);
    const auto rank = read_pod<std::uint32_t>(in);
    Index n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = read_pod<std::uint64_t>(in);
      r.shape.push_back(static_cast<Index>(dim));
      n *= static_cast<Index>(dim);
    }
    r.values.resize(n);
    in.read(reinterpret_cast<char*>(r.values.data()),
            static_cast<std::streamsize>(sizeof(double)) * n);
    if (!in) {
      throw std::runtime_error("checkpoint: truncated stream");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void save_records(const std::string& path,
                  const std::vector<TensorRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("checkpoint: cannot open '" + path +
                             "' for writing");
  }
  save_records(out, records);
}

std::vector<TensorRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  }
  return load_records(in);
}

}  // namespace setrank
