// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/separator/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sepkit/error.h"

namespace sepkit::separator {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[4] = {'S', 'P', 'K', 'T'};

template <typename T>
void Put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("checkpoint: truncated file " + path);
  return v;
}

}  // namespace

const NamedTensor* TensorArchive::Find(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void TensorArchive::Put(std::string name, const ad::Shape& shape, std::vector<double> data) {
  tensors.push_back({std::move(name), shape, std::move(data)});
}

void SaveArchive(const std::string& path, const TensorArchive& archive, StoredType type) {
  std::ostringstream out;
  out.write(kMagic, 4);
  Put<uint32_t>(out, kCheckpointVersion);
  Put<uint32_t>(out, static_cast<uint32_t>(archive.tensors.size()));
  for (const NamedTensor& t : archive.tensors) {
    if (ad::NumElements(t.shape) != static_cast<int64_t>(t.data.size())) {
      throw UsageError("checkpoint: tensor " + t.name + " data does not match its shape");
    }
    Put<uint32_t>(out, static_cast<uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    Put<uint8_t>(out, static_cast<uint8_t>(type));
    Put<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) Put<int64_t>(out, d);
    for (double v : t.data) {
      if (type == StoredType::kFloat32) {
        Put<float>(out, static_cast<float>(v));
      } else {
        Put<double>(out, v);
      }
    }
  }
  Put<uint64_t>(out, archive.metadata.size());
  out.write(archive.metadata.data(), static_cast<std::streamsize>(archive.metadata.size()));

  // Write to a sibling temp file first so a crash never leaves a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("checkpoint: cannot write " + path);
    const std::string bytes = out.str();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw InputError("checkpoint: write failed for " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw InputError("checkpoint: cannot move " + tmp + " to " + path);
  }
}

TensorArchive LoadArchive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("checkpoint: bad magic in " + path);
  const auto version = Get<uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " in " + path);
  }
  TensorArchive archive;
  const auto count = Get<uint32_t>(in, path);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = Get<uint32_t>(in, path);
    if (name_len > 4096) throw FormatError("checkpoint: implausible name length in " + path);
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    const auto dtype = Get<uint8_t>(in, path);
    if (dtype != 1 && dtype != 2) {
      throw FormatError("checkpoint: unknown dtype " + std::to_string(dtype) + " for " + t.name);
    }
    const auto ndim = Get<uint32_t>(in, path);
    if (ndim > 8) throw FormatError("checkpoint: implausible rank for " + t.name);
    for (uint32_t d = 0; d < ndim; ++d) {
      const auto dim = Get<int64_t>(in, path);
      if (dim < 0) throw FormatError("checkpoint: negative dimension for " + t.name);
      t.shape.push_back(dim);
    }
    const int64_t n = ad::NumElements(t.shape);
    t.data.resize(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) {
      t.data[j] = dtype == 1 ? static_cast<double>(Get<float>(in, path)) : Get<double>(in, path);
    }
    archive.tensors.push_back(std::move(t));
  }
  const auto meta_len = Get<uint64_t>(in, path);
  if (meta_len > (uint64_t{1} << 30)) throw FormatError("checkpoint: implausible metadata size");
  archive.metadata.resize(meta_len);
  in.read(archive.metadata.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw FormatError("checkpoint: truncated metadata in " + path);
  return archive;
}

}  // namespace sepkit::separator
