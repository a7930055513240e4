// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sepkit/autodiff/tensor.h"

// Named-tensor container used for weights and training checkpoints.
//
// Layout (all integers little-endian):
//   "SPKT"  u32 version  u32 tensor_count
//   per tensor: u32 name_len, name bytes, u8 dtype (1 = f32, 2 = f64),
//               u32 ndim, i64 dims[ndim], element data
//   u64 metadata_len, metadata bytes (JSON text)
namespace sepkit::separator {

inline constexpr uint32_t kCheckpointVersion = 1;

enum class StoredType : uint8_t { kFloat32 = 1, kFloat64 = 2 };

struct NamedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> data;
};

struct TensorArchive {
  std::vector<NamedTensor> tensors;
  std::string metadata;  // JSON text

  const NamedTensor* Find(const std::string& name) const;
  void Put(std::string name, const ad::Shape& shape, std::vector<double> data);
};

// f32 is enough for exported weights; f64 keeps training resumption exact.
void SaveArchive(const std::string& path, const TensorArchive& archive, StoredType type);
TensorArchive LoadArchive(const std::string& path);

}  // namespace sepkit::separator
