// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace sepkit {

// Root of every error thrown by the library. kind() is a stable
// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define SEPKIT_DEFINE_ERROR(Name, Tag)                                   \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(Tag, what) {}         \
  }

SEPKIT_DEFINE_ERROR(DimensionError, "dimension");
SEPKIT_DEFINE_ERROR(NumericError, "numeric");
SEPKIT_DEFINE_ERROR(UsageError, "usage");
SEPKIT_DEFINE_ERROR(ConfigError, "config");
SEPKIT_DEFINE_ERROR(InputError, "input");
SEPKIT_DEFINE_ERROR(AlignmentError, "alignment");
SEPKIT_DEFINE_ERROR(MetricError, "metric");
SEPKIT_DEFINE_ERROR(GeometryError, "geometry");
SEPKIT_DEFINE_ERROR(InfeasibleRulesError, "infeasible_rules");
SEPKIT_DEFINE_ERROR(ManifestError, "manifest");
SEPKIT_DEFINE_ERROR(FormatError, "format");

#undef SEPKIT_DEFINE_ERROR

}  // namespace sepkit
