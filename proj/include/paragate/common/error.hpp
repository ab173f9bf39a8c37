// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace paragate {

/// Base class for every error raised by the library. Each module derives a
/// typed error carrying its own kind enum.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Kind>
class KindedError : public Error {
 public:
  KindedError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace paragate
