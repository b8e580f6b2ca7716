// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lqpnp {

// Error kinds mirror the status codes of the C API one-to-one.
enum class ErrorKind {
  argument = 1,
  dimension = 2,
  decode = 3,
  io = 4,
  numeric = 5,
  transport = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& what) : Error(ErrorKind::argument, what) {}
};
struct DimensionError : Error {
  explicit DimensionError(const std::string& what) : Error(ErrorKind::dimension, what) {}
};
struct DecodeError : Error {
  explicit DecodeError(const std::string& what) : Error(ErrorKind::decode, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};
struct TransportError : Error {
  explicit TransportError(const std::string& what) : Error(ErrorKind::transport, what) {}
};

}  // namespace lqpnp
