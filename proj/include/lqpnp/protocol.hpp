// SPDX-License-Identifier: Apache-2.0
#pragma once

// LQDN v1 external-denoiser wire protocol. All integers and floats are
// little-endian.
//
//   request : "LQDN1" u32 height u32 width u32 channels u32 t f64 alpha
//             float32[height*width*channels]
//   success : "LQOK1" float32[height*width*channels]
//   error   : "LQER1" u32 length utf8[length]

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lqpnp/errors.hpp"
#include "lqpnp/image.hpp"

namespace lqpnp::protocol {

inline constexpr std::string_view kRequestMagic = "LQDN1";
inline constexpr std::string_view kOkMagic = "LQOK1";
inline constexpr std::string_view kErrorMagic = "LQER1";
inline constexpr std::size_t kMagicSize = 5;
inline constexpr std::size_t kRequestHeaderSize = kMagicSize + 4 * 4 + 8;

struct Request {
  Shape shape;
  std::uint32_t t = 0;
  double alpha = 1.0;
  std::vector<float> payload;
};

std::vector<std::uint8_t> encode_request(const Request& request);
std::vector<std::uint8_t> encode_ok(std::span<const float> payload);
std::vector<std::uint8_t> encode_error(std::string_view message);

/// Blocking byte stream with per-operation deadlines.
class Stream {
 public:
  virtual ~Stream() = default;
  /// Returns false on end-of-stream before the first byte; throws
  /// TransportError on a mid-buffer EOF, timeout or I/O failure.
  virtual bool read_exact_or_eof(std::span<std::uint8_t> out) = 0;
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;

  void read_exact(std::span<std::uint8_t> out);
};

/// Wraps a socket or pipe pair. Owns (closes) the descriptors when asked.
class FdStream final : public Stream {
 public:
  FdStream(int read_fd, int write_fd, int timeout_ms, bool owns = false);
  ~FdStream() override;
  FdStream(const FdStream&) = delete;
  FdStream& operator=(const FdStream&) = delete;

  bool read_exact_or_eof(std::span<std::uint8_t> out) override;
  void write_all(std::span<const std::uint8_t> bytes) override;

 private:
  int read_fd_;
  int write_fd_;
  int timeout_ms_;
  bool owns_;
};

/// Reads one request. Returns false on clean EOF before the first byte.
/// Throws TransportError with "short frame" on truncation and "bad magic" on
/// an unknown frame tag.
bool read_request(Stream& stream, Request& out);

/// An LQER1 frame. The stream stays frame-aligned after one.
struct ServerError : TransportError {
  explicit ServerError(const std::string& message)
      : TransportError("denoiser server error: " + message) {}
};

/// Reads the reply to a request of `count` values. An LQER1 frame becomes a
/// ServerError carrying the server message.
std::vector<float> read_response(Stream& stream, std::size_t count);

}  // namespace lqpnp::protocol
