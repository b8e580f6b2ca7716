// SPDX-License-Identifier: Apache-2.0
#include "lqpnp/protocol.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>

#include "lqpnp/errors.hpp"

namespace lqpnp::protocol {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using Bits = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const auto bits = std::bit_cast<Bits>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  using Bits = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  Bits bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<Bits>(p[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

void put_magic(std::vector<std::uint8_t>& out, std::string_view magic) {
  out.insert(out.end(), magic.begin(), magic.end());
}

bool magic_is(const std::uint8_t* p, std::string_view magic) {
  return std::memcmp(p, magic.data(), kMagicSize) == 0;
}

void wait_ready(int fd, short events, int timeout_ms) {
  pollfd pfd{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&pfd, 1, timeout_ms);
    if (rc > 0) return;
    if (rc == 0) throw TransportError("denoiser endpoint timed out after " + std::to_string(timeout_ms) + " ms");
    if (errno != EINTR) throw TransportError(std::string("poll failed: ") + std::strerror(errno));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_request(const Request& request) {
  if (request.payload.size() != request.shape.size()) {
    throw DimensionError("request payload does not match its shape");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kRequestHeaderSize + 4 * request.payload.size());
  put_magic(out, kRequestMagic);
  put_le(out, static_cast<std::uint32_t>(request.shape.height));
  put_le(out, static_cast<std::uint32_t>(request.shape.width));
  put_le(out, static_cast<std::uint32_t>(request.shape.channels));
  put_le(out, request.t);
  put_le(out, request.alpha);
  for (float v : request.payload) put_le(out, v);
  return out;
}

std::vector<std::uint8_t> encode_ok(std::span<const float> payload) {
  std::vector<std::uint8_t> out;
  out.reserve(kMagicSize + 4 * payload.size());
  put_magic(out, kOkMagic);
  for (float v : payload) put_le(out, v);
  return out;
}

std::vector<std::uint8_t> encode_error(std::string_view message) {
  std::vector<std::uint8_t> out;
  put_magic(out, kErrorMagic);
  put_le(out, static_cast<std::uint32_t>(message.size()));
  out.insert(out.end(), message.begin(), message.end());
  return out;
}

void Stream::read_exact(std::span<std::uint8_t> out) {
  if (!read_exact_or_eof(out)) throw TransportError("denoiser endpoint closed the connection");
}

FdStream::FdStream(int read_fd, int write_fd, int timeout_ms, bool owns)
    : read_fd_(read_fd), write_fd_(write_fd), timeout_ms_(timeout_ms), owns_(owns) {}

FdStream::~FdStream() {
  if (!owns_) return;
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
}

bool FdStream::read_exact_or_eof(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    wait_ready(read_fd_, POLLIN, timeout_ms_);
    const ssize_t n = ::read(read_fd_, out.data() + done, out.size() - done);
    if (n > 0) {
      done += static_cast<std::size_t>(n);
      continue;
    }
    if (n == 0) {
      if (done == 0) return false;
      throw TransportError("short frame: stream ended mid-frame");
    }
    if (errno != EINTR && errno != EAGAIN) {
      throw TransportError(std::string("read failed: ") + std::strerror(errno));
    }
  }
  return true;
}

void FdStream::write_all(std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    wait_ready(write_fd_, POLLOUT, timeout_ms_);
    ssize_t n = ::send(write_fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) n = ::write(write_fd_, bytes.data() + done, bytes.size() - done);
    if (n > 0) {
      done += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
    throw TransportError(std::string("write failed: ") + std::strerror(errno));
  }
}

bool read_request(Stream& stream, Request& out) {
  std::uint8_t header[kRequestHeaderSize];
  if (!stream.read_exact_or_eof(std::span(header, kMagicSize))) return false;
  if (!magic_is(header, kRequestMagic)) throw TransportError("bad magic: expected LQDN1 request");
  stream.read_exact(std::span(header + kMagicSize, kRequestHeaderSize - kMagicSize));
  const std::uint8_t* p = header + kMagicSize;
  out.shape.height = get_le<std::uint32_t>(p);
  out.shape.width = get_le<std::uint32_t>(p + 4);
  out.shape.channels = get_le<std::uint32_t>(p + 8);
  out.t = get_le<std::uint32_t>(p + 12);
  out.alpha = get_le<double>(p + 16);
  if (out.shape.size() == 0 || out.shape.size() > (std::size_t{1} << 28)) {
    throw TransportError("invalid frame shape");
  }
  std::vector<std::uint8_t> body(4 * out.shape.size());
  stream.read_exact(body);
  out.payload.resize(out.shape.size());
  for (std::size_t i = 0; i < out.payload.size(); ++i) out.payload[i] = get_le<float>(&body[4 * i]);
  return true;
}

std::vector<float> read_response(Stream& stream, std::size_t count) {
  std::uint8_t magic[kMagicSize];
  stream.read_exact(magic);
  if (magic_is(magic, kErrorMagic)) {
    std::uint8_t len_bytes[4];
    stream.read_exact(len_bytes);
    std::string message(get_le<std::uint32_t>(len_bytes), '\0');
    stream.read_exact(std::span(reinterpret_cast<std::uint8_t*>(message.data()), message.size()));
    throw ServerError(message);
  }
  if (!magic_is(magic, kOkMagic)) throw TransportError("bad magic in denoiser response");
  std::vector<std::uint8_t> body(4 * count);
  stream.read_exact(body);
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = get_le<float>(&body[4 * i]);
  return out;
}

}  // namespace lqpnp::protocol
