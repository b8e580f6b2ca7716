// SPDX-License-Identifier: Apache-2.0
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "lqpnp/denoisers.hpp"
#include "lqpnp/errors.hpp"
#include "lqpnp/protocol.hpp"
#include "test_support.hpp"

using namespace lqpnp;
namespace proto = lqpnp::protocol;

namespace {

// Hand-assembled little-endian frame bytes.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}
void put_text(std::vector<std::uint8_t>& out, const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }

/// A pipe whose write end is filled up front and then closed.
struct LoadedPipe {
  int fds[2];
  explicit LoadedPipe(const std::vector<std::uint8_t>& bytes) {
    REQUIRE(::pipe(fds) == 0);
    REQUIRE(::write(fds[1], bytes.data(), bytes.size()) == static_cast<ssize_t>(bytes.size()));
    ::close(fds[1]);
  }
  ~LoadedPipe() { ::close(fds[0]); }
};

std::vector<std::string> server_command(const std::string& mode) {
  return {LQDN_TEST_SERVER, "--mode", mode, "--transport", "stdio"};
}

ExternalEndpoint stdio_endpoint(const std::string& mode, int timeout_ms = 10000) {
  ExternalEndpoint e;
  e.transport = ExternalEndpoint::Transport::stdio;
  e.command = server_command(mode);
  e.timeout_ms = timeout_ms;
  return e;
}

ExternalEndpoint tcp_endpoint(std::uint16_t port) {
  ExternalEndpoint e;
  e.transport = ExternalEndpoint::Transport::tcp;
  e.host = "127.0.0.1";
  e.port = port;
  e.timeout_ms = 10000;
  return e;
}

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::uint16_t unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("request encoding is little endian") {
    proto::Request r;
    r.shape = {2, 3, 1};
    r.t = 0x01020304;
    r.alpha = 0.375;
    r.payload = {0.f, 1.f, -2.5f, 3.25f, 1e-7f, 100.f};
    std::vector<std::uint8_t> expect;
    put_text(expect, "LQDN1");
    put_u32(expect, 2);
    put_u32(expect, 3);
    put_u32(expect, 1);
    put_u32(expect, 0x01020304);
    put_f64(expect, 0.375);
    for (float v : r.payload) put_f32(expect, v);
    CHECK(proto::encode_request(r) == expect);
    CHECK(proto::kRequestHeaderSize == 29);

    r.payload.pop_back();
    CHECK_THROWS_AS(proto::encode_request(r), DimensionError);

    std::vector<std::uint8_t> ok;
    put_text(ok, "LQOK1");
    put_f32(ok, 0.5f);
    put_f32(ok, -1.f);
    CHECK(proto::encode_ok(std::vector<float>{0.5f, -1.f}) == ok);

    std::vector<std::uint8_t> err;
    put_text(err, "LQER1");
    put_u32(err, 4);
    put_text(err, "oops");
    CHECK(proto::encode_error("oops") == err);
  }

  TEST_CASE("request round trip through a pipe") {
    proto::Request r;
    r.shape = {3, 2, 2};
    r.t = 417;
    r.alpha = 0.123456789012345;
    r.payload.resize(12);
    for (std::size_t i = 0; i < 12; ++i) r.payload[i] = static_cast<float>(i) * 0.1f - 0.3f;
    auto bytes = proto::encode_request(r);
    const auto twice = [&] {
      auto b = bytes;
      b.insert(b.end(), bytes.begin(), bytes.end());
      return b;
    }();
    LoadedPipe pipe(twice);
    proto::FdStream stream(pipe.fds[0], -1, 1000);
    for (int i = 0; i < 2; ++i) {
      proto::Request got;
      REQUIRE(proto::read_request(stream, got));
      CHECK(got.shape.height == 3);
      CHECK(got.shape.width == 2);
      CHECK(got.shape.channels == 2);
      CHECK(got.t == 417);
      CHECK(got.alpha == r.alpha);
      CHECK(got.payload == r.payload);
    }
    proto::Request none;
    CHECK_FALSE(proto::read_request(stream, none));
  }

  TEST_CASE("malformed frames") {
    proto::Request r;
    r.shape = {2, 2, 1};
    r.payload = {1, 2, 3, 4};
    auto bytes = proto::encode_request(r);

    SUBCASE("truncated payload") {
      bytes.resize(bytes.size() - 3);
      LoadedPipe pipe(bytes);
      proto::FdStream stream(pipe.fds[0], -1, 1000);
      proto::Request got;
      CHECK_THROWS_WITH_AS(proto::read_request(stream, got), doctest::Contains("short frame"), TransportError);
    }
    SUBCASE("truncated header") {
      bytes.resize(12);
      LoadedPipe pipe(bytes);
      proto::FdStream stream(pipe.fds[0], -1, 1000);
      proto::Request got;
      CHECK_THROWS_WITH_AS(proto::read_request(stream, got), doctest::Contains("short frame"), TransportError);
    }
    SUBCASE("unknown tag") {
      bytes[4] = '2';
      LoadedPipe pipe(bytes);
      proto::FdStream stream(pipe.fds[0], -1, 1000);
      proto::Request got;
      CHECK_THROWS_WITH_AS(proto::read_request(stream, got), doctest::Contains("bad magic"), TransportError);
    }
  }

  TEST_CASE("responses") {
    std::vector<std::uint8_t> bytes;
    put_text(bytes, "LQOK1");
    put_f32(bytes, 0.25f);
    put_f32(bytes, 0.75f);
    put_text(bytes, "LQER1");
    put_u32(bytes, 9);
    put_text(bytes, "exploded!");
    put_text(bytes, "LQOK1");
    put_f32(bytes, 2.f);
    put_f32(bytes, 3.f);
    put_text(bytes, "HELLO");
    LoadedPipe pipe(bytes);
    proto::FdStream stream(pipe.fds[0], -1, 1000);
    CHECK(proto::read_response(stream, 2) == std::vector<float>{0.25f, 0.75f});
    CHECK_THROWS_WITH_AS(proto::read_response(stream, 2), doctest::Contains("exploded!"), proto::ServerError);
    // The error frame left the stream aligned on the next frame.
    CHECK(proto::read_response(stream, 2) == std::vector<float>{2.f, 3.f});
    CHECK_THROWS_WITH_AS(proto::read_response(stream, 2), doctest::Contains("bad magic"), TransportError);
    CHECK_THROWS_AS(proto::read_response(stream, 2), TransportError);
  }

  TEST_CASE("stdio identity server echoes bit-exactly") {
    auto den = external_denoiser(stdio_endpoint("identity"));
    CHECK_FALSE(den->has_diag_jacobian());
    const auto x = random_values(4 * 5 * 3, 1, -2.0, 3.0);
    std::vector<double> as_float(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) as_float[i] = static_cast<float>(x[i]);
    for (int round = 0; round < 3; ++round) CHECK(den->denoise(x, {4, 5, 3}, {10, 0.5}) == as_float);
  }

  TEST_CASE("tcp mixture server matches the in-process denoiser") {
    lqtest::TcpServer server("gmm");
    auto remote = external_denoiser(tcp_endpoint(server.port()));
    auto local = gmm_denoiser(default_gmm_prior());
    const auto x = random_values(32 * 32, 7, -0.5, 1.5);
    for (double alpha : {0.02, 0.4, 0.97}) {
      const auto a = remote->denoise(x, {32, 32, 1}, {3, alpha});
      const auto b = local->denoise(x, {32, 32, 1}, {3, alpha});
      double worst = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
      CAPTURE(alpha);
      CHECK(worst <= 1e-5);
    }
    // A clone opens its own connection.
    auto other = remote->clone();
    CHECK(other->denoise(x, {32, 32, 1}, {3, 0.4}) == remote->denoise(x, {32, 32, 1}, {3, 0.4}));
  }

  TEST_CASE("stdio mixture server parity") {
    auto remote = external_denoiser(stdio_endpoint("gmm"));
    auto local = gmm_denoiser(default_gmm_prior());
    const auto x = random_values(16 * 8 * 3, 9, -0.3, 1.3);
    const auto a = remote->denoise(x, {16, 8, 3}, {500, 0.3});
    const auto b = local->denoise(x, {16, 8, 3}, {500, 0.3});
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-5);
  }

  TEST_CASE("server error frames keep the connection usable") {
    auto den = external_denoiser(stdio_endpoint("error-every=2"));
    const auto x = random_values(9, 2, 0.0, 1.0);
    CHECK_NOTHROW(den->denoise(x, {3, 3, 1}, {0, 0.5}));
    CHECK_THROWS_WITH_AS(den->denoise(x, {3, 3, 1}, {0, 0.5}), doctest::Contains("synthetic failure on request 2"),
                         proto::ServerError);
    CHECK_NOTHROW(den->denoise(x, {3, 3, 1}, {0, 0.5}));
  }

  TEST_CASE("transport failures") {
    const auto x = random_values(9, 2, 0.0, 1.0);
    SUBCASE("nothing listening") {
      CHECK_THROWS_AS(external_denoiser(tcp_endpoint(unused_port())), TransportError);
    }
    SUBCASE("missing server binary") {
      auto e = stdio_endpoint("identity");
      e.command = {"/nonexistent/lqdn-server"};
      CHECK_THROWS_AS(external_denoiser(e)->denoise(x, {3, 3, 1}, {0, 0.5}), TransportError);
    }
    SUBCASE("server closes mid-conversation") {
      auto den = external_denoiser(stdio_endpoint("close"));
      CHECK_THROWS_AS(den->denoise(x, {3, 3, 1}, {0, 0.5}), TransportError);
      CHECK_THROWS_WITH_AS(den->denoise(x, {3, 3, 1}, {0, 0.5}), doctest::Contains("closed"), TransportError);
    }
    SUBCASE("server never answers") {
      ExternalEndpoint e;
      e.transport = ExternalEndpoint::Transport::stdio;
      e.command = {"/bin/sleep", "5"};
      e.timeout_ms = 200;
      auto den = external_denoiser(e);
      CHECK_THROWS_WITH_AS(den->denoise(x, {3, 3, 1}, {0, 0.5}), doctest::Contains("timed out"), TransportError);
    }
    SUBCASE("invalid endpoint") {
      auto e = stdio_endpoint("identity");
      e.timeout_ms = 0;
      CHECK_THROWS_AS(external_denoiser(e), ArgumentError);
      e.timeout_ms = 100;
      e.command.clear();
      CHECK_THROWS_AS(external_denoiser(e), ArgumentError);
    }
  }
}
