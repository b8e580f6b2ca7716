// SPDX-License-Identifier: Apache-2.0
// Client side of the LQDN v1 protocol over TCP or a subprocess's stdio.

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

#include "lqpnp/denoisers.hpp"
#include "lqpnp/errors.hpp"
#include "lqpnp/protocol.hpp"

namespace lqpnp {

namespace {

std::string errno_text() { return std::strerror(errno); }

int connect_tcp(const std::string& host, std::uint16_t port, int timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no addresses";
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_error = errno_text();
      continue;
    }
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc < 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, timeout_ms);
      if (rc == 1) {
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
        errno = err;
      } else {
        if (rc == 0) errno = ETIMEDOUT;
        rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      ::freeaddrinfo(found);
      return fd;
    }
    last_error = errno_text();
    ::close(fd);
  }
  ::freeaddrinfo(found);
  throw TransportError("cannot connect to " + host + ":" + service + ": " + last_error);
}

class ExternalDenoiser final : public Denoiser {
 public:
  explicit ExternalDenoiser(ExternalEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.timeout_ms <= 0) throw ArgumentError("endpoint timeout must be positive");
    if (endpoint_.transport == ExternalEndpoint::Transport::tcp) {
      const int fd = connect_tcp(endpoint_.host, endpoint_.port, endpoint_.timeout_ms);
      stream_ = std::make_unique<protocol::FdStream>(fd, fd, endpoint_.timeout_ms, true);
    } else {
      spawn();
    }
  }

  ~ExternalDenoiser() override {
    stream_.reset();  // closing the socket signals end-of-input to the server
    if (child_ > 0) reap();
  }

  std::vector<double> denoise(std::span<const double> x, const Shape& shape,
                              NoiseLevel level) override {
    if (x.size() != shape.size()) throw DimensionError("denoiser input does not match its shape");
    if (!stream_) throw TransportError("denoiser connection is closed after an earlier failure");
    protocol::Request request;
    request.shape = shape;
    request.t = static_cast<std::uint32_t>(level.t);
    request.alpha = level.alpha;
    request.payload.assign(x.begin(), x.end());
    try {
      stream_->write_all(protocol::encode_request(request));
      const std::vector<float> reply = protocol::read_response(*stream_, x.size());
      std::vector<double> out(reply.begin(), reply.end());
      for (double v : out) {
        if (!std::isfinite(v)) throw TransportError("denoiser server returned a non-finite value");
      }
      return out;
    } catch (const protocol::ServerError&) {
      throw;
    } catch (const TransportError&) {
      stream_.reset();
      throw;
    }
  }

  std::unique_ptr<Denoiser> clone() const override {
    return std::make_unique<ExternalDenoiser>(endpoint_);
  }

 private:
  void spawn() {
    if (endpoint_.command.empty()) throw ArgumentError("stdio endpoint needs a server command");
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      throw TransportError("socketpair failed: " + errno_text());
    }
    std::vector<char*> argv;
    for (const std::string& arg : endpoint_.command) argv.push_back(const_cast<char*>(arg.c_str()));
    argv.push_back(nullptr);
    // exec failures are reported through a close-on-exec pipe: EOF means the
    // server image was loaded.
    int status_pipe[2];
    if (::pipe2(status_pipe, O_CLOEXEC) != 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw TransportError("pipe failed: " + errno_text());
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {fds[0], fds[1], status_pipe[0], status_pipe[1]}) ::close(fd);
      throw TransportError("fork failed: " + errno_text());
    }
    if (pid == 0) {
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::execvp(argv[0], argv.data());
      const int err = errno;
      [[maybe_unused]] auto n = ::write(status_pipe[1], &err, sizeof(err));
      ::_exit(127);
    }
    ::close(fds[1]);
    ::close(status_pipe[1]);
    child_ = pid;
    stream_ = std::make_unique<protocol::FdStream>(fds[0], fds[0], endpoint_.timeout_ms, true);
    int exec_errno = 0;
    ssize_t got = 0;
    do {
      got = ::read(status_pipe[0], &exec_errno, sizeof(exec_errno));
    } while (got < 0 && errno == EINTR);
    ::close(status_pipe[0]);
    if (got > 0) {
      stream_.reset();
      reap();
      throw TransportError("cannot start denoiser server '" + endpoint_.command.front() +
                           "': " + std::strerror(exec_errno));
    }
  }

  void reap() {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(endpoint_.timeout_ms);
    int status = 0;
    while (::waitpid(child_, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() > deadline) {
        ::kill(child_, SIGKILL);
        ::waitpid(child_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    child_ = -1;
  }

  ExternalEndpoint endpoint_;
  std::unique_ptr<protocol::FdStream> stream_;
  pid_t child_ = -1;
};

}  // namespace

DenoiserPtr external_denoiser(const ExternalEndpoint& endpoint) {
  return std::make_unique<ExternalDenoiser>(endpoint);
}

}  // namespace lqpnp
