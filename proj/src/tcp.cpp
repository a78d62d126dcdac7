#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "redring/errors.hpp"
#include "redring/transport.hpp"

namespace redring {

namespace {

std::string errno_message(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;

  int get() const noexcept { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

class TcpLink final : public Link {
 public:
  explicit TcpLink(Fd fd) : fd_(std::move(fd)) {
    int one = 1;
    ::setsockopt(fd_.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }

  void close() override { ::shutdown(fd_.get(), SHUT_RDWR); }

  // Sends and receives concurrently so two large simultaneous payloads cannot
  // deadlock on full socket buffers.
  std::vector<std::uint8_t> swap(std::span<const std::uint8_t> payload) override {
    if (payload.size() > 0xffffffffULL) throw TransportError("frame larger than 4 GiB");
    std::vector<std::uint8_t> out(4 + payload.size());
    const auto len = static_cast<std::uint32_t>(payload.size());
    for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(len >> (8 * i));
    std::memcpy(out.data() + 4, payload.data(), payload.size());

    std::size_t sent = 0;
    std::uint8_t header[4];
    std::size_t header_got = 0;
    std::vector<std::uint8_t> in;
    std::size_t in_got = 0;
    bool have_len = false;

    while (sent < out.size() || !have_len || in_got < in.size()) {
      pollfd p{fd_.get(), 0, 0};
      if (sent < out.size()) p.events |= POLLOUT;
      if (!have_len || in_got < in.size()) p.events |= POLLIN;
      if (::poll(&p, 1, -1) < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_message("poll"));
      }
      if (p.revents & (POLLERR | POLLNVAL)) throw TransportError("socket error");
      if ((p.revents & POLLOUT) && sent < out.size()) {
        const ssize_t n = ::send(fd_.get(), out.data() + sent, out.size() - sent,
                                 MSG_DONTWAIT | MSG_NOSIGNAL);
        if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
          throw TransportError(errno_message("send"));
        }
        if (n > 0) sent += static_cast<std::size_t>(n);
      }
      if (p.revents & (POLLIN | POLLHUP)) {
        ssize_t n;
        if (!have_len) {
          n = ::recv(fd_.get(), header + header_got, 4 - header_got, MSG_DONTWAIT);
        } else {
          n = ::recv(fd_.get(), in.data() + in_got, in.size() - in_got, MSG_DONTWAIT);
        }
        if (n == 0) throw TransportError("peer disconnected");
        if (n < 0) {
          if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
          throw TransportError(errno_message("recv"));
        }
        if (!have_len) {
          header_got += static_cast<std::size_t>(n);
          if (header_got == 4) {
            const std::uint32_t peer_len = static_cast<std::uint32_t>(header[0]) |
                                           (static_cast<std::uint32_t>(header[1]) << 8) |
                                           (static_cast<std::uint32_t>(header[2]) << 16) |
                                           (static_cast<std::uint32_t>(header[3]) << 24);
            in.resize(peer_len);
            have_len = true;
          }
        } else {
          in_got += static_cast<std::size_t>(n);
        }
      }
    }
    return in;
  }

 private:
  Fd fd_;
};

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), port_str.c_str(), &hints, &res);
  if (rc != 0) throw TransportError("cannot resolve " + host + ": " + gai_strerror(rc));
  return res;
}

}  // namespace

std::pair<std::string, std::uint16_t> parse_host_port(const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos) throw ConfigError("expected host:port, got '" + spec + "'");
  const std::string host = spec.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(spec.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad port in '" + spec + "'");
  }
  if (port <= 0 || port > 65535) throw ConfigError("port out of range in '" + spec + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

std::unique_ptr<Link> tcp_listen(const std::string& host, std::uint16_t port) {
  addrinfo* res = resolve(host, port, true);
  Fd listener(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  if (listener.get() < 0) {
    ::freeaddrinfo(res);
    throw TransportError(errno_message("socket"));
  }
  int one = 1;
  ::setsockopt(listener.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const int bound = ::bind(listener.get(), res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (bound < 0) throw TransportError(errno_message("bind"));
  if (::listen(listener.get(), 1) < 0) throw TransportError(errno_message("listen"));
  Fd conn(::accept(listener.get(), nullptr, nullptr));
  if (conn.get() < 0) throw TransportError(errno_message("accept"));
  return std::make_unique<TcpLink>(std::move(conn));
}

std::unique_ptr<Link> tcp_connect(const std::string& host, std::uint16_t port, int timeout_ms) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    addrinfo* res = resolve(host, port, false);
    Fd fd(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
    const int rc = fd.get() < 0 ? -1 : ::connect(fd.get(), res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc == 0) return std::make_unique<TcpLink>(std::move(fd));
    if (std::chrono::steady_clock::now() >= deadline) {
      throw TransportError(errno_message(("connect to " + host + ":" + std::to_string(port)).c_str()));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace redring
