#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "cocoi/errors.hpp"
#include "cocoi/wire.hpp"

namespace cocoi {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = o.fd_;
      o.fd_ = -1;
    }
    return *this;
  }

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

  // half-close for send; wakes a peer blocked on recv
  void shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  // 0 restores fully blocking reads
  void set_recv_timeout(double seconds) const {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(seconds);
    tv.tv_usec = static_cast<suseconds_t>((seconds - static_cast<double>(tv.tv_sec)) * 1e6);
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  }

  void send_all(const void* data, std::size_t len) const {
    const char* p = static_cast<const char*>(data);
    while (len > 0) {
      const ssize_t n = ::send(fd_, p, len, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
      }
      p += n;
      len -= static_cast<std::size_t>(n);
    }
  }

  // false = clean EOF before any byte; partial data then EOF throws
  bool recv_all(void* data, std::size_t len) const {
    char* p = static_cast<char*>(data);
    std::size_t got = 0;
    while (got < len) {
      const ssize_t n = ::recv(fd_, p + got, len - got, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        if (got == 0) return false;
        throw ProtocolError("connection closed mid-frame");
      }
      got += static_cast<std::size_t>(n);
    }
    return true;
  }

 private:
  int fd_ = -1;
};

inline Socket listen_on(std::uint16_t port, std::uint16_t* bound_port = nullptr) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ProtocolError(std::string("socket: ") + std::strerror(errno));
  Socket s(fd);
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
    throw ProtocolError(std::string("bind: ") + std::strerror(errno));
  if (::listen(fd, 16) < 0) throw ProtocolError(std::string("listen: ") + std::strerror(errno));
  if (bound_port) {
    sockaddr_in got{};
    socklen_t len = sizeof(got);
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&got), &len) < 0)
      throw ProtocolError(std::string("getsockname: ") + std::strerror(errno));
    *bound_port = ntohs(got.sin_port);
  }
  return s;
}

inline Socket accept_one(const Socket& listener) {
  while (true) {
    const int fd = ::accept(listener.fd(), nullptr, nullptr);
    if (fd >= 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Socket(fd);
    }
    if (errno == EINTR) continue;
    throw ProtocolError(std::string("accept: ") + std::strerror(errno));
  }
}

inline Socket connect_to(const std::string& host, std::uint16_t port, int attempts = 20,
                         int backoff_ms = 100) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(port);
    if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0 || !res) {
      ::poll(nullptr, 0, backoff_ms);
      continue;
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Socket(fd);
    }
    if (fd >= 0) ::close(fd);
    ::freeaddrinfo(res);
    ::poll(nullptr, 0, backoff_ms);
  }
  throw ProtocolError("connect to " + host + ":" + std::to_string(port) + " failed");
}

// Framed message IO over a socket. Receiving returns false on clean EOF.
inline void send_message(const Socket& s, const Message& m) {
  const std::vector<std::uint8_t> frame = encode_frame(m);
  s.send_all(frame.data(), frame.size());
}

inline bool recv_message(const Socket& s, Message& out) {
  std::uint8_t header[kFrameHeaderBytes];
  if (!s.recv_all(header, sizeof(header))) return false;
  const FrameHeader h = parse_frame_header(header);
  std::vector<std::uint8_t> payload(static_cast<std::size_t>(h.payload_len));
  if (h.payload_len > 0 && !s.recv_all(payload.data(), payload.size()))
    throw ProtocolError("connection closed mid-frame");
  out = parse_payload(h.type, payload.data(), payload.size());
  return true;
}

}  // namespace cocoi
