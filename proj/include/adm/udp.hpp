#pragma once

// Minimal POSIX UDP socket for the socket-mode edge/fog path.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adm/error.hpp"

namespace adm {

class UdpSocket {
 public:
  UdpSocket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
    if (fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  }
  ~UdpSocket() {
    if (fd_ >= 0) ::close(fd_);
  }
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;
  UdpSocket(UdpSocket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  UdpSocket& operator=(UdpSocket&& o) noexcept {
    std::swap(fd_, o.fd_);
    return *this;
  }

  // Port 0 picks an ephemeral port; see local_port().
  void bind(const std::string& host, std::uint16_t port) {
    auto addr = make_address(host, port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw Error("bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
  }

  std::uint16_t local_port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
      throw Error(std::string("getsockname: ") + std::strerror(errno));
    return ntohs(addr.sin_port);
  }

  void send_to(std::span<const std::uint8_t> bytes, const std::string& host, std::uint16_t port) {
    auto addr = make_address(host, port);
    auto n = ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (n < 0 || static_cast<std::size_t>(n) != bytes.size())
      throw Error(std::string("sendto: ") + std::strerror(errno));
  }

  // nullopt on timeout. Negative timeout blocks.
  std::optional<std::vector<std::uint8_t>> receive(int timeout_ms) {
    pollfd p{fd_, POLLIN, 0};
    int r = ::poll(&p, 1, timeout_ms);
    if (r < 0) {
      if (errno == EINTR) return std::nullopt;
      throw Error(std::string("poll: ") + std::strerror(errno));
    }
    if (r == 0) return std::nullopt;
    std::vector<std::uint8_t> buf(65536);
    auto n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0) throw Error(std::string("recv: ") + std::strerror(errno));
    buf.resize(static_cast<std::size_t>(n));
    return buf;
  }

 private:
  static sockaddr_in make_address(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw ConfigError("invalid IPv4 address '" + host + "'");
    return addr;
  }

  int fd_;
};

}  // namespace adm
