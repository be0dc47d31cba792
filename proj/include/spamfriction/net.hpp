#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace spamfriction::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string to_string() const { return host + ':' + std::to_string(port); }
};

// "host:port"; throws std::invalid_argument on malformed input.
Endpoint parse_endpoint(std::string_view text);

// Owning socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void close();
  void shutdown_both();

 private:
  int fd_ = -1;
};

// Connected TCP stream with buffered reads.
class TcpStream {
 public:
  explicit TcpStream(Socket socket, std::string peer = {});

  static TcpStream connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

  void write_all(std::string_view data);
  // Next LF-terminated line with the terminator (and any CR before it)
  // removed. nullopt on timeout or orderly close before a full line.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);
  // Exactly n bytes, or nullopt on timeout/close.
  std::optional<std::string> read_exact(std::size_t n, std::chrono::milliseconds timeout);

  bool closed() const { return eof_; }
  const std::string& peer() const { return peer_; }
  void shutdown() { socket_.shutdown_both(); }

 private:
  bool fill(std::chrono::milliseconds timeout);

  Socket socket_;
  std::string peer_;
  std::string buffer_;
  bool eof_ = false;
};

class TcpListener {
 public:
  // Port 0 binds an ephemeral port; see port().
  static TcpListener bind(const Endpoint& endpoint);

  // nullopt when no connection arrived within the timeout.
  std::optional<TcpStream> accept(std::chrono::milliseconds timeout);
  std::uint16_t port() const { return port_; }
  void close() { socket_.close(); }

 private:
  Socket socket_;
  std::uint16_t port_ = 0;
};

}  // namespace spamfriction::net
