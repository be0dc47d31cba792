#pragma once

#include <atomic>
#include <chrono>
#include <list>
#include <mutex>
#include <thread>

#include "spamfriction/net.hpp"
#include "spamfriction/server_session.hpp"

namespace spamfriction::protocol {

// Accept loop plus one thread per connection, each driving a ServerSession
// over a TCP stream. Held replies sleep on the context clock.
class SmtpServer {
 public:
  SmtpServer(ServerContext& ctx, const net::Endpoint& listen,
             std::chrono::milliseconds idle_timeout = std::chrono::minutes(5));
  ~SmtpServer();
  SmtpServer(const SmtpServer&) = delete;
  SmtpServer& operator=(const SmtpServer&) = delete;

  std::uint16_t port() const { return port_; }
  void start();
  // Stops accepting and waits for open sessions to notice.
  void stop();
  // Blocks in the accept loop until stop() is called from elsewhere.
  void run();

 private:
  void serve_connection(net::TcpStream stream);
  void reap();

  ServerContext& ctx_;
  net::TcpListener listener_;
  std::uint16_t port_;
  std::chrono::milliseconds idle_timeout_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex workers_mu_;
  std::list<std::pair<std::thread, std::shared_ptr<std::atomic<bool>>>> workers_;
};

}  // namespace spamfriction::protocol
