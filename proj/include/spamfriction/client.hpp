#pragma once

#include <chrono>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spamfriction/clock.hpp"
#include "spamfriction/net.hpp"
#include "spamfriction/server_session.hpp"

namespace spamfriction::protocol {

// Line-oriented duplex channel. Lines are passed without CRLF.
class LineStream {
 public:
  virtual ~LineStream() = default;
  // Throws net::NetError when the peer is gone.
  virtual void write_line(std::string_view line) = 0;
  // nullopt on timeout or end of stream.
  virtual std::optional<std::string> read_line() = 0;
};

class TcpLineStream final : public LineStream {
 public:
  TcpLineStream(net::TcpStream stream, std::chrono::milliseconds timeout)
      : stream_(std::move(stream)), timeout_(timeout) {}

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line() override;
  net::TcpStream& stream() { return stream_; }

 private:
  net::TcpStream stream_;
  std::chrono::milliseconds timeout_;
};

// Drives a ServerSession in-process. Held replies are released by sleeping
// the given clock, so a VirtualClock makes legacy delays instantaneous.
class SessionLoopback final : public LineStream {
 public:
  SessionLoopback(ServerContext& ctx, std::string peer);

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line() override;

  ServerSession& session() { return session_; }
  bool closed() const { return closed_; }
  // Every line in both directions, prefixed "C: " or "S: ".
  const std::vector<std::string>& transcript() const { return transcript_; }

 private:
  void absorb(Response r);

  ServerContext& ctx_;
  ServerSession session_;
  std::deque<std::string> pending_;
  std::vector<std::string> transcript_;
  bool closed_ = false;
};

struct OutgoingMessage {
  std::string from;
  std::vector<std::string> recipients;
  std::string body;  // LF or CRLF line endings
};

struct ClientOptions {
  std::string helo = "localhost";
  std::vector<unsigned> algorithms = {0, 1, 2};  // empty: behave as a legacy client
  double budget_seconds = 60.0;                  // work the sender will spend per message
  double hashes_per_second = 1 << 20;            // for the cost estimate
  int solver_threads = 0;
};

struct Delivered {
  std::string reply;
  std::optional<std::string> receipt;  // receipt wire form if work was done
  unsigned difficulty = 0;
};

struct RefusedBurden {
  unsigned difficulty = 0;
  double estimated_seconds = 0.0;
};

struct Rejected {
  int code = 0;
  std::string reply;
};

struct TransportFailure {
  std::string what;
};

using SendResult = std::variant<Delivered, RefusedBurden, Rejected, TransportFailure>;

// Expected seconds to solve a puzzle of this difficulty: 2^d / rate.
double estimate_solve_seconds(unsigned difficulty, double hashes_per_second);

// One SMTP delivery. Announces POW ISUPPORT when the server advertises
// SPAMFRICTION with a shared algorithm, answers a 211 challenge when the
// estimated work fits the budget, and otherwise quits with RefusedBurden.
SendResult client_send(LineStream& server, const OutgoingMessage& message, const ClientOptions& options);

// Fills in the reply lines of one (possibly multi-line) SMTP response.
struct ServerReply {
  int code = 0;
  std::vector<std::string> lines;
  std::string last() const { return lines.empty() ? std::string{} : lines.back(); }
};
std::optional<ServerReply> read_reply(LineStream& stream);

}  // namespace spamfriction::protocol
