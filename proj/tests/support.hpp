#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

#include "spamfriction/client.hpp"
#include "spamfriction/net.hpp"
#include "spamfriction/server_session.hpp"
#include "spamfriction/sink.hpp"

namespace testing {

namespace sf = spamfriction;

// Accepts connections on an ephemeral port and hands each to `handler` on
// the acceptor thread.
class StubServer {
 public:
  using Handler = std::function<void(sf::net::TcpStream&)>;

  explicit StubServer(Handler handler)
      : listener_(sf::net::TcpListener::bind({"127.0.0.1", 0})), handler_(std::move(handler)) {
    thread_ = std::thread([this] {
      while (!stop_) {
        auto conn = listener_.accept(std::chrono::milliseconds(50));
        if (!conn) continue;
        try {
          handler_(*conn);
        } catch (const std::exception&) {
        }
        ++served_;
      }
    });
  }
  ~StubServer() {
    stop_ = true;
    thread_.join();
  }

  std::string endpoint() const { return "127.0.0.1:" + std::to_string(listener_.port()); }
  int served() const { return served_; }

 private:
  sf::net::TcpListener listener_;
  Handler handler_;
  std::atomic<bool> stop_{false};
  std::atomic<int> served_{0};
  std::thread thread_;
};

inline sf::pow::EntropySource seeded_entropy(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng] { return (*rng)(); };
}

struct ServerRig {
  explicit ServerRig(sf::policy::PolicyConfig policy_config = single_level(12), double score = 0.9,
                     sf::protocol::ServerOptions opts = {})
      : scorer(score),
        policy(std::move(policy_config), 1),
        store(1000),
        clock(sf::at_seconds(1'000'000)),
        ctx{std::move(opts), scorer, policy, store, seeded_entropy(42), clock, sink, hosts,
            [this](const sf::protocol::DecisionRecord& r) {
              std::lock_guard lock(mu);
              records.push_back(r);
            }} {}

  static sf::policy::PolicyConfig single_level(unsigned d) {
    sf::policy::PolicyConfig c;
    c.base_difficulty = d;
    return c;
  }

  std::unique_ptr<sf::protocol::SessionLoopback> connect(const std::string& peer = "10.1.2.3") {
    return std::make_unique<sf::protocol::SessionLoopback>(ctx, peer);
  }

  sf::classifier::FixedScorer scorer;
  sf::policy::PolicyEngine policy;
  sf::pow::PuzzleStore store;
  sf::VirtualClock clock;
  sf::protocol::MemorySink sink;
  sf::protocol::HostRegistry hosts;
  sf::protocol::ServerContext ctx;
  std::mutex mu;
  std::vector<sf::protocol::DecisionRecord> records;
};

// Drives a ServerSession directly, collecting every reply line.
class Driver {
 public:
  Driver(sf::protocol::ServerContext& ctx, std::string peer) : session_(ctx, std::move(peer)) {}

  std::vector<std::string> open() { return take(session_.open()); }
  std::vector<std::string> send(std::string_view line) { return take(session_.handle_line(line)); }
  const sf::protocol::Response& last() const { return last_; }
  sf::protocol::ServerSession& session() { return session_; }

  std::string last_line() const { return last_.lines.empty() ? std::string{} : last_.lines.back(); }

  // Greets, negotiates ALG0 and submits a one-line message up to ".".
  std::vector<std::string> submit(bool negotiate = true, const std::string& body = "hello") {
    open();
    send("EHLO client.example");
    if (negotiate) send("POW ISUPPORT ALG0");
    send("MAIL FROM:<a@client.example>");
    send("RCPT TO:<b@server.example>");
    send("DATA");
    send(body);
    return send(".");
  }

 private:
  std::vector<std::string> take(sf::protocol::Response r) {
    last_ = std::move(r);
    return last_.lines;
  }

  sf::protocol::ServerSession session_;
  sf::protocol::Response last_;
};

inline std::string puzzle_of(const std::string& line) { return line.substr(line.rfind(' ') + 1); }

}  // namespace testing
