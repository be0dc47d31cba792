#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spamfriction/classifier.hpp"
#include "spamfriction/clock.hpp"
#include "spamfriction/policy.hpp"
#include "spamfriction/puzzle_store.hpp"
#include "spamfriction/sink.hpp"

namespace spamfriction::protocol {

// What a receiving server does with more traffic from a host that already
// has a delivery pending (awaiting a receipt, or held by the legacy delay).
enum class OverloadMode {
  RefuseConnections,   // new connections get 421 and are closed
  TempReject,          // MAIL FROM gets 450
  EscalateDifficulty,  // admitted; resistance grows with the pending count
};

const char* to_string(OverloadMode mode);
OverloadMode parse_overload_mode(std::string_view text);

struct LegacyPolicy {
  Duration pre_accept_delay = std::chrono::seconds(30);
  unsigned max_pending_per_host = 1;
  OverloadMode overload_mode = OverloadMode::RefuseConnections;

  void validate() const;
};

struct ServerOptions {
  std::string hostname = "localhost";
  std::string greeting = "ESMTP Server Ready";
  std::size_t max_message_size = classifier::kDefaultMaxBody;
  bool advertise_auth_starttls = false;
  bool spamfriction = true;
  std::vector<unsigned> algorithms = {0, 1, 2};
  std::optional<Duration> puzzle_ttl;  // unset: pow::default_ttl()
  double reference_hash_rate = 1 << 20;
  LegacyPolicy legacy;

  void validate() const;
};

// Per-host count of sessions with a delivery pending. Shared by all sessions.
class HostRegistry {
 public:
  class Pending {
   public:
    Pending() = default;
    Pending(HostRegistry* registry, std::string host) : registry_(registry), host_(std::move(host)) {}
    Pending(Pending&& other) noexcept : registry_(std::exchange(other.registry_, nullptr)), host_(std::move(other.host_)) {}
    Pending& operator=(Pending&& other) noexcept;
    ~Pending() { release(); }
    void release();
    bool active() const { return registry_ != nullptr; }

   private:
    HostRegistry* registry_ = nullptr;
    std::string host_;
  };

  Pending acquire(const std::string& host);
  unsigned pending(const std::string& host) const;

 private:
  void drop(const std::string& host);

  mutable std::mutex mu_;
  std::unordered_map<std::string, unsigned> pending_;
};

struct DecisionRecord {
  TimePoint at{};
  std::string peer;
  std::string mail_from;
  double score = 0.0;
  policy::ResistanceDecision::Kind decision = policy::ResistanceDecision::Kind::Accept;
  unsigned difficulty = 0;
  std::string outcome;  // delivered | refused | blocked | rejected
  std::string detail;
  std::string message_id;
};

// ts=... peer=... from=... score=... decision=... difficulty=... outcome=...
std::string format_decision(const DecisionRecord& record);

using DecisionLog = std::function<void(const DecisionRecord&)>;

// Shared dependencies for every session of one server.
struct ServerContext {
  ServerOptions options;
  classifier::Scorer& scorer;
  policy::PolicyEngine& policy;
  pow::PuzzleStore& store;
  pow::EntropySource entropy;
  Clock& clock;
  MessageSink& sink;
  HostRegistry& hosts;
  DecisionLog log;
  std::atomic<std::uint64_t> message_seq{0};
};

// Exim-style id: 6 base62 time chars, a 6-digit sequence, 2 random chars.
std::string make_message_id(TimePoint now, std::uint64_t seq, std::uint64_t random);

struct Response {
  std::vector<std::string> lines;      // CRLF not included
  std::optional<TimePoint> hold_until;  // reply withheld; call resume() then
  bool close = false;
};

// One SMTP session with the SPAMFRICTION extension, driven line by line.
class ServerSession {
 public:
  enum class State { Greeted, Ready, MailFrom, RcptTo, Data, Held, AwaitingReceipt, Done };

  ServerSession(ServerContext& ctx, std::string peer);
  ~ServerSession();
  ServerSession(const ServerSession&) = delete;
  ServerSession& operator=(const ServerSession&) = delete;

  // Greeting, or a 421 refusal when the host is over its pending limit and
  // the overload mode refuses connections.
  Response open();
  Response handle_line(std::string_view line);
  // Releases a held end-of-data reply once the clock has reached the hold
  // time; before that it returns the hold again with no lines.
  Response resume();
  // The peer vanished. Abandoning a challenge counts as a refusal.
  void connection_lost();

  State state() const { return state_; }
  bool pow_negotiated() const { return pow_negotiated_; }
  const std::vector<unsigned>& negotiated_algorithms() const { return negotiated_; }
  const std::optional<pow::Puzzle>& outstanding_puzzle() const { return puzzle_; }
  const std::string& peer() const { return peer_; }

 private:
  Response command(std::string_view line);
  Response data_line(std::string_view line);
  Response end_of_data();
  Response receipt(std::string_view wire);
  Response ehlo(std::string_view domain, bool extended);
  Response isupport(std::string_view args);
  Response mail_from(std::string_view args);
  Response rcpt_to(std::string_view args);
  Response quit();

  Response issue_challenge(unsigned difficulty);
  Response deliver_now(unsigned difficulty, const std::string& detail = {});
  void refuse(const std::string& detail);
  void log(const std::string& outcome, const std::string& detail = {}, const std::string& id = {});
  void reset_transaction();
  bool over_pending_limit() const;

  ServerContext& ctx_;
  std::string peer_;
  State state_ = State::Greeted;
  bool extended_ = false;
  bool pow_negotiated_ = false;
  std::vector<unsigned> negotiated_;

  Envelope envelope_;
  std::string body_;
  bool oversize_ = false;
  double score_ = 0.0;
  policy::ResistanceDecision decision_ = policy::ResistanceDecision::accept();

  std::optional<pow::Puzzle> puzzle_;
  bool reissued_ = false;
  TimePoint hold_until_{};
  HostRegistry::Pending pending_;
};

const char* to_string(ServerSession::State state);

}  // namespace spamfriction::protocol
