#include "spamfriction/server_session.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ctime>
#include <sstream>
#include <stdexcept>

namespace spamfriction::protocol {

namespace {

using Kind = policy::ResistanceDecision::Kind;

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && upper(s.substr(0, prefix.size())) == prefix;
}

// "FROM: a@b", "FROM:<a@b> SIZE=10" -> "a@b". nullopt if malformed.
std::optional<std::string> path_argument(std::string_view args, std::string_view keyword) {
  args = trim(args);
  if (!starts_with_ci(args, keyword)) return std::nullopt;
  args = trim(args.substr(keyword.size()));
  if (!args.empty() && args.front() == '<') {
    auto close = args.find('>');
    if (close == std::string_view::npos) return std::nullopt;
    return std::string(args.substr(1, close - 1));
  }
  auto end = args.find(' ');
  return std::string(args.substr(0, end));
}

// "ALG0, ALG1, ALG4" -> {0, 1, 4}.
std::optional<std::vector<unsigned>> parse_algorithm_list(std::string_view text) {
  std::vector<unsigned> out;
  std::string token;
  std::istringstream in{std::string(text)};
  while (in >> token) {
    while (!token.empty() && token.back() == ',') token.pop_back();
    if (token.empty()) continue;
    if (!starts_with_ci(token, "ALG") || token.size() == 3) return std::nullopt;
    unsigned id = 0;
    auto [ptr, ec] = std::from_chars(token.data() + 3, token.data() + token.size(), id);
    if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
    out.push_back(id);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::string algorithm_list(const std::vector<unsigned>& algs) {
  std::string out;
  for (unsigned a : algs) {
    if (!out.empty()) out += ", ";
    out += "ALG" + std::to_string(a);
  }
  return out;
}

Response reply(std::string line, bool close = false) { return Response{{std::move(line)}, std::nullopt, close}; }

}  // namespace

const char* to_string(OverloadMode mode) {
  switch (mode) {
    case OverloadMode::RefuseConnections: return "refuse-connections";
    case OverloadMode::TempReject: return "temp-reject";
    case OverloadMode::EscalateDifficulty: return "escalate-difficulty";
  }
  return "?";
}

OverloadMode parse_overload_mode(std::string_view text) {
  if (text == "refuse-connections") return OverloadMode::RefuseConnections;
  if (text == "temp-reject") return OverloadMode::TempReject;
  if (text == "escalate-difficulty") return OverloadMode::EscalateDifficulty;
  throw std::invalid_argument("unknown overload mode '" + std::string(text) + "'");
}

void LegacyPolicy::validate() const {
  if (pre_accept_delay < Duration::zero()) throw std::invalid_argument("pre_accept_delay must not be negative");
  if (max_pending_per_host < 1) throw std::invalid_argument("max_pending_per_host must be at least 1");
}

void ServerOptions::validate() const {
  if (hostname.empty()) throw std::invalid_argument("hostname must not be empty");
  if (max_message_size == 0) throw std::invalid_argument("max_message_size must be positive");
  if (spamfriction && algorithms.empty()) throw std::invalid_argument("at least one POW algorithm is required");
  for (unsigned a : algorithms) {
    if (!pow::is_supported(a)) throw std::invalid_argument("unsupported POW algorithm " + std::to_string(a));
  }
  if (puzzle_ttl && *puzzle_ttl <= Duration::zero()) throw std::invalid_argument("puzzle ttl must be positive");
  if (!(reference_hash_rate > 0.0)) throw std::invalid_argument("reference_hash_rate must be positive");
  legacy.validate();
}

HostRegistry::Pending& HostRegistry::Pending::operator=(Pending&& other) noexcept {
  if (this != &other) {
    release();
    registry_ = std::exchange(other.registry_, nullptr);
    host_ = std::move(other.host_);
  }
  return *this;
}

void HostRegistry::Pending::release() {
  if (registry_) {
    registry_->drop(host_);
    registry_ = nullptr;
  }
}

HostRegistry::Pending HostRegistry::acquire(const std::string& host) {
  std::lock_guard lock(mu_);
  ++pending_[host];
  return Pending(this, host);
}

unsigned HostRegistry::pending(const std::string& host) const {
  std::lock_guard lock(mu_);
  auto it = pending_.find(host);
  return it == pending_.end() ? 0 : it->second;
}

void HostRegistry::drop(const std::string& host) {
  std::lock_guard lock(mu_);
  auto it = pending_.find(host);
  if (it != pending_.end() && --it->second == 0) pending_.erase(it);
}

std::string format_decision(const DecisionRecord& r) {
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(r.at.time_since_epoch()).count();
  const std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char ts[32];
  std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", &tm);
  char score[16];
  std::snprintf(score, sizeof score, "%.4f", r.score);

  std::string line = std::string("ts=") + ts + " peer=" + r.peer + " from=" + (r.mail_from.empty() ? "<>" : r.mail_from) +
                     " score=" + score + " decision=" + policy::to_string(r.decision) +
                     " difficulty=" + std::to_string(r.difficulty) + " outcome=" + r.outcome;
  if (!r.message_id.empty()) line += " id=" + r.message_id;
  if (!r.detail.empty()) line += " detail=" + r.detail;
  return line;
}

std::string make_message_id(TimePoint now, std::uint64_t seq, std::uint64_t random) {
  static constexpr char kDigits[] = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
  auto base62 = [](std::uint64_t v, int width) {
    std::string s(static_cast<std::size_t>(width), '0');
    for (int i = width - 1; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = kDigits[v % 62];
      v /= 62;
    }
    return s;
  };
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  char mid[8];
  std::snprintf(mid, sizeof mid, "%06llu", static_cast<unsigned long long>(seq % 1000000));
  return base62(static_cast<std::uint64_t>(secs), 6) + "-" + mid + "-" + base62(random, 2);
}

const char* to_string(ServerSession::State state) {
  switch (state) {
    case ServerSession::State::Greeted: return "Greeted";
    case ServerSession::State::Ready: return "Ready";
    case ServerSession::State::MailFrom: return "MailFrom";
    case ServerSession::State::RcptTo: return "RcptTo";
    case ServerSession::State::Data: return "Data";
    case ServerSession::State::Held: return "Held";
    case ServerSession::State::AwaitingReceipt: return "AwaitingReceipt";
    case ServerSession::State::Done: return "Done";
  }
  return "?";
}

ServerSession::ServerSession(ServerContext& ctx, std::string peer) : ctx_(ctx), peer_(std::move(peer)) {}

ServerSession::~ServerSession() { connection_lost(); }

bool ServerSession::over_pending_limit() const {
  return ctx_.hosts.pending(peer_) >= ctx_.options.legacy.max_pending_per_host;
}

Response ServerSession::open() {
  if (ctx_.options.legacy.overload_mode == OverloadMode::RefuseConnections && over_pending_limit()) {
    state_ = State::Done;
    return reply("421 " + ctx_.options.hostname + " Too many pending deliveries from your host", true);
  }
  return reply("250 " + ctx_.options.greeting);
}

Response ServerSession::handle_line(std::string_view line) {
  switch (state_) {
    case State::Done: return reply("421 " + ctx_.options.hostname + " Session closed", true);
    case State::Data: return data_line(line);
    case State::Held: return Response{{}, hold_until_, false};
    default: return command(line);
  }
}

Response ServerSession::command(std::string_view line) {
  line = trim(line);
  const auto space = line.find(' ');
  const std::string verb = upper(line.substr(0, space));
  const std::string_view args = space == std::string_view::npos ? std::string_view{} : trim(line.substr(space + 1));

  if (state_ == State::AwaitingReceipt) {
    if (verb == "POW" && starts_with_ci(args, "RECEIPT")) return receipt(trim(args.substr(7)));
    if (verb == "QUIT") return quit();
    if (verb == "NOOP") return reply("250 OK");
    if (verb == "RSET") {
      refuse("rset-during-challenge");
      reset_transaction();
      return reply("250 OK");
    }
    return reply("503 POW RECEIPT expected");
  }

  if (verb == "EHLO") return ehlo(args, true);
  if (verb == "HELO") return ehlo(args, false);
  if (verb == "QUIT") return quit();
  if (verb == "NOOP") return reply("250 OK");
  if (verb == "RSET") {
    reset_transaction();
    return reply("250 OK");
  }
  if (verb == "POW" && ctx_.options.spamfriction) {
    if (starts_with_ci(args, "ISUPPORT")) return isupport(trim(args.substr(8)));
    if (starts_with_ci(args, "RECEIPT")) return reply("503 No POW challenge outstanding");
    return reply("501 Unknown POW subcommand");
  }
  if (verb == "MAIL") return mail_from(args);
  if (verb == "RCPT") return rcpt_to(args);
  if (verb == "DATA") {
    if (state_ != State::RcptTo) return reply("503 Bad sequence of commands");
    state_ = State::Data;
    body_.clear();
    oversize_ = false;
    return reply("354 Enter message, ending with \".\" on a line by itself");
  }
  if (verb == "STARTTLS") return reply("454 TLS not available");
  if (verb == "AUTH" || verb == "VRFY" || verb == "EXPN") return reply("502 Command not implemented");
  if (verb == "HELP") return reply("214 SMTP with SPAMFRICTION; see POW ISUPPORT and POW RECEIPT");
  return reply("500 Unrecognized command");
}

Response ServerSession::ehlo(std::string_view domain, bool extended) {
  if (domain.empty()) return reply(std::string(extended ? "501 EHLO" : "501 HELO") + " requires a domain");
  reset_transaction();
  extended_ = extended;
  pow_negotiated_ = false;
  negotiated_.clear();
  state_ = State::Ready;

  const std::string hello = ctx_.options.hostname + " Hello " + std::string(domain) + " [" + peer_ + "]";
  if (!extended) return reply("250 " + hello);

  Response r;
  r.lines.push_back("250-" + hello);
  r.lines.push_back("250-SIZE " + std::to_string(ctx_.options.max_message_size));
  if (ctx_.options.advertise_auth_starttls) {
    r.lines.push_back("250-AUTH PLAIN LOGIN");
    r.lines.push_back("250-STARTTLS");
  }
  if (ctx_.options.spamfriction) r.lines.push_back("250-SPAMFRICTION " + algorithm_list(ctx_.options.algorithms));
  r.lines.push_back("250 HELP");
  return r;
}

Response ServerSession::isupport(std::string_view args) {
  if (state_ != State::Ready || !extended_) return reply("503 Bad sequence of commands");
  auto algs = parse_algorithm_list(args);
  if (!algs) return reply("501 Syntax: POW ISUPPORT ALG<n>[, ALG<n>...]");
  negotiated_.clear();
  for (unsigned a : ctx_.options.algorithms) {
    if (std::find(algs->begin(), algs->end(), a) != algs->end()) negotiated_.push_back(a);
  }
  std::sort(negotiated_.begin(), negotiated_.end());
  pow_negotiated_ = !negotiated_.empty();
  if (!pow_negotiated_) return reply("504 No common POW algorithm");
  return reply("250 OK");
}

Response ServerSession::mail_from(std::string_view args) {
  if (state_ != State::Ready) return reply("503 Bad sequence of commands");
  auto addr = path_argument(args, "FROM:");
  if (!addr) return reply("501 Syntax: MAIL FROM:<address>");
  if (ctx_.options.legacy.overload_mode == OverloadMode::TempReject && over_pending_limit())
    return reply("450 Too many pending deliveries from your host, try again later");
  envelope_ = Envelope{*addr, {}};
  state_ = State::MailFrom;
  return reply("250 OK");
}

Response ServerSession::rcpt_to(std::string_view args) {
  if (state_ != State::MailFrom && state_ != State::RcptTo) return reply("503 Bad sequence of commands");
  auto addr = path_argument(args, "TO:");
  if (!addr || addr->empty()) return reply("501 Syntax: RCPT TO:<address>");
  envelope_.recipients.push_back(*addr);
  state_ = State::RcptTo;
  return reply("250 Accepted");
}

Response ServerSession::data_line(std::string_view line) {
  if (line == ".") return end_of_data();
  if (!line.empty() && line.front() == '.') line.remove_prefix(1);
  if (oversize_) return {};
  if (body_.size() + line.size() + 2 > ctx_.options.max_message_size) {
    oversize_ = true;
    body_.clear();
    return {};
  }
  body_.append(line);
  body_.append("\r\n");
  return {};
}

Response ServerSession::end_of_data() {
  if (oversize_) {
    reset_transaction();
    return reply("552 Message size exceeds fixed maximum message size");
  }

  classifier::ScoreResult scored;
  try {
    scored = ctx_.scorer.score(body_);
  } catch (const std::length_error&) {
    reset_transaction();
    return reply("552 Message size exceeds fixed maximum message size");
  }
  score_ = scored.score.value();
  const TimePoint now = ctx_.clock.now();
  decision_ = ctx_.policy.decide(scored.score, peer_, envelope_.mail_from, now);

  if (decision_.kind() == Kind::Blocked) {
    log("blocked", scored.degraded ? "sinbin,scorer-degraded" : "sinbin");
    reset_transaction();
    state_ = State::Done;
    return reply("421 " + ctx_.options.hostname + " Host temporarily blocked for refusing delivery burdens", true);
  }

  if (!ctx_.options.spamfriction) return deliver_now(0);

  if (!pow_negotiated_) {
    if (policy::is_whitelisted(ctx_.policy.config(), peer_, envelope_.mail_from)) return deliver_now(0, "whitelisted");
    Duration delay = ctx_.options.legacy.pre_accept_delay;
    if (ctx_.options.legacy.overload_mode == OverloadMode::EscalateDifficulty)
      delay *= 1 + ctx_.hosts.pending(peer_);
    pending_ = ctx_.hosts.acquire(peer_);
    hold_until_ = now + delay;
    state_ = State::Held;
    return Response{{}, hold_until_, false};
  }

  if (decision_.kind() == Kind::Accept) return deliver_now(0);

  unsigned difficulty = decision_.difficulty();
  if (ctx_.options.legacy.overload_mode == OverloadMode::EscalateDifficulty)
    difficulty = std::min(pow::kMaxDifficulty, difficulty + ctx_.hosts.pending(peer_));
  return issue_challenge(difficulty);
}

Response ServerSession::issue_challenge(unsigned difficulty) {
  const TimePoint now = ctx_.clock.now();
  const Duration ttl = ctx_.options.puzzle_ttl.value_or(pow::default_ttl(difficulty, ctx_.options.reference_hash_rate));
  try {
    puzzle_ = pow::generate_challenge(negotiated_.front(), difficulty, ttl, ctx_.entropy, now, ctx_.store);
  } catch (const pow::IssuanceError&) {
    log("rejected", "puzzle-store-full");
    reset_transaction();
    return reply("451 Server busy, try again later");
  }
  if (!pending_.active()) pending_ = ctx_.hosts.acquire(peer_);
  state_ = State::AwaitingReceipt;
  return reply("211 POW Required (SPAM) " + pow::format_puzzle(*puzzle_));
}

Response ServerSession::receipt(std::string_view wire) {
  pow::Receipt r;
  try {
    r = pow::parse_receipt(wire);
  } catch (const pow::WireFormatError&) {
    return reply("501 Malformed POW receipt");
  }
  if (!puzzle_ || !puzzle_->same_challenge(r.puzzle)) {
    refuse("receipt-for-other-puzzle");
    reset_transaction();
    return reply("554 POW verification failed");
  }

  const auto outcome = ctx_.store.verify(r, ctx_.clock.now());
  if (outcome == pow::VerifyOutcome::Accepted) return deliver_now(puzzle_->difficulty);

  if (outcome == pow::VerifyOutcome::Expired && !reissued_) {
    reissued_ = true;
    ctx_.store.revoke(puzzle_->nonce);
    return issue_challenge(puzzle_->difficulty);
  }
  refuse(pow::to_string(outcome));
  reset_transaction();
  return reply("554 POW verification failed");
}

Response ServerSession::deliver_now(unsigned difficulty, const std::string& detail) {
  const TimePoint now = ctx_.clock.now();
  DeliveredMessage m;
  m.id = make_message_id(now, ctx_.message_seq.fetch_add(1) + 1, ctx_.entropy());
  m.peer = peer_;
  m.envelope = envelope_;
  m.body = body_;
  m.score = score_;
  m.difficulty = difficulty;
  try {
    ctx_.sink.deliver(m);
  } catch (const std::exception&) {
    log("rejected", "sink-failure");
    reset_transaction();
    return reply("451 Local error in processing");
  }
  ctx_.policy.sinbin().record_success(peer_);
  log("delivered", detail, m.id);
  // A consumed puzzle stays in the store so replays are recognised.
  puzzle_.reset();
  reset_transaction();
  return reply("250 OK id=" + m.id);
}

Response ServerSession::resume() {
  if (state_ != State::Held) return {};
  if (ctx_.clock.now() < hold_until_) return Response{{}, hold_until_, false};
  return deliver_now(0, "legacy-delay");
}

Response ServerSession::quit() {
  if (state_ == State::AwaitingReceipt) {
    refuse("quit-during-challenge");
    reset_transaction();
  }
  state_ = State::Done;
  return reply("221 " + ctx_.options.hostname + " closing connection", true);
}

void ServerSession::connection_lost() {
  if (state_ == State::AwaitingReceipt) {
    refuse("disconnect-during-challenge");
    reset_transaction();
  }
  if (state_ == State::Held) log("rejected", "disconnect-during-hold");
  pending_.release();
  state_ = State::Done;
}

void ServerSession::refuse(const std::string& detail) {
  ctx_.policy.sinbin().record_refusal(peer_, ctx_.clock.now());
  log("refused", detail);
}

void ServerSession::log(const std::string& outcome, const std::string& detail, const std::string& id) {
  if (!ctx_.log) return;
  DecisionRecord r;
  r.at = ctx_.clock.now();
  r.peer = peer_;
  r.mail_from = envelope_.mail_from;
  r.score = score_;
  r.decision = decision_.kind();
  r.difficulty = puzzle_ ? puzzle_->difficulty : decision_.difficulty();
  r.outcome = outcome;
  r.detail = detail;
  r.message_id = id;
  ctx_.log(r);
}

void ServerSession::reset_transaction() {
  if (puzzle_) ctx_.store.revoke(puzzle_->nonce);
  puzzle_.reset();
  reissued_ = false;
  pending_.release();
  envelope_ = {};
  body_.clear();
  oversize_ = false;
  if (state_ != State::Greeted && state_ != State::Done) state_ = State::Ready;
}

}  // namespace spamfriction::protocol
