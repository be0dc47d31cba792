#include "spamfriction/client.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "spamfriction/solver.hpp"

namespace spamfriction::protocol {

void TcpLineStream::write_line(std::string_view line) {
  std::string out(line);
  out += "\r\n";
  stream_.write_all(out);
}

std::optional<std::string> TcpLineStream::read_line() { return stream_.read_line(timeout_); }

SessionLoopback::SessionLoopback(ServerContext& ctx, std::string peer) : ctx_(ctx), session_(ctx, std::move(peer)) {
  absorb(session_.open());
}

void SessionLoopback::absorb(Response r) {
  while (true) {
    for (auto& line : r.lines) {
      transcript_.push_back("S: " + line);
      pending_.push_back(std::move(line));
    }
    if (r.close) closed_ = true;
    if (!r.hold_until) return;
    ctx_.clock.sleep_until(*r.hold_until);
    r = session_.resume();
  }
}

void SessionLoopback::write_line(std::string_view line) {
  if (closed_) throw net::NetError("connection closed by server");
  transcript_.push_back("C: " + std::string(line));
  absorb(session_.handle_line(line));
}

std::optional<std::string> SessionLoopback::read_line() {
  if (pending_.empty()) return std::nullopt;
  std::string line = std::move(pending_.front());
  pending_.pop_front();
  return line;
}

std::optional<ServerReply> read_reply(LineStream& stream) {
  ServerReply reply;
  while (true) {
    auto line = stream.read_line();
    if (!line) return std::nullopt;
    if (line->size() < 3) return std::nullopt;
    int code = 0;
    auto [ptr, ec] = std::from_chars(line->data(), line->data() + 3, code);
    if (ec != std::errc{} || ptr != line->data() + 3) return std::nullopt;
    reply.code = code;
    reply.lines.push_back(*line);
    if (line->size() == 3 || (*line)[3] != '-') return reply;
  }
}

double estimate_solve_seconds(unsigned difficulty, double hashes_per_second) {
  if (!(hashes_per_second > 0.0)) return std::numeric_limits<double>::infinity();
  return std::ldexp(1.0, static_cast<int>(difficulty)) / hashes_per_second;
}

namespace {

struct TransportError {
  std::string what;
};

class Conversation {
 public:
  explicit Conversation(LineStream& s) : s_(s) {}

  ServerReply expect_reply() {
    auto r = read_reply(s_);
    if (!r) throw TransportError{"connection lost or malformed reply"};
    return *r;
  }

  ServerReply command(const std::string& line) {
    send(line);
    return expect_reply();
  }

  void send(std::string_view line) {
    try {
      s_.write_line(line);
    } catch (const net::NetError& e) {
      throw TransportError{e.what()};
    }
  }

  // Best effort; the server may already have closed.
  void quit() {
    try {
      s_.write_line("QUIT");
      read_reply(s_);
    } catch (const std::exception&) {
    }
  }

 private:
  LineStream& s_;
};

std::vector<unsigned> advertised_algorithms(const ServerReply& ehlo) {
  std::vector<unsigned> out;
  for (std::size_t i = 1; i < ehlo.lines.size(); ++i) {
    std::string_view text(ehlo.lines[i]);
    text.remove_prefix(std::min<std::size_t>(4, text.size()));
    constexpr std::string_view kKeyword = "SPAMFRICTION";
    if (text.substr(0, kKeyword.size()) != kKeyword) continue;
    std::string token;
    std::istringstream in{std::string(text.substr(kKeyword.size()))};
    while (in >> token) {
      while (!token.empty() && token.back() == ',') token.pop_back();
      if (token.size() <= 3 || token.compare(0, 3, "ALG") != 0) continue;
      unsigned id = 0;
      auto [ptr, ec] = std::from_chars(token.data() + 3, token.data() + token.size(), id);
      if (ec == std::errc{} && ptr == token.data() + token.size()) out.push_back(id);
    }
  }
  return out;
}

std::string isupport_line(const std::vector<unsigned>& algs) {
  std::string line = "POW ISUPPORT ";
  for (std::size_t i = 0; i < algs.size(); ++i) {
    if (i) line += ", ";
    line += "ALG" + std::to_string(algs[i]);
  }
  return line;
}

bool positive(const ServerReply& r) { return r.code >= 200 && r.code < 300; }

Rejected rejected(const ServerReply& r) { return Rejected{r.code, r.last()}; }

SendResult run(Conversation& c, const OutgoingMessage& message, const ClientOptions& options) {
  auto greeting = c.expect_reply();
  if (!positive(greeting)) return rejected(greeting);

  auto ehlo = c.command("EHLO " + options.helo);
  bool pow = false;
  if (positive(ehlo)) {
    const auto offered = advertised_algorithms(ehlo);
    const bool common = std::any_of(offered.begin(), offered.end(), [&](unsigned a) {
      return std::find(options.algorithms.begin(), options.algorithms.end(), a) != options.algorithms.end();
    });
    if (common) {
      auto r = c.command(isupport_line(options.algorithms));
      pow = positive(r);
    }
  } else {
    auto helo = c.command("HELO " + options.helo);
    if (!positive(helo)) return rejected(helo);
  }

  auto mail = c.command("MAIL FROM:<" + message.from + ">");
  if (!positive(mail)) {
    c.quit();
    return rejected(mail);
  }
  bool any_rcpt = false;
  ServerReply last_rcpt;
  for (const auto& rcpt : message.recipients) {
    last_rcpt = c.command("RCPT TO:<" + rcpt + ">");
    any_rcpt = any_rcpt || positive(last_rcpt);
  }
  if (!any_rcpt) {
    c.quit();
    return rejected(last_rcpt);
  }
  auto data = c.command("DATA");
  if (data.code != 354) {
    c.quit();
    return rejected(data);
  }

  std::size_t pos = 0;
  const std::string& body = message.body;
  while (pos < body.size()) {
    auto eol = body.find('\n', pos);
    std::string line = body.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '.') line.insert(0, ".");
    c.send(line);
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  auto reply = c.command(".");

  std::optional<std::string> receipt_wire;
  unsigned difficulty = 0;
  while (reply.code == 211) {
    const std::string& line = reply.last();
    pow::Puzzle puzzle;
    try {
      puzzle = pow::parse_puzzle(line.substr(line.rfind(' ') + 1));
    } catch (const pow::WireFormatError&) {
      c.quit();
      return rejected(reply);
    }
    difficulty = puzzle.difficulty;
    const bool can_solve = pow && std::find(options.algorithms.begin(), options.algorithms.end(), puzzle.algorithm) !=
                                      options.algorithms.end();
    const double estimate = estimate_solve_seconds(puzzle.difficulty, options.hashes_per_second);
    if (!can_solve || estimate > options.budget_seconds) {
      c.quit();
      return RefusedBurden{puzzle.difficulty, estimate};
    }
    // 32x the expected work fails with probability e^-32.
    const double cap = std::ldexp(32.0, static_cast<int>(puzzle.difficulty));
    const auto attempt_cap = cap >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(cap);
    auto solution = pow::solve_parallel(puzzle, 0, attempt_cap, options.solver_threads);
    if (!solution) {
      c.quit();
      return RefusedBurden{puzzle.difficulty, estimate};
    }
    receipt_wire = pow::format_receipt(solution->receipt);
    reply = c.command("POW RECEIPT " + *receipt_wire);
  }

  if (!positive(reply)) {
    if (reply.code != 421) c.quit();
    return rejected(reply);
  }
  c.quit();
  return Delivered{reply.last(), receipt_wire, difficulty};
}

}  // namespace

SendResult client_send(LineStream& server, const OutgoingMessage& message, const ClientOptions& options) {
  if (message.recipients.empty()) return Rejected{0, "no recipients"};
  Conversation c(server);
  try {
    return run(c, message, options);
  } catch (const TransportError& e) {
    return TransportFailure{e.what};
  }
}

}  // namespace spamfriction::protocol
