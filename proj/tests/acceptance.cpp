// Acceptance harness: one PASS/FAIL line per criterion. `--only N` runs one.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "spamfriction/policy.hpp"
#include "spamfriction/pow.hpp"
#include "spamfriction/simulator.hpp"
#include "spamfriction/smtp_server.hpp"
#include "spamfriction/solver.hpp"
#include "support.hpp"

namespace sf = spamfriction;
using testing::Driver;
using testing::ServerRig;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [out of range]");
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Verdict economics_high_accuracy() {
  Verdict v;
  const auto t0 = Clock::now();
  const auto r = sf::sim::run(sf::sim::preset("paper-999"));
  const double elapsed = seconds_since(t0);
  v.check(std::fabs(r.ham_avg_cost - 3.6) <= 0.1, fmt("ham avg cost %.4f s (3.6 +/- 0.1)", r.ham_avg_cost));
  v.check(r.advantage_ratio >= 950 && r.advantage_ratio <= 1000, fmt("ratio %.2f in [950, 1000]", r.advantage_ratio));
  v.check(elapsed < 10.0, fmt("runtime %.2f s < 10", elapsed));
  return v;
}

Verdict throughput_limits() {
  Verdict v;
  const auto r = sf::sim::run(sf::sim::preset("paper-999"));
  const double spam = r.find("spam")->delivered_per_machine_day();
  const double ham = r.find("ham")->delivered_per_machine_day();
  v.check(spam >= 24 && spam <= 25, fmt("spam %.4f msg/machine/day in [24, 25]", spam));
  v.check(ham >= 23500 && ham <= 24000, fmt("ham %.2f msg/machine/day in [23500, 24000]", ham));
  const std::uint64_t bots = r.find("spam")->population;
  v.check(bots == 10000 && std::fabs(r.spam_per_day / 240000.0 - 1.0) <= 0.02,
          fmt("%.0f bots send %.0f spam/day within 2%% of 240000", double(bots), r.spam_per_day) +
              fmt(" (x%g = %.4g)", r.scale_factor, r.scaled_spam_per_day()));
  return v;
}

Verdict economics_low_accuracy() {
  Verdict v;
  const auto r = sf::sim::run(sf::sim::preset("paper-20"));
  v.check(r.advantage_ratio >= 18.5 && r.advantage_ratio <= 19.5, fmt("ratio %.3f in [18.5, 19.5]", r.advantage_ratio));
  const double analytic = sf::policy::expected_costs(0.05, 0.05, 3600).advantage_ratio;
  v.check(analytic == 19.0, fmt("analytic ratio %.17g == 19", analytic));
  return v;
}

Verdict solver_statistics() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  constexpr int kTrials = 200;
  for (unsigned d : {6u, 8u, 10u}) {
    double total = 0;
    for (int i = 0; i < kTrials; ++i) {
      sf::pow::Puzzle p{0, d, std::to_string(rng()), {}, {}};
      total += static_cast<double>(sf::pow::solve(p, 0, ~0ull)->attempts);
    }
    const double mean = total / kTrials;
    const double prob = std::ldexp(1.0, -static_cast<int>(d));
    const double se = std::sqrt(1.0 - prob) / prob / std::sqrt(double(kTrials));
    const double expect = std::ldexp(1.0, static_cast<int>(d));
    v.check(std::fabs(mean - expect) <= 3 * se,
            "d=" + std::to_string(d) + fmt(" mean %.1f vs %.0f", mean, expect) + fmt(" (3 SE = %.1f)", 3 * se));
  }
  const double elapsed = seconds_since(t0);
  v.check(elapsed < 30.0, fmt("runtime %.2f s < 30", elapsed));
  return v;
}

Verdict golden_transcript() {
  Verdict v;
  sf::protocol::ServerOptions opts;
  opts.hostname = "receiving-mail.com";
  opts.advertise_auth_starttls = true;
  auto pc = ServerRig::single_level(21);
  pc.jitter_bits = 0;
  ServerRig rig(pc, 1.0, opts);
  Driver d(rig.ctx, "10.1.2.3");

  // Client lines and expected replies; "PUZZLE" and "ID" are templated.
  const std::vector<std::pair<std::string, std::vector<std::string>>> script = {
      {"", {"250 ESMTP Server Ready"}},
      {"EHLO sending-mail.com",
       {"250-receiving-mail.com Hello sending-mail.com [10.1.2.3]", "250-SIZE 52428800", "250-AUTH PLAIN LOGIN",
        "250-STARTTLS", "250-SPAMFRICTION ALG0, ALG1, ALG2", "250 HELP"}},
      {"POW ISUPPORT ALG0, ALG1, ALG4", {"250 OK"}},
      {"MAIL FROM: sender@sending-mail.com", {"250 OK"}},
      {"RCPT TO: receiver@receiving-mail.com", {"250 Accepted"}},
      {"DATA", {"354 Enter message, ending with \".\" on a line by itself"}},
      {"Spam, spam, eggs and spam", {}},
      {".", {"211 POW Required (SPAM) PUZZLE"}},
      {"POW RECEIPT RECEIPT", {"250 OK id=ID"}},
  };
  const std::regex puzzle_re("211 POW Required \\(SPAM\\) (0:21:[0-9]{18})");
  const std::regex id_re("250 OK id=[0-9A-Za-z]{6}-[0-9]{6}-[0-9A-Za-z]{2}");

  std::string puzzle;
  int mismatches = 0;
  for (const auto& [client, expected] : script) {
    std::vector<std::string> got;
    if (client.empty()) {
      got = d.open();
    } else if (client == "POW RECEIPT RECEIPT") {
      const auto p = sf::pow::parse_puzzle(puzzle);
      const auto s = sf::pow::solve_parallel(p, 0, ~0ull, 0);
      got = d.send("POW RECEIPT " + sf::pow::format_receipt(s->receipt));
    } else {
      got = d.send(client);
    }
    bool same = got.size() == expected.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      std::smatch m;
      if (expected[i] == "211 POW Required (SPAM) PUZZLE") {
        same = std::regex_match(got[i], m, puzzle_re);
        if (same) puzzle = m[1];
      } else if (expected[i] == "250 OK id=ID") {
        same = std::regex_match(got[i], id_re);
      } else {
        same = got[i] == expected[i];
      }
    }
    if (!same) {
      ++mismatches;
      std::fprintf(stderr, "transcript mismatch after '%s':\n", client.c_str());
      for (const auto& g : got) std::fprintf(stderr, "  got: %s\n", g.c_str());
      for (const auto& e : expected) std::fprintf(stderr, "  want: %s\n", e.c_str());
    }
  }
  v.check(mismatches == 0, std::to_string(script.size()) + " exchanges, " + std::to_string(mismatches) + " mismatched");
  v.check(rig.sink.size() == 1 && rig.sink.messages()[0].difficulty == 21, "message stored at difficulty 21");
  return v;
}

Verdict loopback() {
  Verdict v;
  sf::classifier::FixedScorer scorer(0.9);
  sf::policy::PolicyEngine policy(ServerRig::single_level(12), 1);
  sf::pow::PuzzleStore store(1000);
  sf::SystemClock clock;
  sf::protocol::MemorySink sink;
  sf::protocol::HostRegistry hosts;
  sf::protocol::ServerContext ctx{{}, scorer, policy, store, sf::pow::system_entropy(), clock, sink, hosts, {}};
  sf::protocol::SmtpServer server(ctx, {"127.0.0.1", 0});
  server.start();
  auto connect = [&] {
    return sf::protocol::TcpLineStream(sf::net::TcpStream::connect({"127.0.0.1", server.port()}, std::chrono::seconds(2)),
                                       std::chrono::seconds(5));
  };

  const auto t0 = Clock::now();
  auto first = connect();
  const auto r = sf::protocol::client_send(first, {"a@client.example", {"b@server.example"}, "buy now"}, {});
  const double elapsed = seconds_since(t0);
  const auto* ok = std::get_if<sf::protocol::Delivered>(&r);
  v.check(ok && ok->difficulty == 12 && ok->receipt, "delivered at difficulty 12");
  v.check(elapsed < 5.0, fmt("in %.3f s < 5", elapsed));
  if (!ok || !ok->receipt) return v;

  auto second = connect();
  for (const char* line : {"EHLO client.example", "POW ISUPPORT ALG0", "MAIL FROM:<a@client.example>",
                           "RCPT TO:<b@server.example>", "DATA", "buy again", "."})
    second.write_line(line);
  std::optional<sf::protocol::ServerReply> reply;
  do reply = sf::protocol::read_reply(second);
  while (reply && reply->code != 211);
  second.write_line("POW RECEIPT " + *ok->receipt);
  reply = sf::protocol::read_reply(second);
  v.check(reply && reply->code == 554, "replayed receipt answered " + (reply ? reply->last() : std::string("nothing")));
  v.check(sink.size() == 1, "one message stored");
  return v;
}

Verdict sin_bin() {
  Verdict v;
  auto pc = ServerRig::single_level(12);
  pc.sinbin = {3, std::chrono::seconds(3600), std::chrono::hours(4)};
  ServerRig rig(pc);
  const std::string blocked = "421 localhost Host temporarily blocked for refusing delivery burdens";

  for (int i = 0; i < 3; ++i) {
    Driver d(rig.ctx, "10.1.2.3");
    d.submit();
    d.send("QUIT");
    rig.clock.advance(std::chrono::minutes(10));
  }
  const sf::TimePoint until = rig.clock.now() - std::chrono::minutes(10) + std::chrono::hours(4);
  {
    Driver d(rig.ctx, "10.1.2.3");
    v.check(d.submit() == std::vector<std::string>{blocked}, "fourth connection gets 421");
  }
  rig.clock.sleep_until(until - std::chrono::seconds(1));
  {
    Driver d(rig.ctx, "10.1.2.3");
    v.check(d.submit() == std::vector<std::string>{blocked}, "still 421 one second before T");
  }
  rig.clock.sleep_until(until);
  {
    Driver d(rig.ctx, "10.1.2.3");
    v.check(d.submit()[0].rfind("211 ", 0) == 0, "challenged again once T elapses");
  }

  ServerRig other(pc);
  auto refuse = [&] {
    Driver d(other.ctx, "10.5.5.5");
    d.submit();
    d.send("QUIT");
  };
  refuse();
  refuse();
  {
    Driver d(other.ctx, "10.5.5.5");
    const auto line = d.submit()[0];
    const auto p = sf::pow::parse_puzzle(testing::puzzle_of(line));
    d.send("POW RECEIPT " + sf::pow::format_receipt(sf::pow::solve(p, 0, ~0ull)->receipt));
  }
  refuse();
  Driver d(other.ctx, "10.5.5.5");
  v.check(d.submit()[0].rfind("211 ", 0) == 0, "refuse, refuse, succeed, refuse is not blocked");
  return v;
}

Verdict legacy() {
  Verdict v;
  ServerRig rig;
  const sf::TimePoint t0 = rig.clock.now();
  auto link = rig.connect();
  sf::protocol::ClientOptions opts;
  opts.algorithms.clear();
  const auto r = sf::protocol::client_send(*link, {"a@legacy.example", {"b@server.example"}, "hi"}, opts);
  const auto waited = rig.clock.now() - t0;
  v.check(std::holds_alternative<sf::protocol::Delivered>(r), "legacy client delivered");
  v.check(waited == std::chrono::seconds(30), fmt("reply withheld %.3f s (exactly 30)", sf::to_seconds(waited)));

  Driver held(rig.ctx, "10.1.2.3");
  held.submit(false);
  Driver second(rig.ctx, "10.1.2.3");
  const auto reply = second.open();
  v.check(reply.size() == 1 && reply[0].rfind("421 ", 0) == 0 && second.last().close,
          "second connection during the delay: " + (reply.empty() ? std::string("nothing") : reply[0]));
  return v;
}

Verdict properties() {
  Verdict v;
  std::mt19937_64 rng(9);

  int bad = 0;
  for (int i = 0; i < 5000; ++i) {
    sf::pow::Puzzle p;
    p.algorithm = static_cast<unsigned>(rng() % 1000);
    p.difficulty = static_cast<unsigned>(rng() % 65);
    const std::size_t len = 1 + rng() % 64;
    for (std::size_t k = 0; k < len; ++k) p.nonce.push_back(static_cast<char>('0' + rng() % 10));
    const sf::pow::Receipt r{p, std::to_string(rng())};
    const std::string wire = sf::pow::format_receipt(r);
    if (sf::pow::format_receipt(sf::pow::parse_receipt(wire)) != wire) ++bad;
  }
  v.check(bad == 0, "wire round-trip 5000 cases");

  sf::pow::PuzzleStore store(64);
  std::vector<sf::pow::Receipt> issued;
  std::map<std::string, int> accepts;
  sf::TimePoint now{};
  bool expired_accept = false;
  for (int step = 0; step < 5000; ++step) {
    now += std::chrono::milliseconds(rng() % 2000);
    if (issued.empty() || rng() % 3 == 0) {
      try {
        auto p = sf::pow::generate_challenge(0, 0, std::chrono::seconds(1 + rng() % 30), testing::seeded_entropy(rng()),
                                             now, store);
        issued.push_back({p, "0"});
      } catch (const sf::pow::IssuanceError&) {
      }
    } else {
      const auto& r = issued[rng() % issued.size()];
      if (store.verify(r, now) == sf::pow::VerifyOutcome::Accepted) {
        ++accepts[r.puzzle.nonce];
        expired_accept = expired_accept || now >= r.puzzle.expires_at;
      }
    }
  }
  bool single = !accepts.empty() && !expired_accept;
  for (const auto& [nonce, n] : accepts) single = single && n == 1;
  v.check(single, "single-use nonces over 5000 random steps");

  sf::policy::PolicyConfig wl;
  wl.base_difficulty = 30;
  wl.jitter_bits = 3;
  wl.whitelist = {"*@friends.example", "mx?.partner.net"};
  sf::policy::SinBin sinbin;
  bool never = true;
  for (int i = 0; i < 2000; ++i) {
    const sf::classifier::SpamScore s(std::uniform_real_distribution<double>(0, 1)(rng));
    never = never && sf::policy::decide(s, "mx7.partner.net", "x@y", wl, sinbin, rng, now).kind() ==
                         sf::policy::ResistanceDecision::Kind::Accept;
    never = never && sf::policy::decide(s, "h", "Z@FRIENDS.example", wl, sinbin, rng, now).kind() ==
                         sf::policy::ResistanceDecision::Kind::Accept;
  }
  v.check(never, "whitelisted senders never resisted");

  bool monotone = true;
  for (int trial = 0; trial < 200; ++trial) {
    sf::policy::PolicyConfig c;
    c.mode = sf::policy::ResistanceMode::Graduated;
    c.resist_threshold = std::uniform_real_distribution<double>(0, 0.5)(rng);
    const int n = 1 + static_cast<int>(rng() % 6);
    double bound = 0;
    unsigned d = static_cast<unsigned>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      bound = i + 1 == n ? 1.0 : std::uniform_real_distribution<double>(bound + 1e-6, bound + (1 - bound) / 2)(rng);
      d = std::min(64u, d + static_cast<unsigned>(rng() % 5));
      c.graduated_buckets.push_back({bound, d});
    }
    unsigned prev = 0;
    for (int i = 0; i <= 1000; ++i) {
      const unsigned now_d = sf::policy::base_difficulty_for(sf::classifier::SpamScore(i / 1000.0), c);
      const bool resisted = i / 1000.0 >= c.resist_threshold;
      const unsigned eff = resisted ? now_d : 0;
      monotone = monotone && eff >= prev;
      prev = eff;
    }
  }
  v.check(monotone, "graduated difficulty monotone over 200 random bucket sets");

  bool deterministic = true;
  for (std::uint64_t seed : {1u, 7u, 12345u}) {
    sf::sim::SimConfig c;
    c.cohorts = {{"ham", 2000, sf::sim::Intent::Ham, std::nullopt}, {"spam", 300, sf::sim::Intent::Spam, 500}};
    c.false_positive_rate = 0.01;
    c.false_negative_rate = 0.02;
    c.speed_min = 0.5;
    c.speed_max = 1.5;
    c.seed = seed;
    const auto a = sf::sim::run(c);
    deterministic = deterministic && a == sf::sim::run(c) && a == sf::sim::run_serial(c);
  }
  v.check(deterministic, "simulator reports identical per seed, parallel and serial");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"economics at 99.9% accuracy", economics_high_accuracy},
      {"daily throughput limits", throughput_limits},
      {"economics at 95% accuracy", economics_low_accuracy},
      {"solver attempt statistics", solver_statistics},
      {"protocol golden transcript", golden_transcript},
      {"TCP loopback delivery and replay", loopback},
      {"sin bin", sin_bin},
      {"legacy sender handling", legacy},
      {"property suites", properties},
  };

  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "usage: acceptance [--only 1..%zu]\n", criteria.size());
    return 64;
  }

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<int>(i) + 1 != only) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu %s: %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                v.detail.c_str());
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
