#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>

#include <pthread.h>

#include "CLI11.hpp"
#include "spamfriction/client.hpp"
#include "spamfriction/config.hpp"
#include "spamfriction/pow.hpp"
#include "spamfriction/puzzle_store.hpp"
#include "spamfriction/simulator.hpp"
#include "spamfriction/sink.hpp"
#include "spamfriction/smtp_server.hpp"
#include "spamfriction/solver.hpp"

namespace sf = spamfriction;

namespace {

enum Exit : int {
  kOk = 0,
  kFailed = 1,
  kRefusedBurden = 2,
  kRejected = 3,
  kTransport = 4,
  kUsage = 64,
  kConfig = 78,
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ServeArgs {
  std::string config;
  bool dump = false;
};

int serve(const ServeArgs& args) {
  sf::config::AppConfig cfg;
  try {
    if (!args.config.empty()) cfg = sf::config::load_app_config(args.config);
  } catch (const sf::config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }
  if (args.dump) {
    std::cout << sf::config::dump_app_config(cfg);
    return kOk;
  }

  std::unique_ptr<sf::protocol::MailboxSink> sink;
  try {
    sink = std::make_unique<sf::protocol::MailboxSink>(cfg.sink_dir);
  } catch (const std::exception& e) {
    std::cerr << "startup refused: " << e.what() << "\n";
    return kConfig;
  }

  if (cfg.policy.mode == sf::policy::ResistanceMode::SingleLevel && !cfg.policy.base_difficulty) {
    const auto cal = sf::pow::calibrate(std::chrono::duration<double>(cfg.burden_seconds), std::chrono::seconds(1));
    cfg.policy.base_difficulty = cal.difficulty;
    std::cerr << "calibrated difficulty=" << cal.difficulty << " hash_rate=" << cal.hashes_per_second << "\n";
  }

  // Signals are taken synchronously by sigwait below, so every thread must
  // inherit the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  sf::classifier::ConfiguredScorer scorer(cfg.scorer);
  const std::uint64_t seed = cfg.seed ? *cfg.seed : std::random_device{}();
  sf::policy::PolicyEngine policy(cfg.policy, seed);
  sf::pow::PuzzleStore store(cfg.store_capacity);
  sf::SystemClock clock;
  sf::protocol::HostRegistry hosts;
  std::mutex log_mu;
  sf::protocol::ServerContext ctx{cfg.server, scorer, policy, store, sf::pow::system_entropy(), clock, *sink, hosts,
                                  [&](const sf::protocol::DecisionRecord& r) {
                                    std::lock_guard lock(log_mu);
                                    std::cout << sf::protocol::format_decision(r) << std::endl;
                                  }};

  std::unique_ptr<sf::protocol::SmtpServer> server;
  try {
    server = std::make_unique<sf::protocol::SmtpServer>(ctx, sf::net::parse_endpoint(cfg.listen));
  } catch (const std::exception& e) {
    std::cerr << "cannot listen on " << cfg.listen << ": " << e.what() << "\n";
    return kFailed;
  }
  server->start();
  std::cerr << "listening port=" << server->port() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "stopping on signal " << sig << std::endl;
  server->stop();
  return kOk;
}

struct SendArgs {
  std::string server;
  std::string from;
  std::vector<std::string> to;
  std::string body;
  double budget = 60.0;
  double hash_rate = 0.0;
  std::string helo = "localhost";
  unsigned threads = 0;
  double timeout = 30.0;
};

int send(const SendArgs& args) {
  sf::protocol::OutgoingMessage msg;
  sf::protocol::ClientOptions opts;
  sf::net::Endpoint endpoint;
  try {
    endpoint = sf::net::parse_endpoint(args.server);
    msg.body = read_file(args.body);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
  msg.from = args.from;
  msg.recipients = args.to;
  opts.helo = args.helo;
  opts.budget_seconds = args.budget;
  opts.solver_threads = args.threads;
  opts.hashes_per_second =
      args.hash_rate > 0.0 ? args.hash_rate : sf::pow::measure_hash_rate(std::chrono::milliseconds(200), 0, true);

  sf::protocol::SendResult result;
  try {
    auto stream = sf::net::TcpStream::connect(endpoint, std::chrono::seconds(10));
    sf::protocol::TcpLineStream line_stream(std::move(stream), sf::from_seconds(args.timeout));
    result = sf::protocol::client_send(line_stream, msg, opts);
  } catch (const sf::net::NetError& e) {
    result = sf::protocol::TransportFailure{e.what()};
  }

  return std::visit(
      [](const auto& r) -> int {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, sf::protocol::Delivered>) {
          std::cout << "delivered: " << r.reply << "\n";
          if (r.receipt) std::cout << "receipt: " << *r.receipt << "\n";
          return kOk;
        } else if constexpr (std::is_same_v<T, sf::protocol::RefusedBurden>) {
          std::printf("not sent: message judged too spammy; server demands difficulty %u, about %.3g s of work\n",
                      r.difficulty, r.estimated_seconds);
          return kRefusedBurden;
        } else if constexpr (std::is_same_v<T, sf::protocol::Rejected>) {
          std::cout << "rejected " << r.code << ": " << r.reply << "\n";
          return kRejected;
        } else {
          std::cerr << "transport failure: " << r.what << "\n";
          return kTransport;
        }
      },
      result);
}

struct SolveArgs {
  std::string puzzle;
  std::uint64_t start = 0;
  std::uint64_t max_attempts = std::numeric_limits<std::uint64_t>::max();
  unsigned threads = 0;
};

int solve(const SolveArgs& args) {
  sf::pow::Puzzle puzzle;
  try {
    puzzle = sf::pow::parse_puzzle(args.puzzle);
  } catch (const sf::pow::WireFormatError& e) {
    std::cerr << "bad puzzle: " << e.what() << "\n";
    return kUsage;
  }
  if (!sf::pow::is_supported(puzzle.algorithm)) {
    std::cerr << "unsupported algorithm " << puzzle.algorithm << "\n";
    return kUsage;
  }
  auto s = args.threads == 1 ? sf::pow::solve(puzzle, args.start, args.max_attempts)
                             : sf::pow::solve_parallel(puzzle, args.start, args.max_attempts, args.threads);
  if (!s) {
    std::cerr << "no solution within " << args.max_attempts << " attempts\n";
    return kFailed;
  }
  std::cout << sf::pow::format_receipt(s->receipt) << "\n";
  std::cerr << "attempts=" << s->attempts << "\n";
  return kOk;
}

int verify(const std::string& text) {
  sf::pow::Receipt receipt;
  try {
    receipt = sf::pow::parse_receipt(text);
  } catch (const sf::pow::WireFormatError& e) {
    std::cerr << "bad receipt: " << e.what() << "\n";
    return kUsage;
  }
  // Offline check: the hash only. Expiry and single use need the issuing store.
  if (sf::pow::verify_hash(receipt.puzzle, receipt.solution)) {
    std::cout << "accepted (offline verification)\n";
    return kOk;
  }
  std::cout << "rejected (offline verification)\n";
  return kFailed;
}

int calibrate(double target, double bench, unsigned alg) {
  try {
    auto c = sf::pow::calibrate(std::chrono::duration<double>(target), std::chrono::duration<double>(bench), alg);
    std::printf("difficulty=%u hash_rate=%.0f\n", c.difficulty, c.hashes_per_second);
    return kOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
}

struct SimulateArgs {
  std::string preset;
  std::string config;
  std::string csv;
  bool serial = false;
};

int simulate(const SimulateArgs& args) {
  sf::config::SimulationFile file;
  try {
    if (!args.preset.empty())
      file.config = sf::sim::preset(args.preset);
    else
      file = sf::config::load_simulation(args.config);
  } catch (const sf::config::EmptyGridError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const sf::config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }

  std::vector<sf::sim::SimReport> reports;
  if (file.grid) {
    for (auto& row : sf::sim::sweep(*file.grid)) {
      std::printf("accuracy=%g burden=%gs analytic ham=%.4gs spam=%.4gs ratio=%.4g\n", row.accuracy,
                  row.report.burden_seconds, row.analytic.ham_avg_seconds, row.analytic.spam_avg_seconds,
                  row.analytic.advantage_ratio);
      reports.push_back(std::move(row.report));
    }
    std::cout << "\n";
  } else {
    reports.push_back(args.serial ? sf::sim::run_serial(file.config) : sf::sim::run(file.config));
  }
  sf::sim::print_table(std::cout, reports);

  if (args.csv == "-") {
    sf::sim::write_csv(std::cout, reports);
  } else if (!args.csv.empty()) {
    std::ofstream out(args.csv);
    if (!out) {
      std::cerr << "cannot write " << args.csv << "\n";
      return kFailed;
    }
    sf::sim::write_csv(out, reports);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Targeted-cost proof-of-work for SMTP"};
  app.require_subcommand(1);
  int rc = kOk;

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the receiving SMTP server");
  serve_cmd->add_option("--config", serve_args.config, "JSON configuration file");
  serve_cmd->add_flag("--dump-effective-config", serve_args.dump, "Print the merged configuration and exit");
  serve_cmd->callback([&] { rc = serve(serve_args); });

  SendArgs send_args;
  auto* send_cmd = app.add_subcommand("send", "Deliver one message, paying any demanded proof of work");
  send_cmd->add_option("--server", send_args.server, "host:port")->required();
  send_cmd->add_option("--from", send_args.from, "Envelope sender")->required();
  send_cmd->add_option("--to", send_args.to, "Recipient (repeatable)")->required();
  send_cmd->add_option("--body", send_args.body, "File holding the message")->required();
  send_cmd->add_option("--budget", send_args.budget, "Seconds of work the sender will spend")
      ->check(CLI::NonNegativeNumber);
  send_cmd->add_option("--hash-rate", send_args.hash_rate, "Hashes per second for the estimate (default: measure)");
  send_cmd->add_option("--helo", send_args.helo, "EHLO name");
  send_cmd->add_option("--threads", send_args.threads, "Solver threads (0: all)");
  send_cmd->add_option("--timeout", send_args.timeout, "Per-reply timeout in seconds")->check(CLI::PositiveNumber);
  send_cmd->callback([&] { rc = send(send_args); });

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "Solve a puzzle and print the receipt");
  solve_cmd->add_option("puzzle", solve_args.puzzle, "alg:difficulty:nonce")->required();
  solve_cmd->add_option("--start", solve_args.start, "First counter to try");
  solve_cmd->add_option("--max-attempts", solve_args.max_attempts, "Give up after this many hashes");
  solve_cmd->add_option("--threads", solve_args.threads, "1: serial solver, 0: all cores");
  solve_cmd->callback([&] { rc = solve(solve_args); });

  std::string receipt;
  auto* verify_cmd = app.add_subcommand("verify", "Check a receipt's hash offline (no expiry or replay check)");
  verify_cmd->add_option("receipt", receipt, "alg:difficulty:nonce:solution")->required();
  verify_cmd->callback([&] { rc = verify(receipt); });

  double target = 0.0, bench = 1.0;
  unsigned alg = 0;
  auto* cal_cmd = app.add_subcommand("calibrate", "Pick the difficulty that costs this host the target time");
  cal_cmd->add_option("--target-seconds", target, "Target solve time")->required()->check(CLI::PositiveNumber);
  cal_cmd->add_option("--bench-seconds", bench, "Benchmark duration");
  cal_cmd->add_option("--alg", alg, "Algorithm id")->check(CLI::Range(0u, 2u));
  cal_cmd->callback([&] { rc = calibrate(target, bench, alg); });

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the sender-economics simulation");
  auto* preset = sim_cmd->add_option("--preset", sim_args.preset, "paper-999 or paper-20")
                     ->check(CLI::IsMember(sf::sim::preset_names()));
  auto* file = sim_cmd->add_option("--config", sim_args.config, "JSON simulation file");
  preset->excludes(file);
  sim_cmd->add_option("--csv", sim_args.csv, "Also write CSV to this file ('-' for stdout)");
  sim_cmd->add_flag("--serial", sim_args.serial, "Use the single-threaded reference");
  sim_cmd->callback([&] {
    if (sim_args.preset.empty() && sim_args.config.empty()) throw CLI::RequiredError("--preset or --config");
    rc = simulate(sim_args);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return rc;
}
