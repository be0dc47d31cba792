#include "spamfriction/smtp_server.hpp"

namespace spamfriction::protocol {

namespace {

constexpr auto kPoll = std::chrono::milliseconds(200);

void send_lines(net::TcpStream& stream, const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\r\n";
  if (!out.empty()) stream.write_all(out);
}

}  // namespace

SmtpServer::SmtpServer(ServerContext& ctx, const net::Endpoint& listen, std::chrono::milliseconds idle_timeout)
    : ctx_(ctx), listener_(net::TcpListener::bind(listen)), port_(listener_.port()), idle_timeout_(idle_timeout) {}

SmtpServer::~SmtpServer() { stop(); }

void SmtpServer::start() {
  acceptor_ = std::thread([this] { run(); });
}

void SmtpServer::run() {
  while (!stopping_) {
    std::optional<net::TcpStream> conn;
    try {
      conn = listener_.accept(kPoll);
    } catch (const net::NetError&) {
      if (stopping_) break;
      continue;
    }
    reap();
    if (!conn) continue;
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(workers_mu_);
    workers_.emplace_back(std::thread([this, s = std::move(*conn), done]() mutable {
                            serve_connection(std::move(s));
                            *done = true;
                          }),
                          done);
  }
}

void SmtpServer::reap() {
  std::lock_guard lock(workers_mu_);
  for (auto it = workers_.begin(); it != workers_.end();) {
    if (*it->second) {
      it->first.join();
      it = workers_.erase(it);
    } else {
      ++it;
    }
  }
}

void SmtpServer::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  std::lock_guard lock(workers_mu_);
  for (auto& [t, done] : workers_) {
    if (t.joinable()) t.join();
  }
  workers_.clear();
}

void SmtpServer::serve_connection(net::TcpStream stream) {
  ServerSession session(ctx_, stream.peer());
  try {
    Response r = session.open();
    auto idle_since = std::chrono::steady_clock::now();
    while (true) {
      send_lines(stream, r.lines);
      if (r.close) break;
      if (r.hold_until) {
        ctx_.clock.sleep_until(*r.hold_until);
        r = session.resume();
        continue;
      }
      std::optional<std::string> line;
      while (!line && !stopping_) {
        line = stream.read_line(kPoll);
        if (stream.closed()) break;
        if (!line && std::chrono::steady_clock::now() - idle_since > idle_timeout_) break;
      }
      if (!line) {
        if (!stream.closed() && !stopping_) send_lines(stream, {"421 " + ctx_.options.hostname + " Idle timeout"});
        break;
      }
      idle_since = std::chrono::steady_clock::now();
      r = session.handle_line(*line);
    }
  } catch (const net::NetError&) {
  }
  session.connection_lost();
  stream.shutdown();
}

}  // namespace spamfriction::protocol
