#include "spamfriction/sink.hpp"

#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace spamfriction::protocol {

void MemorySink::deliver(const DeliveredMessage& message) {
  std::lock_guard lock(mu_);
  messages_.push_back(message);
}

std::vector<DeliveredMessage> MemorySink::messages() const {
  std::lock_guard lock(mu_);
  return messages_;
}

std::size_t MemorySink::size() const {
  std::lock_guard lock(mu_);
  return messages_.size();
}

MailboxSink::MailboxSink(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw std::runtime_error("cannot create sink directory " + dir_.string() + ": " + ec.message());
  const auto probe = dir_ / ".write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw std::runtime_error("sink directory " + dir_.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

std::filesystem::path MailboxSink::mailbox_path(const std::string& recipient) const {
  std::string name;
  for (char ch : recipient) {
    const auto c = static_cast<unsigned char>(ch);
    name.push_back(std::isalnum(c) || ch == '@' || ch == '.' || ch == '-' || ch == '_' || ch == '+'
                       ? static_cast<char>(std::tolower(c))
                       : '_');
  }
  if (name.empty() || name == "." || name == "..") name = "_";
  return dir_ / name;
}

void MailboxSink::deliver(const DeliveredMessage& message) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char date[64];
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  std::strftime(date, sizeof date, "%a %b %e %H:%M:%S %Y", &tm);

  std::string entry = "From " + (message.envelope.mail_from.empty() ? "MAILER-DAEMON" : message.envelope.mail_from) +
                      " " + date + "\n";
  entry += "X-SpamFriction: id=" + message.id + " score=" + std::to_string(message.score) +
           " difficulty=" + std::to_string(message.difficulty) + " peer=" + message.peer + "\n";
  // mboxrd: quote From_ lines in the body.
  std::size_t pos = 0;
  const std::string& body = message.body;
  while (pos < body.size()) {
    auto eol = body.find('\n', pos);
    std::string line = body.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t gt = 0;
    while (gt < line.size() && line[gt] == '>') ++gt;
    if (line.compare(gt, 5, "From ") == 0) line.insert(0, ">");
    entry += line + "\n";
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  entry += "\n";

  std::lock_guard lock(mu_);
  for (const auto& rcpt : message.envelope.recipients) {
    std::ofstream out(mailbox_path(rcpt), std::ios::app | std::ios::binary);
    if (!out) throw std::runtime_error("cannot append to mailbox for " + rcpt);
    out << entry;
  }
}

}  // namespace spamfriction::protocol
