#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace spamfriction::protocol {

struct Envelope {
  std::string mail_from;
  std::vector<std::string> recipients;
};

struct DeliveredMessage {
  std::string id;
  std::string peer;
  Envelope envelope;
  std::string body;  // CRLF line endings, dot-unstuffed
  double score = 0.0;
  unsigned difficulty = 0;  // 0 when delivery was not resisted
};

class MessageSink {
 public:
  virtual ~MessageSink() = default;
  virtual void deliver(const DeliveredMessage& message) = 0;
};

class MemorySink final : public MessageSink {
 public:
  void deliver(const DeliveredMessage& message) override;
  std::vector<DeliveredMessage> messages() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<DeliveredMessage> messages_;
};

// Appends each message in mbox form to <dir>/<recipient>, one file per
// recipient. The constructor throws std::runtime_error if the directory
// cannot be created or written.
class MailboxSink final : public MessageSink {
 public:
  explicit MailboxSink(std::filesystem::path dir);
  void deliver(const DeliveredMessage& message) override;

  std::filesystem::path mailbox_path(const std::string& recipient) const;

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
};

}  // namespace spamfriction::protocol
