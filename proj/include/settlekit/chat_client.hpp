#pragma once

// Chat-completion transport. ChatClient::send() enforces the in-flight cap
// and the bounded retry policy; subclasses implement one attempt.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace settlekit::chat {

struct Message {
  std::string role;  // "user" | "assistant"
  std::string content;
};

class ChatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A failure worth retrying (timeouts, 429, 5xx).
class TransientChatError : public ChatError {
 public:
  using ChatError::ChatError;
};

struct ClientLimits {
  std::size_t max_in_flight = 4;
  int max_retries = 2;
  std::chrono::milliseconds backoff{0};
};

class ChatClient {
 public:
  explicit ChatClient(ClientLimits limits);
  virtual ~ChatClient() = default;
  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  /// Throws ChatError on invalid temperature or when every attempt failed.
  std::string send(const std::string& system, const std::vector<Message>& messages, double temperature,
                   std::optional<std::uint64_t> seed);

  virtual std::string model_name() const = 0;

  const ClientLimits& limits() const { return limits_; }
  std::size_t peak_in_flight() const;
  std::size_t attempts() const;

 protected:
  virtual std::string send_once(const std::string& system, const std::vector<Message>& messages,
                                double temperature, std::optional<std::uint64_t> seed) = 0;

 private:
  ClientLimits limits_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
  std::size_t attempts_ = 0;
};

/// Marker that switches the mock into judge mode: it then answers with one
/// "<Dimension>: <score>" line per evaluation dimension.
inline constexpr std::string_view kScoreFormatMarker = "#score-dimensions";

struct RecordedCall {
  std::string system;
  std::vector<Message> messages;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
};

/// Offline deterministic client. The reply is a stable hash expansion of
/// (system, messages, seed): it echoes the last user message and appends
/// pseudo-text chosen by the digest. Bit-identical for identical inputs.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(ClientLimits limits = {}, std::string model = "mock-chat");

  std::string model_name() const override { return model_; }

  std::vector<RecordedCall> calls() const;
  void clear_calls();

  /// The reply send_once() would produce, without recording.
  static std::string reply_for(const std::string& system, const std::vector<Message>& messages,
                               std::optional<std::uint64_t> seed);

 protected:
  std::string send_once(const std::string& system, const std::vector<Message>& messages, double temperature,
                        std::optional<std::uint64_t> seed) override;

 private:
  std::string model_;
  mutable std::mutex calls_mu_;
  std::vector<RecordedCall> calls_;
};

struct EndpointConfig {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string model;
  std::string api_key_env;  // name of the environment variable holding the key
  double timeout_seconds = 60.0;
  std::size_t max_in_flight = 4;
  int max_retries = 2;
};

/// Client for the de-facto chat-completions JSON schema:
/// POST {base_url}/chat/completions with {model, messages, temperature, seed}.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(EndpointConfig cfg);
  std::string model_name() const override { return cfg_.model; }

  /// Request body for one call; exposed for wire-format tests.
  static std::string request_body(const std::string& model, const std::string& system,
                                  const std::vector<Message>& messages, double temperature,
                                  std::optional<std::uint64_t> seed);
  /// choices[0].message.content of a response body.
  static std::string parse_response(const std::string& body);

 protected:
  std::string send_once(const std::string& system, const std::vector<Message>& messages, double temperature,
                        std::optional<std::uint64_t> seed) override;

 private:
  EndpointConfig cfg_;
  std::string scheme_host_;
  std::string path_prefix_;
};

}  // namespace settlekit::chat
