#include "settlekit/chat_client.hpp"

#include <array>
#include <cstdio>
#include <thread>

#include "settlekit/digest.hpp"
#include "settlekit/text.hpp"

namespace settlekit::chat {

ChatClient::ChatClient(ClientLimits limits) : limits_(limits) {
  if (limits_.max_in_flight == 0) limits_.max_in_flight = 1;
  if (limits_.max_retries < 0) limits_.max_retries = 0;
}

std::size_t ChatClient::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_;
}

std::size_t ChatClient::attempts() const {
  std::lock_guard lock(mu_);
  return attempts_;
}

std::string ChatClient::send(const std::string& system, const std::vector<Message>& messages, double temperature,
                             std::optional<std::uint64_t> seed) {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw ChatError("temperature must lie in [0, 2], got " + std::to_string(temperature));
  }
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limits_.max_in_flight; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
  }
  struct Release {
    ChatClient& c;
    ~Release() {
      {
        std::lock_guard lock(c.mu_);
        --c.in_flight_;
      }
      c.cv_.notify_one();
    }
  } release{*this};

  std::string last_error;
  for (int attempt = 0; attempt <= limits_.max_retries; ++attempt) {
    {
      std::lock_guard lock(mu_);
      ++attempts_;
    }
    try {
      return send_once(system, messages, temperature, seed);
    } catch (const TransientChatError& e) {
      last_error = e.what();
      if (attempt < limits_.max_retries && limits_.backoff.count() > 0) {
        std::this_thread::sleep_for(limits_.backoff * (1 << attempt));
      }
    }
  }
  throw ChatError("chat request failed after " + std::to_string(limits_.max_retries + 1) +
                  " attempts: " + last_error);
}

namespace {

constexpr std::array<std::string_view, 24> kVocab{
    "生态", "韧性", "雨水花园", "滨水空间", "公共空间", "社区", "绿色基础设施", "可持续",
    "规划", "设计策略", "场地", "居民", "渗透性铺装", "生物多样性", "步行", "更新",
    "resilience", "stormwater", "public realm", "green corridor", "site analysis", "density",
    "mixed use", "landscape"};

constexpr std::array<std::string_view, 6> kDimensionLabels{"Relevance", "Comprehensiveness", "Utility",
                                                           "Expertise", "Originality", "Depth"};

std::string digest_of(const std::string& system, const std::vector<Message>& messages,
                      std::optional<std::uint64_t> seed) {
  Sha256 h;
  h.update(system).update(std::string_view("\x1f", 1));
  for (const auto& m : messages) {
    h.update(m.role).update(std::string_view("\x1e", 1)).update(m.content).update(std::string_view("\x1f", 1));
  }
  h.update(seed ? std::to_string(*seed) : std::string("-"));
  return h.hex_digest();
}

// Byte stream expanded from a hex digest by re-hashing.
class DigestStream {
 public:
  explicit DigestStream(std::string seed_hex) : block_(std::move(seed_hex)) {}
  unsigned next() {
    if (pos_ + 2 > block_.size()) {
      block_ = sha256_hex(block_);
      pos_ = 0;
    }
    const unsigned v = static_cast<unsigned>(std::stoul(block_.substr(pos_, 2), nullptr, 16));
    pos_ += 2;
    return v;
  }

 private:
  std::string block_;
  std::size_t pos_ = 0;
};

}  // namespace

MockChatClient::MockChatClient(ClientLimits limits, std::string model)
    : ChatClient(limits), model_(std::move(model)) {}

std::string MockChatClient::reply_for(const std::string& system, const std::vector<Message>& messages,
                                      std::optional<std::uint64_t> seed) {
  DigestStream stream(digest_of(system, messages, seed));
  if (system.find(kScoreFormatMarker) != std::string::npos) {
    std::string out;
    for (auto label : kDimensionLabels) {
      const unsigned hi = stream.next();
      const unsigned v = (hi << 8 | stream.next()) % 501;  // 0..500
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s: %u.%02u\n", std::string(label).c_str(), 5 + v / 100, v % 100);
      out += buf;
    }
    return out;
  }
  std::string last_user;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == "user") {
      last_user = it->content;
      break;
    }
  }
  std::string out = text::truncate_codepoints(text::collapse_whitespace(last_user), 160);
  if (!out.empty()) out += " ";
  out += "[";
  const unsigned words = 8 + stream.next() % 9;
  for (unsigned i = 0; i < words; ++i) {
    if (i > 0) out += ' ';
    out += kVocab[stream.next() % kVocab.size()];
  }
  out += "]。";
  return out;
}

std::string MockChatClient::send_once(const std::string& system, const std::vector<Message>& messages,
                                      double temperature, std::optional<std::uint64_t> seed) {
  {
    std::lock_guard lock(calls_mu_);
    calls_.push_back(RecordedCall{system, messages, temperature, seed});
  }
  return reply_for(system, messages, seed);
}

std::vector<RecordedCall> MockChatClient::calls() const {
  std::lock_guard lock(calls_mu_);
  return calls_;
}

void MockChatClient::clear_calls() {
  std::lock_guard lock(calls_mu_);
  calls_.clear();
}

}  // namespace settlekit::chat
