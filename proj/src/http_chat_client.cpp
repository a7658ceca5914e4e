#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "settlekit/chat_client.hpp"

namespace settlekit::chat {

HttpChatClient::HttpChatClient(EndpointConfig cfg)
    : ChatClient(ClientLimits{cfg.max_in_flight, cfg.max_retries, std::chrono::milliseconds(500)}),
      cfg_(std::move(cfg)) {
  if (cfg_.base_url.empty()) throw ChatError("no client configured: endpoint base_url is empty");
  if (cfg_.model.empty()) throw ChatError("endpoint model name is empty");
  const std::size_t scheme = cfg_.base_url.find("://");
  if (scheme == std::string::npos) throw ChatError("endpoint base_url lacks a scheme: " + cfg_.base_url);
  const std::size_t path = cfg_.base_url.find('/', scheme + 3);
  scheme_host_ = cfg_.base_url.substr(0, path);
  path_prefix_ = path == std::string::npos ? std::string() : cfg_.base_url.substr(path);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpChatClient::request_body(const std::string& model, const std::string& system,
                                         const std::vector<Message>& messages, double temperature,
                                         std::optional<std::uint64_t> seed) {
  nlohmann::ordered_json body;
  body["model"] = model;
  auto msgs = nlohmann::ordered_json::array();
  if (!system.empty()) msgs.push_back({{"role", "system"}, {"content", system}});
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(msgs);
  body["temperature"] = temperature;
  if (seed) body["seed"] = *seed;
  return body.dump();
}

std::string HttpChatClient::parse_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ChatError(std::string("malformed chat response: ") + e.what());
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ChatError("chat response lacks choices[0].message.content");
  }
}

std::string HttpChatClient::send_once(const std::string& system, const std::vector<Message>& messages,
                                      double temperature, std::optional<std::uint64_t> seed) {
  httplib::Client client(scheme_host_);
  const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
  const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                               request_body(cfg_.model, system, messages, temperature, seed), "application/json");
  if (!res) {
    throw TransientChatError("transport error: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientChatError("endpoint returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ChatError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  return parse_response(res->body);
}

}  // namespace settlekit::chat
