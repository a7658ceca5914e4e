#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "settlekit/chat_client.hpp"
#include "settlekit/evalhsc.hpp"

using namespace settlekit;
using chat::Message;

namespace {

class ScriptedClient : public chat::ChatClient {
 public:
  using Fn = std::function<std::string(int attempt)>;
  ScriptedClient(chat::ClientLimits limits, Fn fn) : ChatClient(limits), fn_(std::move(fn)) {}
  std::string model_name() const override { return "scripted"; }

 protected:
  std::string send_once(const std::string&, const std::vector<Message>&, double, std::optional<std::uint64_t>) override {
    return fn_(calls_++);
  }

 private:
  Fn fn_;
  std::atomic<int> calls_{0};
};

}  // namespace

TEST_CASE("mock replies are a pure function of system, messages and seed") {
  chat::MockChatClient a, b;
  const std::vector<Message> msgs{{"user", "什么是海绵城市？"}};
  const std::string r1 = a.send("sys", msgs, 0.7, 7);
  CHECK(r1 == b.send("sys", msgs, 1.3, 7));  // temperature is not part of the key
  CHECK(r1 == chat::MockChatClient::reply_for("sys", msgs, 7));
  CHECK(r1 != a.send("sys", msgs, 0.7, 8));
  CHECK(r1 != a.send("other", msgs, 0.7, 7));
  CHECK(r1.rfind("什么是海绵城市？ [", 0) == 0);
  CHECK(r1.size() > std::string("什么是海绵城市？ []。").size());
  REQUIRE(a.calls().size() == 3);
  CHECK(a.calls()[0].seed == std::optional<std::uint64_t>(7));
  CHECK(a.calls()[0].messages[0].content == "什么是海绵城市？");
  a.clear_calls();
  CHECK(a.calls().empty());
}

TEST_CASE("mock judge mode emits six parseable dimension lines within range") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::string raw = chat::MockChatClient::reply_for(std::string("rubric ") + std::string(chat::kScoreFormatMarker),
                                                           {{"user", "q"}}, seed);
    const auto parsed = evalhsc::parse_judge_output("m", "i", raw);
    CHECK(parsed.clamp_log.empty());
    for (double s : parsed.card.scores) {
      CHECK(s >= 5.0);
      CHECK(s <= 10.0);
    }
  }
}

TEST_CASE("temperature outside [0, 2] is rejected before any attempt") {
  chat::MockChatClient c;
  CHECK_THROWS_AS(c.send("", {{"user", "x"}}, 2.5, 1), chat::ChatError);
  CHECK_THROWS_AS(c.send("", {{"user", "x"}}, -0.1, 1), chat::ChatError);
  CHECK(c.attempts() == 0);
  CHECK_NOTHROW(c.send("", {{"user", "x"}}, 0.0, 1));
  CHECK_NOTHROW(c.send("", {{"user", "x"}}, 2.0, 1));
}

TEST_CASE("transient failures are retried a bounded number of times") {
  ScriptedClient flaky({1, 2, {}}, [](int attempt) -> std::string {
    if (attempt < 2) throw chat::TransientChatError("503");
    return "ok";
  });
  CHECK(flaky.send("", {{"user", "x"}}, 0.5, {}) == "ok");
  CHECK(flaky.attempts() == 3);

  ScriptedClient dead({1, 2, {}}, [](int) -> std::string { throw chat::TransientChatError("timeout"); });
  CHECK_THROWS_WITH_AS(dead.send("", {{"user", "x"}}, 0.5, {}), doctest::Contains("after 3 attempts"), chat::ChatError);
  CHECK(dead.attempts() == 3);

  ScriptedClient permanent({1, 5, {}}, [](int) -> std::string { throw chat::ChatError("400"); });
  CHECK_THROWS_AS(permanent.send("", {{"user", "x"}}, 0.5, {}), chat::ChatError);
  CHECK(permanent.attempts() == 1);
}

TEST_CASE("in-flight requests never exceed the cap") {
  ScriptedClient slow({3, 0, {}}, [](int) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    return std::string("x");
  });
  std::vector<std::thread> threads;
  for (int t = 0; t < 12; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 3; ++i) slow.send("", {{"user", "x"}}, 0.5, {});
    });
  }
  for (auto& t : threads) t.join();
  CHECK(slow.peak_in_flight() <= 3);
  CHECK(slow.peak_in_flight() >= 1);
  CHECK(slow.attempts() == 36);
}

TEST_CASE("request body follows the chat-completions schema") {
  const auto body = nlohmann::json::parse(
      chat::HttpChatClient::request_body("m1", "sys", {{"user", "u"}, {"assistant", "a"}}, 0.7, 42));
  CHECK(body["model"] == "m1");
  CHECK(body["messages"].size() == 3);
  CHECK(body["messages"][0] == nlohmann::json({{"role", "system"}, {"content", "sys"}}));
  CHECK(body["messages"][2]["role"] == "assistant");
  CHECK(body["temperature"] == 0.7);
  CHECK(body["seed"] == 42);
  CHECK_FALSE(nlohmann::json::parse(chat::HttpChatClient::request_body("m", "", {}, 0.1, {})).contains("seed"));
  CHECK(chat::HttpChatClient::parse_response(R"({"choices":[{"message":{"role":"assistant","content":"hi"}}]})") == "hi");
  CHECK_THROWS_AS(chat::HttpChatClient::parse_response(R"({"choices":[]})"), chat::ChatError);
  CHECK_THROWS_AS(chat::HttpChatClient::parse_response("not json"), chat::ChatError);
}

TEST_CASE("http client round trip against a local endpoint") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth, seen_body;
  std::mutex mu;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = hits++;
    {
      std::lock_guard lock(mu);
      seen_auth = req.get_header_value("Authorization");
      seen_body = req.body;
    }
    if (req.body.find("fail-once") != std::string::npos && n == 0) {
      res.status = 503;
      return;
    }
    if (req.body.find("bad-request") != std::string::npos) {
      res.status = 400;
      res.set_content("nope", "text/plain");
      return;
    }
    const auto j = nlohmann::json::parse(req.body);
    nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo:" + j["messages"].back()["content"].get<std::string>()}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("SETTLEKIT_TEST_KEY", "secret-123", 1);
  chat::EndpointConfig cfg{"http://127.0.0.1:" + std::to_string(port) + "/v1/", "test-model", "SETTLEKIT_TEST_KEY",
                           5.0, 2, 1};
  chat::HttpChatClient client(cfg);
  CHECK(client.model_name() == "test-model");
  CHECK(client.send("sys", {{"user", "hello"}}, 0.7, 3) == "echo:hello");
  {
    std::lock_guard lock(mu);
    CHECK(seen_auth == "Bearer secret-123");
    CHECK(nlohmann::json::parse(seen_body)["model"] == "test-model");
  }
  hits = 0;
  CHECK(client.send("sys", {{"user", "fail-once"}}, 0.7, 3) == "echo:fail-once");
  CHECK(hits == 2);
  CHECK_THROWS_WITH_AS(client.send("sys", {{"user", "bad-request"}}, 0.7, 3), doctest::Contains("HTTP 400"),
                       chat::ChatError);

  server.stop();
  th.join();
}

TEST_CASE("http client configuration errors") {
  CHECK_THROWS_WITH_AS(chat::HttpChatClient(chat::EndpointConfig{}), doctest::Contains("no client configured"),
                       chat::ChatError);
  CHECK_THROWS_AS(chat::HttpChatClient(chat::EndpointConfig{"localhost:1", "m", "", 1, 1, 0}), chat::ChatError);
}
