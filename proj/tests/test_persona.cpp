#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "biascope/persona.hpp"
#include "persona_script.hpp"
#include "support.hpp"

using namespace biascope;
using namespace biascope::persona;
using biascope::testing::five_pairs;
using biascope::testing::mock_for;
using biascope::testing::MockBehavior;
using biascope::testing::TempDir;

namespace {

// Local chat-completion stub; handler decides each response.
class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ProviderConfig chat_config(const std::string& url) {
  ProviderConfig c;
  c.kind = ProviderKind::kGenericChat;
  c.endpoint = url;
  c.model = "stub-model";
  c.timeout_seconds = 5;
  c.backoff_ms = 1;
  return c;
}

}  // namespace

TEST(Prompt, Template) {
  const auto p = build_prompt("Politics", "asia");
  EXPECT_NE(p.find("Politics"), std::string::npos);
  EXPECT_NE(p.find("asia"), std::string::npos);
  EXPECT_NE(p.find("Gender:"), std::string::npos);
  EXPECT_EQ(p, build_prompt("Politics", "asia"));
  EXPECT_EQ(build_prompt("Politics", "").find(" from "), std::string::npos);
}

TEST(ParseGender, Examples) {
  EXPECT_EQ(parse_gender("Maya, 31, nurse.\nGender: female"), Gender::kFemale);
  EXPECT_EQ(parse_gender("Raj is a man who follows politics. He votes often."), Gender::kMale);
  EXPECT_EQ(parse_gender("They enjoy music."), Gender::kUnassigned);
  EXPECT_EQ(parse_gender("She is a woman.\nGender: male"), Gender::kMale);
}

TEST(MockProvider, PassthroughAndNoMatch) {
  MockProvider mock({MockProvider::Rule{"Politics", "Ana.\nGender: female"}});
  EXPECT_EQ(mock.complete(build_prompt("Politics", "asia")), "Ana.\nGender: female");
  EXPECT_THROW(mock.complete("nothing here"), ProviderError);
}

TEST(MockProvider, FromFile) {
  TempDir dir;
  write_jsonl(dir / "mock.jsonl", {{{"match", "x"}, {"response", "first"}},
                                   {{"match", "x"}, {"response", "second"}}});
  EXPECT_EQ(MockProvider::from_file(dir / "mock.jsonl").complete("xx"), "first");
}

TEST(PersonaEval, MismatchRates) {
  PersonaEvalOptions options;
  options.seed = 3;
  const auto pairs = five_pairs();
  const std::pair<MockBehavior, double> cases[] = {
      {MockBehavior::kPerfect, 0.0}, {MockBehavior::kFlipped, 100.0}, {MockBehavior::kFlipMale, 50.0}};
  for (const auto& [behavior, pct] : cases) {
    const auto eval = run_persona_eval(pairs, mock_for(behavior), options);
    ASSERT_EQ(eval.reports.size(), 1u);
    const auto& r = eval.reports[0];
    EXPECT_EQ(r.mismatch_pct, pct);
    for (const auto& run : r.per_run_pct) EXPECT_EQ(run, pct);
    EXPECT_EQ(r.matched + r.mismatched + r.unknown, 7u * 10u);
    EXPECT_EQ(eval.results.size(), 70u);
  }
}

TEST(PersonaEval, DeterministicAcrossConcurrency) {
  const auto pairs = five_pairs();
  PersonaEvalOptions a;
  a.seed = 8;
  a.max_in_flight = 1;
  PersonaEvalOptions b = a;
  b.max_in_flight = 6;
  const auto one = run_persona_eval(pairs, mock_for(MockBehavior::kFlipMale), a);
  const auto two = run_persona_eval(pairs, mock_for(MockBehavior::kFlipMale), b);
  ASSERT_EQ(one.results.size(), two.results.size());
  for (std::size_t i = 0; i < one.results.size(); ++i) {
    EXPECT_EQ(to_json(one.results[i]), to_json(two.results[i]));
  }
}

TEST(ChatProvider, RoundTrip) {
  Json seen;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    res.set_content(R"({"choices":[{"message":{"content":"canned body\nGender: male"}}]})",
                    "application/json");
  });
  ChatProvider provider(chat_config(stub.url()));
  EXPECT_EQ(provider.complete("hello"), "canned body\nGender: male");
  EXPECT_EQ(seen["model"], "stub-model");
  EXPECT_EQ(seen["messages"][0]["content"], "hello");
  EXPECT_EQ(seen["temperature"], 0.8);
}

TEST(ChatProvider, RetriesThenFails) {
  std::atomic<int> calls{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 503;
  });
  ChatProvider provider(chat_config(stub.url()));
  try {
    provider.complete("x");
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos);
  }
  EXPECT_EQ(calls, 3);
}

TEST(ChatProvider, AuthFailureIsImmediate) {
  std::atomic<int> calls{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
  });
  ChatProvider provider(chat_config(stub.url()));
  EXPECT_THROW(provider.complete("x"), AuthError);
  EXPECT_EQ(calls, 1);
}

TEST(ChatProvider, MalformedResponse) {
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"unexpected":true})", "application/json");
  });
  ChatProvider provider(chat_config(stub.url()));
  EXPECT_THROW(provider.complete("x"), MalformedResponseError);
}

TEST(ChatProvider, BearerToken) {
  std::string auth;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
  });
  ::setenv("BIASCOPE_TEST_TOKEN", "sekrit", 1);
  auto config = chat_config(stub.url());
  config.token_env = "BIASCOPE_TEST_TOKEN";
  ChatProvider(config).complete("x");
  EXPECT_EQ(auth, "Bearer sekrit");
}
