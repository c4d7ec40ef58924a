// Must match the definition in the library so httplib's inline symbols agree.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "ptrag/backends.hpp"
#include "ptrag/prompts.hpp"

using namespace ptrag;
using nlohmann::json;

namespace {

double norm(const Embedding& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Scripted transport: replays `statuses` in order, then 200 forever.
struct ScriptedTransport : HttpTransport {
  std::vector<int> statuses;
  std::string reply;
  std::vector<std::string> bodies;
  HttpResponse post_json(const std::string&, const std::string& body, const std::string&, double) override {
    bodies.push_back(body);
    std::size_t k = bodies.size() - 1;
    int status = k < statuses.size() ? statuses[k] : 200;
    if (status < 0) throw BackendError("connection refused");
    return {status, reply};
  }
};

BackendConfig fast_config(std::string endpoint = "http://127.0.0.1:9/x") {
  BackendConfig c;
  c.endpoint = std::move(endpoint);
  c.model = "m";
  c.timeout_seconds = 1.0;
  c.backoff_base = std::chrono::milliseconds(1);
  return c;
}

/// Local server on an ephemeral port; stopped on destruction.
class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Stubs, EchoAndFixedMap) {
  EchoGenerator echo;
  EXPECT_EQ(echo.generate("abc"), "abc");
  FixedMapGenerator fixed(std::map<std::string, std::string, std::less<>>{{"p", "r"}});
  EXPECT_EQ(fixed.generate("p"), "r");
  EXPECT_THROW(fixed.generate("other"), BackendError);
  FailingGenerator down;
  EXPECT_THROW(down.generate("p"), BackendError);
}

TEST(Stubs, HashEmbedderIsDeterministicAndNormalized) {
  HashEmbedder a, b;
  auto x = a.embed_one("Barnacles on rocky shores");
  EXPECT_EQ(x, b.embed_one("Barnacles on rocky shores"));
  EXPECT_EQ(x.size(), 256u);
  EXPECT_NEAR(norm(x), 1.0, 1e-12);
  EXPECT_EQ(x, a.embed_one("barnacles ON rocky, shores!"));
  auto empty = a.embed_one("");
  EXPECT_EQ(norm(empty), 0.0);
  EXPECT_THROW(HashEmbedder(0), std::invalid_argument);
  EXPECT_EQ(a.embed({"a", "b"}).size(), 2u);
}

TEST(Stubs, OverlapReranker) {
  OverlapReranker r;
  EXPECT_EQ(r.score("red kelp", {"red kelp forest red", "sand"}), (std::vector<double>{2.0, 0.0}));
  EXPECT_TRUE(r.score("q", {}).empty());
}

TEST(Stubs, TaskFaultGeneratorOnlyTouchesListedTasks) {
  auto inner = std::make_shared<RuleStubGenerator>();
  TaskFaultGenerator faulty(inner, {std::string(task::kQueryDecomposition)});
  EXPECT_THROW(faulty.generate(query_decomposition_prompt("q", 3)), BackendError);
  EXPECT_NO_THROW(faulty.generate(query_transformation_prompt("q")));
  TaskFaultGenerator garbled(inner, {std::string(task::kQueryDecomposition)}, true);
  EXPECT_NO_THROW(garbled.generate(query_decomposition_prompt("q", 3)));
}

TEST(Http, RequestShapes) {
  auto chat = json::parse(HttpGenerator::request_body("m", "hi"));
  EXPECT_EQ(chat["model"], "m");
  EXPECT_EQ(chat["messages"][0]["role"], "user");
  EXPECT_EQ(chat["messages"][0]["content"], "hi");
  auto emb = json::parse(HttpEmbedder::request_body("e", {"a", "b"}));
  EXPECT_EQ(emb["input"], json::array({"a", "b"}));
  auto rr = json::parse(HttpReranker::request_body("r", "q", {"x"}));
  EXPECT_EQ(rr["query"], "q");
  EXPECT_EQ(rr["documents"], json::array({"x"}));
}

TEST(Http, ReplyParsing) {
  EXPECT_EQ(HttpGenerator::parse_reply(R"({"choices":[{"message":{"content":"ok"}}]})"), "ok");
  EXPECT_THROW(HttpGenerator::parse_reply("{}"), BackendError);
  EXPECT_THROW(HttpGenerator::parse_reply("not json"), BackendError);

  auto v = HttpEmbedder::parse_reply(R"({"data":[{"index":1,"embedding":[0,2]},{"index":0,"embedding":[3,4]}]})", 2);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0][0], 0.6, 1e-12);
  EXPECT_NEAR(v[1][1], 1.0, 1e-12);
  EXPECT_THROW(HttpEmbedder::parse_reply(R"({"data":[{"embedding":[1]}]})", 2), BackendError);

  EXPECT_EQ(HttpReranker::parse_reply(R"({"results":[{"index":1,"relevance_score":0.2},{"index":0,"relevance_score":0.7}]})", 2),
            (std::vector<double>{0.7, 0.2}));
  EXPECT_EQ(HttpReranker::parse_reply(R"([{"index":0,"score":3}])", 1), (std::vector<double>{3.0}));
  EXPECT_THROW(HttpReranker::parse_reply(R"({"results":[{"index":5,"relevance_score":1}]})", 2), BackendError);
}

TEST(Http, RetriesThenSucceeds) {
  auto t = std::make_shared<ScriptedTransport>();
  t->statuses = {503, -1};
  t->reply = R"({"choices":[{"message":{"content":"fine"}}]})";
  HttpGenerator g(fast_config(), t);
  EXPECT_EQ(g.generate("p"), "fine");
  EXPECT_EQ(g.attempts(), 3u);
}

TEST(Http, GivesUpAfterConfiguredRetries) {
  auto t = std::make_shared<ScriptedTransport>();
  t->statuses = {500, 500, 500, 500};
  auto c = fast_config();
  c.max_retries = 2;
  HttpGenerator g(c, t);
  EXPECT_THROW(g.generate("p"), BackendError);
  EXPECT_EQ(g.attempts(), 3u);
}

TEST(Http, ConfigValidation) {
  auto c = fast_config();
  c.endpoint.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = fast_config();
  c.max_in_flight = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = fast_config();
  c.timeout_seconds = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Http, LocalServerRoundTrip) {
  LocalServer srv;
  std::string seen_auth;
  srv.server().Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto body = json::parse(req.body);
    json reply = {{"choices", json::array({{{"message", {{"content", "re: " + body["messages"][0]["content"].get<std::string>()}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  srv.server().Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    json data = json::array();
    for (std::size_t i = 0; i < body["input"].size(); ++i) data.push_back({{"index", i}, {"embedding", {1.0, double(i)}}});
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  auto c = fast_config(srv.url("/chat"));
  c.credential = "secret";
  HttpGenerator g(c);
  EXPECT_EQ(g.generate("hello"), "re: hello");
  EXPECT_EQ(seen_auth, "Bearer secret");

  HttpEmbedder e(fast_config(srv.url("/embed")), make_default_transport(), 2);
  auto vecs = e.embed({"a", "b", "c"});
  ASSERT_EQ(vecs.size(), 3u);
  EXPECT_NEAR(norm(vecs[1]), 1.0, 1e-12);
}

TEST(Http, UnreachableEndpointFails) {
  auto c = fast_config("http://127.0.0.1:1/none");
  c.max_retries = 1;
  HttpGenerator g(c);
  EXPECT_THROW(g.generate("p"), BackendError);
  EXPECT_EQ(g.attempts(), 2u);
}

TEST(Http, ConfigFromEnvironment) {
  ::unsetenv("PTRAG_RERANK_ENDPOINT");
  EXPECT_FALSE(backend_config_from_env("RERANK"));
  ::setenv("PTRAG_RERANK_ENDPOINT", "http://h/r", 1);
  ::setenv("PTRAG_RERANK_MODEL", "bge", 1);
  ::setenv("PTRAG_RERANK_RETRIES", "5", 1);
  auto c = backend_config_from_env("RERANK");
  ASSERT_TRUE(c);
  EXPECT_EQ(c->endpoint, "http://h/r");
  EXPECT_EQ(c->model, "bge");
  EXPECT_EQ(c->max_retries, 5);
  ::setenv("PTRAG_RERANK_TIMEOUT", "soon", 1);
  EXPECT_THROW(backend_config_from_env("RERANK"), std::invalid_argument);
  for (const char* k : {"PTRAG_RERANK_ENDPOINT", "PTRAG_RERANK_MODEL", "PTRAG_RERANK_RETRIES", "PTRAG_RERANK_TIMEOUT"})
    ::unsetenv(k);
}
