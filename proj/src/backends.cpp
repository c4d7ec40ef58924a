#include "ptrag/backends.hpp"

#include <cmath>
#include <cstdlib>
#include <set>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "ptrag/text.hpp"

namespace ptrag {

using nlohmann::json;

std::string EchoGenerator::generate(std::string_view prompt) { return std::string(prompt); }

FixedMapGenerator::FixedMapGenerator(std::map<std::string, std::string, std::less<>> table)
    : table_(std::move(table)) {}

std::string FixedMapGenerator::generate(std::string_view prompt) {
  auto it = table_.find(prompt);
  if (it == table_.end()) throw BackendError("fixed-map stub: no fixture for prompt");
  return it->second;
}

FunctionGenerator::FunctionGenerator(Fn fn) : fn_(std::move(fn)) {}

std::string FunctionGenerator::generate(std::string_view prompt) { return fn_(prompt); }

std::string FailingGenerator::generate(std::string_view) { throw BackendError("generator unavailable"); }

void normalize(Embedding& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq <= 0.0) return;
  double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw std::invalid_argument("HashEmbedder: dimension must be positive");
}

Embedding HashEmbedder::embed_one(std::string_view text) const {
  Embedding v(dimension_, 0.0);
  for (const auto& piece : word_pieces(text)) v[fnv1a64(piece) % dimension_] += 1.0;
  normalize(v);
  return v;
}

std::vector<Embedding> HashEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::vector<double> OverlapReranker::score(std::string_view query, const std::vector<std::string>& texts) {
  auto q = word_pieces(query);
  std::set<std::string> query_terms(q.begin(), q.end());
  std::vector<double> scores;
  scores.reserve(texts.size());
  for (const auto& t : texts) {
    auto pieces = word_pieces(t);
    std::set<std::string> terms(pieces.begin(), pieces.end());
    double shared = 0.0;
    for (const auto& term : query_terms) shared += terms.count(term) ? 1.0 : 0.0;
    scores.push_back(shared);
  }
  return scores;
}

void BackendConfig::validate() const {
  if (endpoint.empty()) throw std::invalid_argument("backend config: endpoint is empty");
  if (!(timeout_seconds > 0.0)) throw std::invalid_argument("backend config: timeout must be > 0");
  if (max_retries < 0) throw std::invalid_argument("backend config: retries must be >= 0");
  if (max_in_flight < 1) throw std::invalid_argument("backend config: max in-flight must be >= 1");
}

namespace {

const BackendConfig& validated(const BackendConfig& c) {
  c.validate();
  return c;
}

// Releases the in-flight slot on every exit path.
class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& s_;
};

}  // namespace

JsonServiceClient::JsonServiceClient(BackendConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(validated(config)),
      transport_(std::move(transport)),
      in_flight_(std::min<std::ptrdiff_t>(config_.max_in_flight, 1024)) {
  if (!transport_) throw std::invalid_argument("JsonServiceClient: null transport");
}

std::string JsonServiceClient::post(const std::string& body) {
  SlotGuard slot(in_flight_);
  std::string last_error;
  const int attempts = config_.max_retries + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff_base * (1 << (attempt - 1)));
    ++attempts_;
    try {
      HttpResponse r = transport_->post_json(config_.endpoint, body, config_.credential, config_.timeout_seconds);
      if (r.status >= 200 && r.status < 300) return r.body;
      last_error = "HTTP status " + std::to_string(r.status);
    } catch (const BackendError& e) {
      last_error = e.what();
    }
    spdlog::debug("{}: attempt {}/{} failed: {}", config_.endpoint, attempt + 1, attempts, last_error);
  }
  throw BackendError(config_.endpoint + ": failed after " + std::to_string(attempts) + " attempts: " + last_error);
}

HttpGenerator::HttpGenerator(BackendConfig config, std::shared_ptr<HttpTransport> transport)
    : client_(std::move(config), std::move(transport)) {}

std::string HttpGenerator::request_body(std::string_view model, std::string_view prompt) {
  json body = {{"model", model},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", 0}};
  return body.dump();
}

std::string HttpGenerator::parse_reply(const std::string& body) {
  try {
    json j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("chat completion reply: ") + e.what());
  }
}

std::string HttpGenerator::generate(std::string_view prompt) {
  if (prompt.empty()) throw std::invalid_argument("generate: empty prompt");
  return parse_reply(client_.post(request_body(client_.config().model, prompt)));
}

HttpEmbedder::HttpEmbedder(BackendConfig config, std::shared_ptr<HttpTransport> transport, std::size_t batch_size)
    : client_(std::move(config), std::move(transport)), batch_size_(batch_size == 0 ? 1 : batch_size) {}

std::string HttpEmbedder::request_body(std::string_view model, const std::vector<std::string>& texts) {
  json body = {{"model", model}, {"input", texts}};
  return body.dump();
}

std::vector<Embedding> HttpEmbedder::parse_reply(const std::string& body, std::size_t expected) {
  try {
    json j = json::parse(body);
    const auto& data = j.at("data");
    if (data.size() != expected) {
      throw BackendError("embedding reply: expected " + std::to_string(expected) + " vectors, got " +
                         std::to_string(data.size()));
    }
    std::vector<Embedding> out(expected);
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::size_t idx = data[i].contains("index") ? data[i].at("index").get<std::size_t>() : i;
      if (idx >= expected) throw BackendError("embedding reply: index out of range");
      out[idx] = data[i].at("embedding").get<Embedding>();
    }
    for (auto& v : out) normalize(v);
    return out;
  } catch (const json::exception& e) {
    throw BackendError(std::string("embedding reply: ") + e.what());
  }
}

std::vector<Embedding> HttpEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    std::size_t end = std::min(texts.size(), start + batch_size_);
    // Servers reject empty strings; those map to the zero vector locally.
    std::vector<std::string> batch;
    std::vector<std::size_t> where;
    for (std::size_t i = start; i < end; ++i) {
      if (!trim(texts[i]).empty()) {
        batch.push_back(texts[i]);
        where.push_back(i - start);
      }
    }
    std::vector<Embedding> chunk(end - start);
    if (!batch.empty()) {
      auto vecs = parse_reply(client_.post(request_body(client_.config().model, batch)), batch.size());
      std::size_t dim = vecs.front().size();
      for (std::size_t k = 0; k < vecs.size(); ++k) chunk[where[k]] = std::move(vecs[k]);
      for (auto& v : chunk)
        if (v.empty()) v.assign(dim, 0.0);
    }
    for (auto& v : chunk) out.push_back(std::move(v));
  }
  return out;
}

HttpReranker::HttpReranker(BackendConfig config, std::shared_ptr<HttpTransport> transport)
    : client_(std::move(config), std::move(transport)) {}

std::string HttpReranker::request_body(std::string_view model, std::string_view query,
                                       const std::vector<std::string>& texts) {
  json body = {{"model", model}, {"query", query}, {"documents", texts}};
  return body.dump();
}

std::vector<double> HttpReranker::parse_reply(const std::string& body, std::size_t expected) {
  try {
    json j = json::parse(body);
    // Accepts {"results": [{"index", "relevance_score"}]} and the bare
    // [{"index", "score"}] array some servers return.
    const json& items = j.is_array() ? j : j.at("results");
    std::vector<double> scores(expected, 0.0);
    std::vector<bool> seen(expected, false);
    for (const auto& item : items) {
      auto idx = item.at("index").get<std::size_t>();
      if (idx >= expected) throw BackendError("rerank reply: index out of range");
      scores[idx] = item.contains("relevance_score") ? item.at("relevance_score").get<double>()
                                                     : item.at("score").get<double>();
      seen[idx] = true;
    }
    for (bool s : seen)
      if (!s) throw BackendError("rerank reply: missing scores");
    return scores;
  } catch (const json::exception& e) {
    throw BackendError(std::string("rerank reply: ") + e.what());
  }
}

std::vector<double> HttpReranker::score(std::string_view query, const std::vector<std::string>& texts) {
  if (texts.empty()) return {};
  return parse_reply(client_.post(request_body(client_.config().model, query, texts)), texts.size());
}

std::optional<BackendConfig> backend_config_from_env(std::string_view service) {
  const std::string prefix = "PTRAG_" + std::string(service) + "_";
  auto get = [&](const char* key) -> std::optional<std::string> {
    const char* v = std::getenv((prefix + key).c_str());
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  auto endpoint = get("ENDPOINT");
  if (!endpoint) return std::nullopt;
  BackendConfig c;
  c.endpoint = *endpoint;
  c.model = get("MODEL").value_or("");
  c.credential = get("API_KEY").value_or("");
  try {
    if (auto t = get("TIMEOUT")) c.timeout_seconds = std::stod(*t);
    if (auto r = get("RETRIES")) c.max_retries = std::stoi(*r);
    if (auto m = get("MAX_IN_FLIGHT")) c.max_in_flight = std::stoi(*m);
  } catch (const std::exception&) {
    throw std::invalid_argument(prefix + "*: non-numeric timeout/retries/in-flight value");
  }
  c.validate();
  return c;
}

}  // namespace ptrag
