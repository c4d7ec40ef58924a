#pragma once
// Access to the three external services the engine depends on: text
// generation, dense embedding and cross-encoder reranking. Live clients speak
// the common chat-completion / embedding / rerank JSON shapes over HTTP; the
// stubs are deterministic and never touch the network.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ptrag {

using Embedding = std::vector<double>;

/// Raised by every backend call that could not produce a usable reply. Each
/// caller catches it and applies its own documented degradation.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string generate(std::string_view prompt) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One L2-normalized vector per input. Empty input text maps to the zero
  /// vector.
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
};

class Reranker {
 public:
  virtual ~Reranker() = default;
  /// One relevance number per text, in input order.
  virtual std::vector<double> score(std::string_view query, const std::vector<std::string>& texts) = 0;
};

/// The set of services one pipeline run uses. `reranker` may be null.
struct Backends {
  std::shared_ptr<TextGenerator> llm;
  std::shared_ptr<Embedder> embedder;
  std::shared_ptr<Reranker> reranker;
};

// ---------------------------------------------------------------------------
// Stubs

class EchoGenerator final : public TextGenerator {
 public:
  std::string generate(std::string_view prompt) override;
};

/// Table lookup on the exact prompt. A miss is a backend failure.
class FixedMapGenerator final : public TextGenerator {
 public:
  explicit FixedMapGenerator(std::map<std::string, std::string, std::less<>> table);
  std::string generate(std::string_view prompt) override;

 private:
  std::map<std::string, std::string, std::less<>> table_;
};

class FunctionGenerator final : public TextGenerator {
 public:
  using Fn = std::function<std::string(std::string_view)>;
  explicit FunctionGenerator(Fn fn);
  std::string generate(std::string_view prompt) override;

 private:
  Fn fn_;
};

/// Always fails; models an unreachable service.
class FailingGenerator final : public TextGenerator {
 public:
  std::string generate(std::string_view prompt) override;
};

/// Bag-of-words feature hashing into `dimension` buckets, then L2
/// normalization. Same text, same vector, on every platform.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 256);
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
  Embedding embed_one(std::string_view text) const;
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
};

/// Scores each text by the number of distinct query word pieces it contains.
class OverlapReranker final : public Reranker {
 public:
  std::vector<double> score(std::string_view query, const std::vector<std::string>& texts) override;
};

/// In-place L2 normalization; the zero vector is left unchanged.
void normalize(Embedding& v);

// ---------------------------------------------------------------------------
// Live HTTP clients

struct BackendConfig {
  std::string endpoint;  // full URL, e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  std::string credential;
  double timeout_seconds = 60.0;
  int max_retries = 2;
  int max_in_flight = 4;
  std::chrono::milliseconds backoff_base{250};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// One POST of a JSON body. Transport errors throw BackendError.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& url, const std::string& body,
                                 const std::string& bearer, double timeout_seconds) = 0;
};

std::shared_ptr<HttpTransport> make_default_transport();

/// Retrying, concurrency-limited JSON client shared by the three services.
class JsonServiceClient {
 public:
  JsonServiceClient(BackendConfig config, std::shared_ptr<HttpTransport> transport);

  /// POSTs `body`; retries transport failures and non-2xx replies with
  /// exponential backoff. Throws BackendError once attempts are exhausted.
  std::string post(const std::string& body);

  const BackendConfig& config() const { return config_; }
  /// Total HTTP attempts made so far, retries included.
  std::size_t attempts() const { return attempts_.load(); }

 private:
  BackendConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::size_t> attempts_{0};
};

class HttpGenerator final : public TextGenerator {
 public:
  HttpGenerator(BackendConfig config, std::shared_ptr<HttpTransport> transport = make_default_transport());
  std::string generate(std::string_view prompt) override;
  std::size_t attempts() const { return client_.attempts(); }

  static std::string request_body(std::string_view model, std::string_view prompt);
  static std::string parse_reply(const std::string& body);

 private:
  JsonServiceClient client_;
};

class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(BackendConfig config, std::shared_ptr<HttpTransport> transport = make_default_transport(),
               std::size_t batch_size = 64);
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

  static std::string request_body(std::string_view model, const std::vector<std::string>& texts);
  static std::vector<Embedding> parse_reply(const std::string& body, std::size_t expected);

 private:
  JsonServiceClient client_;
  std::size_t batch_size_;
};

class HttpReranker final : public Reranker {
 public:
  HttpReranker(BackendConfig config, std::shared_ptr<HttpTransport> transport = make_default_transport());
  std::vector<double> score(std::string_view query, const std::vector<std::string>& texts) override;

  static std::string request_body(std::string_view model, std::string_view query,
                                  const std::vector<std::string>& texts);
  static std::vector<double> parse_reply(const std::string& body, std::size_t expected);

 private:
  JsonServiceClient client_;
};

/// Reads PTRAG_<SERVICE>_ENDPOINT / _MODEL / _API_KEY / _TIMEOUT / _RETRIES /
/// _MAX_IN_FLIGHT for SERVICE in {LLM, EMBED, RERANK}. Returns nullopt when the
/// endpoint is unset.
std::optional<BackendConfig> backend_config_from_env(std::string_view service);

}  // namespace ptrag
