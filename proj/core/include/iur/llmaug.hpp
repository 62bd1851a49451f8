#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "iur/corpus.hpp"

namespace iur {

// The fixed instruction line every augmentation prompt starts with.
extern const char* const kAugmentInstruction;

struct PromptExample {
  std::vector<std::string> input_utterances;   // history then incomplete
  std::vector<std::string> output_utterances;  // rewritten history, incomplete unchanged
};

struct PromptTemplate {
  std::string instruction = kAugmentInstruction;
  std::vector<PromptExample> examples;

  // Five fixed examples standing in for the manually curated set.
  static PromptTemplate defaults();
  // {"instruction": "...", "examples": [{"input": [...], "output": [...]}]}
  static PromptTemplate from_json_file(const std::string& path);
};

// History utterances then the incomplete one, joined with "; ".
std::string serialize_dialogue(const Dialogue& d);

// instruction, then an Examples block (omitted when the template has none),
// then "Input: " + the serialized dialogue. Deterministic.
std::string build_prompt(const Sample& s, const PromptTemplate& t);

// ---------------------------------------------------------------- transport

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Network-level failure (connect/timeout). Distinct from HTTP error codes.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

// Real HTTP transport (plain http; TLS endpoints need a proxy).
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(int timeout_seconds = 30);
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;

 private:
  int timeout_seconds_;
};

// Wraps a callable; the callable must be thread-safe when used with a
// concurrent batch.
class FnTransport : public Transport {
 public:
  using Fn = std::function<HttpResponse(const std::string& url, const std::string& body)>;
  explicit FnTransport(Fn fn) : fn_(std::move(fn)) {}
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>&) override {
    return fn_(url, body);
  }

 private:
  Fn fn_;
};

// Offline transport that answers every request with the input dialogue
// unchanged: structurally valid, semantically a no-op. Lets the pipeline run
// without a network.
class EchoTransport : public Transport {
 public:
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;
};

struct LlmConfig {
  std::string endpoint = "http://localhost:8080/v1/chat/completions";
  std::string model = "rewriter";
  int max_retries = 3;        // retries after the first attempt
  double backoff_initial_ms = 200.0;  // doubles per retry
  int concurrency_cap = 4;
  bool require_auth = true;   // mock pipelines switch this off
  std::string api_key_env = "EO_REWRITE_API_KEY";
};

// Chat-completion round trip returning the assistant text. Retries with
// exponential backoff on 429/5xx/network errors; other HTTP errors fail
// fast. The API key comes from the environment and never appears in errors
// or logs.
std::string request_completion(Transport& transport, const LlmConfig& cfg,
                               const std::string& prompt);

// --------------------------------------------------------------- validation

enum class AugmentStatus { Accepted, Rejected };

struct AugmentationResult {
  AugmentStatus status = AugmentStatus::Rejected;
  std::vector<std::string> new_history;  // filled when accepted
  std::string reason;                    // filled when rejected
};

// Splits the response on semicolons. Accepts a bare rewritten history or a
// history plus the unchanged incomplete utterance; anything else is a
// rejection value, never an exception.
AugmentationResult parse_and_validate(const std::string& raw, const Sample& original);

// New sample with the rewritten history (tokenized, parses dropped for
// re-derivation), incomplete and rewritten untouched, labels cleared,
// origin llm-augmented. Throws on rejected results.
Sample apply_augmentation(const Sample& original, const AugmentationResult& r);

AugmentationResult augment_one(const Sample& s, const PromptTemplate& t, Transport& transport,
                               const LlmConfig& cfg);

// Runs up to cfg.concurrency_cap requests at a time; results line up with
// the input order regardless of completion order.
std::vector<AugmentationResult> augment_batch(const std::vector<Sample>& samples,
                                              const PromptTemplate& t, Transport& transport,
                                              const LlmConfig& cfg);

}  // namespace iur
