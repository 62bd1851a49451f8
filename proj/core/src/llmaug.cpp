#include "iur/llmaug.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace iur {

const char* const kAugmentInstruction =
    "Given a dialogue with utterances from different speakers separated by semicolons, keep the "
    "last utterance unchanged, rewrite the historical utterances, and keep the semantics of the "
    "dialogue unchanged. Here are some examples.";

PromptTemplate PromptTemplate::defaults() {
  PromptTemplate t;
  t.examples = {
      {{"Xiaowei , is there anything fun in Qingdao ?",
        "I think you must visit the Badaguan Scenic Spot .",
        "Please provide a specific introduction ."},
       {"Do you know where is the best place to go in Qingdao ?",
        "I recommend that you go to the Badaguan Scenic Spot to experience it .",
        "Please provide a specific introduction ."}},
      {{"I watched the new film yesterday .", "What did you think of it ?"},
       {"I watched the new science fiction film at the cinema yesterday .",
        "What did you think of it ?"}},
      {{"Have you met my brother ?", "He visited the museum .", "When did he go ?"},
       {"Have you ever met my older brother ?", "My brother visited the city museum last week .",
        "When did he go ?"}},
      {{"The garden looks great .", "Did you plant the roses ?"},
       {"The garden behind the house looks wonderful this spring .",
        "Did you plant the roses ?"}},
      {{"Anna reads the novel .", "She likes it ."},
       {"Anna reads the long novel every evening .", "She likes it ."}},
  };
  return t;
}

PromptTemplate PromptTemplate::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open template file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("template file " + path + ": " + e.what());
  }
  PromptTemplate t;
  if (j.contains("instruction")) {
    if (!j["instruction"].is_string())
      throw InputError("template file " + path + ": 'instruction' must be a string");
    t.instruction = j["instruction"].get<std::string>();
  }
  if (!j.contains("examples") || !j["examples"].is_array())
    throw InputError("template file " + path + ": 'examples' array required");
  for (const auto& e : j["examples"]) {
    if (!e.contains("input") || !e.contains("output"))
      throw InputError("template file " + path + ": each example needs 'input' and 'output'");
    PromptExample pe;
    for (const auto& u : e["input"]) pe.input_utterances.push_back(u.get<std::string>());
    for (const auto& u : e["output"]) pe.output_utterances.push_back(u.get<std::string>());
    if (pe.input_utterances.size() < 2)
      throw InputError("template file " + path + ": example input needs history + incomplete");
    t.examples.push_back(std::move(pe));
  }
  return t;
}

namespace {

std::string join_semicolons(const std::vector<std::string>& parts) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += "; ";
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string serialize_dialogue(const Dialogue& d) {
  std::vector<std::string> parts;
  for (const auto& u : d.history) parts.push_back(u.text);
  parts.push_back(d.incomplete.text);
  return join_semicolons(parts);
}

std::string build_prompt(const Sample& s, const PromptTemplate& t) {
  std::string p = t.instruction;
  if (!t.examples.empty()) {
    p += "\nExamples:";
    for (const auto& e : t.examples) {
      p += "\nInput: " + join_semicolons(e.input_utterances);
      p += "\nOutput: " + join_semicolons(e.output_utterances);
    }
  }
  p += "\nInput: " + serialize_dialogue(s.dialogue);
  return p;
}

// ---------------------------------------------------------------- transport

HttpTransport::HttpTransport(int timeout_seconds) : timeout_seconds_(timeout_seconds) {}

HttpResponse HttpTransport::post(const std::string& url, const std::string& body,
                                 const std::map<std::string, std::string>& headers) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InputError("endpoint URL needs a scheme: " + url);
  std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http")
    throw InputError("only http endpoints are supported by this build (got scheme '" + scheme +
                     "'); point the endpoint at a plain-http gateway");
  std::string rest = url.substr(scheme_end + 3);
  auto slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
  std::string host = hostport;
  int port = 80;
  if (auto colon = hostport.rfind(':'); colon != std::string::npos) {
    host = hostport.substr(0, colon);
    try {
      port = std::stoi(hostport.substr(colon + 1));
    } catch (const std::exception&) {
      throw InputError("bad port in endpoint URL: " + url);
    }
  }
  if (host.empty()) throw InputError("endpoint URL has no host: " + url);

  httplib::Client cli(host, port);
  cli.set_connection_timeout(timeout_seconds_, 0);
  cli.set_read_timeout(timeout_seconds_, 0);
  cli.set_write_timeout(timeout_seconds_, 0);
  httplib::Headers h(headers.begin(), headers.end());
  auto res = cli.Post(path, h, body, "application/json");
  if (!res) throw TransportError("request to " + host + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

HttpResponse EchoTransport::post(const std::string&, const std::string& body,
                                 const std::map<std::string, std::string>&) {
  std::string prompt;
  try {
    auto j = nlohmann::json::parse(body);
    prompt = j.at("messages").at(0).at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    return {400, std::string("bad request: ") + e.what()};
  }
  auto pos = prompt.rfind("\nInput: ");
  std::string dialogue = pos == std::string::npos ? prompt : prompt.substr(pos + 8);
  nlohmann::json out;
  out["choices"] = nlohmann::json::array(
      {nlohmann::json{{"message", nlohmann::json{{"content", dialogue}}}}});
  return {200, out.dump()};
}

// --------------------------------------------------------------- completion

namespace {

std::string resolve_api_key(const LlmConfig& cfg) {
  if (!cfg.require_auth) return "";
  const char* v = std::getenv(cfg.api_key_env.c_str());
  if (!v || !*v)
    throw InputError("environment variable " + cfg.api_key_env +
                     " is not set (required for authenticated requests)");
  return v;
}

bool retryable(int status) { return status == 429 || (status >= 500 && status < 600); }

std::string request_with_key(Transport& transport, const LlmConfig& cfg,
                             const std::string& prompt, const std::string& api_key) {
  nlohmann::json req;
  req["model"] = cfg.model;
  req["messages"] =
      nlohmann::json::array({nlohmann::json{{"role", "user"}, {"content", prompt}}});
  const std::string body = req.dump();

  std::map<std::string, std::string> headers;
  if (!api_key.empty()) headers["Authorization"] = "Bearer " + api_key;

  int last_status = 0;
  std::string last_note;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      double ms = cfg.backoff_initial_ms * std::pow(2.0, attempt - 1);
      if (ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds((long long)ms));
    }
    HttpResponse resp;
    try {
      resp = transport.post(cfg.endpoint, body, headers);
    } catch (const TransportError& e) {
      last_status = 0;
      last_note = e.what();
      continue;
    }
    last_status = resp.status;
    if (resp.status == 200) {
      try {
        auto j = nlohmann::json::parse(resp.body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed completion response: ") + e.what());
      }
    }
    if (!retryable(resp.status))
      throw std::runtime_error("request rejected with HTTP " + std::to_string(resp.status));
    last_note = "HTTP " + std::to_string(resp.status);
  }
  throw std::runtime_error("request failed after " + std::to_string(cfg.max_retries + 1) +
                           " attempts; last error: " +
                           (last_note.empty() ? std::to_string(last_status) : last_note));
}

}  // namespace

std::string request_completion(Transport& transport, const LlmConfig& cfg,
                               const std::string& prompt) {
  return request_with_key(transport, cfg, prompt, resolve_api_key(cfg));
}

// --------------------------------------------------------------- validation

namespace {

std::string trim_copy(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

AugmentationResult parse_and_validate(const std::string& raw, const Sample& original) {
  AugmentationResult r;
  std::vector<std::string> pieces;
  size_t start = 0;
  while (true) {
    size_t semi = raw.find(';', start);
    pieces.push_back(trim_copy(raw.substr(start, semi - start)));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }

  const size_t hist = original.dialogue.history.size();
  if (pieces.size() != hist && pieces.size() != hist + 1) {
    r.reason = "utterance count mismatch: expected " + std::to_string(hist) + " or " +
               std::to_string(hist + 1) + ", got " + std::to_string(pieces.size());
    return r;
  }
  for (const auto& p : pieces) {
    if (p.empty()) {
      r.reason = "empty utterance in response";
      return r;
    }
  }
  if (pieces.size() == hist + 1) {
    if (pieces.back() != trim_copy(original.dialogue.incomplete.text)) {
      r.reason = "final utterance was altered";
      return r;
    }
    pieces.pop_back();
  }
  r.status = AugmentStatus::Accepted;
  r.new_history = std::move(pieces);
  return r;
}

Sample apply_augmentation(const Sample& original, const AugmentationResult& r) {
  if (r.status != AugmentStatus::Accepted)
    throw InputError("cannot apply a rejected augmentation: " + r.reason);
  Sample out = original;
  if (r.new_history.size() != out.dialogue.history.size())
    throw InputError("augmentation history count changed");
  for (size_t i = 0; i < r.new_history.size(); ++i) {
    auto& u = out.dialogue.history[i];
    u.text = r.new_history[i];
    u.parse.reset();  // stale once the words changed
    tokenize_utterance(u, TokenizeMode::Word);
  }
  out.labels.reset();  // derive against the new history before training
  out.origin = Origin::LlmAugmented;
  return out;
}

AugmentationResult augment_one(const Sample& s, const PromptTemplate& t, Transport& transport,
                               const LlmConfig& cfg) {
  return parse_and_validate(
      request_with_key(transport, cfg, build_prompt(s, t), resolve_api_key(cfg)), s);
}

std::vector<AugmentationResult> augment_batch(const std::vector<Sample>& samples,
                                              const PromptTemplate& t, Transport& transport,
                                              const LlmConfig& cfg) {
  if (cfg.concurrency_cap < 1) throw InputError("concurrency cap must be >= 1");
  std::vector<AugmentationResult> results(samples.size());
  if (samples.empty()) return results;
  const std::string api_key = resolve_api_key(cfg);  // fail before spawning workers

  const size_t workers = std::min((size_t)cfg.concurrency_cap, samples.size());
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto run = [&]() {
    while (true) {
      {
        std::lock_guard<std::mutex> lk(err_mu);
        if (first_error) return;
      }
      size_t i = next.fetch_add(1);
      if (i >= samples.size()) return;
      try {
        results[i] = parse_and_validate(
            request_with_key(transport, cfg, build_prompt(samples[i], t), api_key), samples[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace iur
