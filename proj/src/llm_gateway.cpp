#include "scbu/llm_gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <mutex>
#include <semaphore>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "scbu/errors.hpp"
#include "scbu/jsonio.hpp"
#include "scbu/util.hpp"

namespace scbu {

const char* to_string(BackendKind k) {
  switch (k) {
    case BackendKind::Mock: return "mock";
    case BackendKind::Fixture: return "fixture";
    case BackendKind::Http: return "http";
  }
  return "?";
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "mock") return BackendKind::Mock;
  if (s == "fixture") return BackendKind::Fixture;
  if (s == "http") return BackendKind::Http;
  throw ConfigError("unknown backend kind '" + s + "'");
}

Label mock_rule_label(const std::string& script_text) {
  static const std::string needle = "continued to play with the toy";
  int count = 0;
  std::size_t pos = script_text.find(needle);
  while (pos != std::string::npos) {
    ++count;
    pos = script_text.find(needle, pos + needle.size());
  }
  return count >= 2 ? Label::ASD : Label::TD;
}

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint '" + url + "' must include a scheme");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string mock_answer(const std::string& script_text) {
  static const std::string needle = "continued to play with the toy";
  int count = 0;
  std::size_t pos = script_text.find(needle);
  while (pos != std::string::npos) {
    ++count;
    pos = script_text.find(needle, pos + needle.size());
  }
  Label label = count >= 2 ? Label::ASD : Label::TD;
  std::ostringstream out;
  out << "The script shows " << count
      << " response line(s) in which the child continued to play with the toy instead of "
         "engaging. ";
  if (label == Label::ASD) {
    out << "Repeated non-response to social bids is consistent with ASD.";
  } else {
    out << "The child engaged with the social bids most of the time.";
  }
  out << "\nJudgment: " << to_string(label);
  return out.str();
}

std::string fixture_answer(const PromptBundle& bundle, const BackendSpec& backend,
                           const std::string& hash_hex) {
  if (backend.fixture_dir.empty()) {
    throw BackendError("fixture backend '" + backend.name + "' has no fixture_dir");
  }
  auto try_read = [](const std::filesystem::path& p) -> std::optional<std::string> {
    std::ifstream f(p, std::ios::binary);
    if (!f) return std::nullopt;
    std::ostringstream ss;
    ss << f.rdbuf();
    ojson j;
    try {
      j = ojson::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendError("fixture " + p.string() + ": invalid JSON: " + e.what());
    }
    return require_string<BackendError>(j, "raw_response", p.filename().string());
  };
  auto by_full = try_read(backend.fixture_dir /
                          (bundle.case_id + "__" + backend.name + "__" + hash_hex + ".json"));
  if (by_full) return *by_full;
  auto by_case = try_read(backend.fixture_dir / (bundle.case_id + "__" + backend.name + ".json"));
  if (by_case) return *by_case;
  auto by_hash = try_read(backend.fixture_dir / (hash_hex + ".json"));
  if (by_hash) return *by_hash;
  throw BackendError("no recorded answer for case '" + bundle.case_id + "' (backend '" +
                     backend.name + "') in " + backend.fixture_dir.string());
}

bool transient_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

// One chat-completions call; used by detection and by the describer.
std::string chat_once(const BackendSpec& backend, const GatewayConfig& cfg,
                      const std::string& system_text, const std::string& user_text,
                      std::string& error_out) {
  ParsedUrl url = split_url(backend.endpoint);
  httplib::Client client(url.base);
  client.set_connection_timeout(cfg.timeout_s);
  client.set_read_timeout(cfg.timeout_s);

  httplib::Headers headers;
  if (!backend.api_key_env.empty()) {
    if (const char* key = std::getenv(backend.api_key_env.c_str()); key && *key) {
      headers.insert({"Authorization", std::string("Bearer ") + key});
    }
  }

  ojson body;
  if (!backend.model.empty()) body["model"] = backend.model;
  body["messages"] = ojson::array();
  body["messages"].push_back({{"role", "system"}, {"content", system_text}});
  body["messages"].push_back({{"role", "user"}, {"content", user_text}});
  body["temperature"] = backend.temperature;
  body["max_tokens"] = backend.max_tokens;

  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) {
    error_out = "transport failure: " + httplib::to_string(res.error());
    return "";
  }
  if (res->status != 200) {
    error_out = "http status " + std::to_string(res->status);
    if (!transient_status(res->status)) {
      throw BackendError("backend '" + backend.name + "': " + error_out + ": " + res->body);
    }
    return "";
  }
  ojson j;
  try {
    j = ojson::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw BackendError("backend '" + backend.name + "': malformed response body: " + e.what());
  }
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError("backend '" + backend.name +
                       "': response missing choices[0].message.content: " + e.what());
  }
}

// Retries chat_once on transient failures with exponential backoff.
std::string chat_with_retries(const BackendSpec& backend, const GatewayConfig& cfg,
                              const std::string& system_text, const std::string& user_text) {
  std::string last_error;
  int delay_ms = cfg.backoff_initial_ms;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
    std::string error;
    std::string answer = chat_once(backend, cfg, system_text, user_text, error);
    if (error.empty()) return answer;
    last_error = error;
  }
  throw BackendError("backend '" + backend.name + "': retries exhausted: " + last_error);
}

void persist_raw(const GatewayConfig& cfg, const PromptBundle& bundle,
                 const BackendSpec& backend, const std::string& hash_hex,
                 const std::string& raw) {
  if (!cfg.audit_dir) return;
  std::filesystem::create_directories(*cfg.audit_dir);
  std::filesystem::path p =
      *cfg.audit_dir / (bundle.case_id + "__" + backend.name + "__" + hash_hex + ".txt");
  std::ofstream f(p, std::ios::binary);
  f << raw;
}

}  // namespace

DetectionResult detect(const PromptBundle& bundle, const BackendSpec& backend,
                       const GatewayConfig& cfg) {
  if (backend.max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  if (backend.temperature < 0) throw ConfigError("temperature must be non-negative");
  if (!bundle.exemplar_blocks.empty() && !backend.allows_exemplars) {
    throw ConfigError("backend '" + backend.name + "' does not accept exemplar scripts");
  }

  std::string rendered = render_prompt(bundle);
  std::string hash_hex = to_hex(fnv1a64(rendered));

  auto started = std::chrono::steady_clock::now();
  std::string raw;
  switch (backend.kind) {
    case BackendKind::Mock:
      raw = mock_answer(bundle.script_text);
      break;
    case BackendKind::Fixture:
      raw = fixture_answer(bundle, backend, hash_hex);
      break;
    case BackendKind::Http:
      raw = chat_with_retries(backend, cfg, bundle.system_text, render_user_message(bundle));
      break;
  }
  auto elapsed = std::chrono::steady_clock::now() - started;

  // Audit before interpretation: the raw answer outlives any parse bug.
  persist_raw(cfg, bundle, backend, hash_hex, raw);

  DetectionResult result;
  result.case_id = bundle.case_id;
  result.backend = backend.name;
  result.raw_response = raw;
  result.latency_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
  result.prompt_hash = hash_hex;
  try {
    Verdict v = parse_verdict(raw);
    result.label = v.label;
    result.rationale = v.rationale;
  } catch (const UnparseableVerdict&) {
    result.label = Label::Abstain;
  }
  return result;
}

std::vector<DetectionResult> detect_batch(const std::vector<PromptBundle>& bundles,
                                          const BackendSpec& backend,
                                          const GatewayConfig& cfg) {
  std::counting_semaphore<> slots(std::max(1, cfg.max_parallel));
  std::mutex pace_mutex;
  auto next_allowed = std::chrono::steady_clock::now();

  auto paced_detect = [&](const PromptBundle& bundle) {
    if (cfg.min_interval_ms > 0) {
      std::unique_lock lock(pace_mutex);
      auto now = std::chrono::steady_clock::now();
      if (next_allowed > now) {
        auto wait = next_allowed - now;
        next_allowed += std::chrono::milliseconds(cfg.min_interval_ms);
        lock.unlock();
        std::this_thread::sleep_for(wait);
      } else {
        next_allowed = now + std::chrono::milliseconds(cfg.min_interval_ms);
      }
    }
    return detect(bundle, backend, cfg);
  };

  std::vector<std::future<DetectionResult>> futures;
  futures.reserve(bundles.size());
  for (const auto& bundle : bundles) {
    futures.push_back(std::async(std::launch::async, [&, bundle]() {
      slots.acquire();
      struct Release {
        std::counting_semaphore<>* s;
        ~Release() { s->release(); }
      } release{&slots};
      return paced_detect(bundle);
    }));
  }
  std::vector<DetectionResult> results;
  results.reserve(futures.size());
  for (auto& f : futures) results.push_back(f.get());
  std::stable_sort(results.begin(), results.end(),
                   [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
  return results;
}

HttpDescriber::HttpDescriber(BackendSpec backend, GatewayConfig cfg, PromptTemplates templates)
    : backend_(std::move(backend)), cfg_(std::move(cfg)), templates_(std::move(templates)) {}

std::string HttpDescriber::describe(const std::string& case_id, const EmotionSegment& segment,
                                    const std::string& media_ref) {
  std::ostringstream user;
  user << "[media: " << media_ref << ", case: " << case_id << ", segment: "
       << segment.segment_id << ", interval: " << format_fixed(segment.start_s, 3) << "s to "
       << format_fixed(segment.end_s, 3) << "s]\n"
       << templates_.emotion_question;
  try {
    return chat_with_retries(backend_, cfg_, templates_.emotion_prompt, user.str());
  } catch (const BackendError& e) {
    throw DescriberUnavailable(e.what());
  }
}

}  // namespace scbu
