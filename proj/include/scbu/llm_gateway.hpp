// llm_gateway.hpp
//
// Backend abstraction for single-model detection. A backend is a named
// configuration, not code: Mock answers from a fixed rule, Fixture replays
// recorded answers from a directory, Http speaks the chat-completions wire
// format. The mock and fixture paths are bit-deterministic and keep the
// whole test suite network-free.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scbu/emotion_dynamics.hpp"
#include "scbu/prompt_builder.hpp"

namespace scbu {

enum class BackendKind { Mock, Fixture, Http };

const char* to_string(BackendKind k);
BackendKind backend_kind_from_string(const std::string& s);

struct BackendSpec {
  std::string name = "mock";
  BackendKind kind = BackendKind::Mock;

  // Http: full endpoint URL, e.g. "http://host:8000/v1/chat/completions";
  // the optional model field is copied into the request body. Credentials
  // come only from the environment variable named by api_key_env.
  std::string endpoint;
  std::string model;
  std::string api_key_env = "SCBU_API_KEY";

  // Fixture: directory of recorded answers, tried most-specific first:
  // "<case_id>__<name>__<prompt_hash>.json" (what the audit writer emits),
  // then "<case_id>__<name>.json", then "<prompt_hash>.json".
  std::filesystem::path fixture_dir;

  int max_tokens = 1000;
  double temperature = 0.7;

  // Locally deployed models may see exemplar scripts; hosted ones must not.
  bool allows_exemplars = true;
};

struct GatewayConfig {
  int retries = 3;                  // attempts after the first failure
  int backoff_initial_ms = 200;     // doubles per retry
  int timeout_s = 30;
  int max_parallel = 4;             // concurrent detects per batch
  int min_interval_ms = 0;          // per-backend request spacing
  std::optional<std::filesystem::path> audit_dir;  // raw answers, pre-parse
};

struct DetectionResult {
  std::string case_id;
  std::string backend;
  Label label = Label::Abstain;  // Abstain iff verdict parsing failed
  std::string rationale;
  std::string raw_response;
  long long latency_ms = 0;
  std::string prompt_hash;  // FNV-1a of the rendered prompt, hex
};

// One detection. The raw answer is written to cfg.audit_dir (when set)
// before any parsing. Transient transport failures retry with exponential
// backoff; BackendError is thrown once retries are exhausted. Exemplar
// blocks in the bundle require backend.allows_exemplars.
DetectionResult detect(const PromptBundle& bundle, const BackendSpec& backend,
                       const GatewayConfig& cfg = {});

// Batch helper: runs detect over the bundles with at most cfg.max_parallel
// in flight, then returns results sorted by case id regardless of
// completion order.
std::vector<DetectionResult> detect_batch(const std::vector<PromptBundle>& bundles,
                                          const BackendSpec& backend,
                                          const GatewayConfig& cfg = {});

// Emotion-segment describer backed by the same chat wire format. Sends the
// emotion prompt as the system turn and the emotion question plus a media
// reference as the user turn. Unreachable backends throw
// DescriberUnavailable.
class HttpDescriber : public Describer {
 public:
  HttpDescriber(BackendSpec backend, GatewayConfig cfg = {},
                PromptTemplates templates = PromptTemplates::defaults());
  std::string describe(const std::string& case_id, const EmotionSegment& segment,
                       const std::string& media_ref) override;

 private:
  BackendSpec backend_;
  GatewayConfig cfg_;
  PromptTemplates templates_;
};

// The mock rule, exposed for tests: a script reads as ASD when at least two
// lines say the child kept playing with the toy instead of engaging.
Label mock_rule_label(const std::string& script_text);

}  // namespace scbu
