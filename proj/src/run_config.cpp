#include "scbu/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "scbu/errors.hpp"
#include "scbu/jsonio.hpp"

namespace scbu {

const char* to_string(EnsembleMode m) {
  switch (m) {
    case EnsembleMode::None: return "none";
    case EnsembleMode::Vote: return "vote";
    case EnsembleMode::Agents: return "agents";
  }
  return "none";
}

EnsembleMode ensemble_mode_from_string(const std::string& s) {
  if (s == "none") return EnsembleMode::None;
  if (s == "vote") return EnsembleMode::Vote;
  if (s == "agents") return EnsembleMode::Agents;
  throw ConfigError("unknown ensemble mode '" + s + "' (expected none, vote, or agents)");
}

const BackendSpec& select_backend(const RunConfig& cfg, const std::string& name) {
  if (cfg.backends.empty()) throw ConfigError("no backends configured");
  if (name.empty()) return cfg.backends.front();
  for (const BackendSpec& b : cfg.backends) {
    if (b.name == name) return b;
  }
  throw ConfigError("no backend named '" + name + "' in the configured roster");
}

namespace {

double get_double(const ojson& obj, const char* key, double fallback, const std::string& ctx) {
  if (!obj.contains(key)) return fallback;
  return require_double<ConfigError>(obj, key, ctx);
}

int get_int(const ojson& obj, const char* key, int fallback, const std::string& ctx) {
  if (!obj.contains(key)) return fallback;
  return require_int<ConfigError>(obj, key, ctx);
}

bool get_bool(const ojson& obj, const char* key, bool fallback, const std::string& ctx) {
  if (!obj.contains(key)) return fallback;
  return require_bool<ConfigError>(obj, key, ctx);
}

std::string get_string(const ojson& obj, const char* key, const std::string& fallback,
                       const std::string& ctx) {
  if (!obj.contains(key)) return fallback;
  return require_string<ConfigError>(obj, key, ctx);
}

std::filesystem::path existing_path(const ojson& obj, const char* key, const std::string& ctx) {
  std::filesystem::path p = require_string<ConfigError>(obj, key, ctx);
  if (!std::filesystem::exists(p)) {
    throw ConfigError(ctx + "." + key + ": path '" + p.string() + "' does not exist");
  }
  return p;
}

void parse_parser(const ojson& j, ParserConfig& cfg) {
  const std::string ctx = "parser";
  reject_unknown_keys<ConfigError>(j,
                                   {"look_angle_deg", "look_dwell_s", "look_break_s",
                                    "point_dwell_s", "point_precise_deg", "smile_dwell_s",
                                    "leave_gap_s", "chase_speed_px_s", "chase_dwell_s",
                                    "door_roi"},
                                   ctx);
  cfg.look_angle_deg = get_double(j, "look_angle_deg", cfg.look_angle_deg, ctx);
  cfg.look_dwell_s = get_double(j, "look_dwell_s", cfg.look_dwell_s, ctx);
  cfg.look_break_s = get_double(j, "look_break_s", cfg.look_break_s, ctx);
  cfg.point_dwell_s = get_double(j, "point_dwell_s", cfg.point_dwell_s, ctx);
  cfg.point_precise_deg = get_double(j, "point_precise_deg", cfg.point_precise_deg, ctx);
  cfg.smile_dwell_s = get_double(j, "smile_dwell_s", cfg.smile_dwell_s, ctx);
  cfg.leave_gap_s = get_double(j, "leave_gap_s", cfg.leave_gap_s, ctx);
  cfg.chase_speed_px_s = get_double(j, "chase_speed_px_s", cfg.chase_speed_px_s, ctx);
  cfg.chase_dwell_s = get_double(j, "chase_dwell_s", cfg.chase_dwell_s, ctx);
  cfg.door_roi = get_string(j, "door_roi", cfg.door_roi, ctx);
}

void parse_script(const ojson& j, ScriptConfig& cfg) {
  const std::string ctx = "script";
  reject_unknown_keys<ConfigError>(j,
                                   {"window_s", "sa_window_s", "max_response_lines",
                                    "keep_looking_s", "doctor_roi", "door_roi"},
                                   ctx);
  cfg.window_s = get_double(j, "window_s", cfg.window_s, ctx);
  cfg.window_overrides[Paradigm::SA] =
      get_double(j, "sa_window_s", cfg.window_for(Paradigm::SA), ctx);
  cfg.max_response_lines = get_int(j, "max_response_lines", cfg.max_response_lines, ctx);
  cfg.keep_looking_s = get_double(j, "keep_looking_s", cfg.keep_looking_s, ctx);
  cfg.doctor_roi = get_string(j, "doctor_roi", cfg.doctor_roi, ctx);
  cfg.door_roi = get_string(j, "door_roi", cfg.door_roi, ctx);
}

void parse_emotion(const ojson& j, EmotionConfig& cfg) {
  const std::string ctx = "emotion";
  reject_unknown_keys<ConfigError>(j, {"alpha", "half_window_s", "derivative_mode"}, ctx);
  cfg.alpha = get_double(j, "alpha", cfg.alpha, ctx);
  cfg.half_window_s = get_double(j, "half_window_s", cfg.half_window_s, ctx);
  const std::string mode = get_string(j, "derivative_mode", "", ctx);
  if (mode == "per-frame") {
    cfg.derivative_mode = DerivativeMode::PerFrame;
  } else if (mode == "per-second") {
    cfg.derivative_mode = DerivativeMode::PerSecond;
  } else if (!mode.empty()) {
    throw ConfigError("emotion.derivative_mode: expected per-frame or per-second, got '" +
                      mode + "'");
  }
}

void parse_profile(const ojson& j, PromptProfile& cfg) {
  const std::string ctx = "profile";
  reject_unknown_keys<ConfigError>(
      j, {"use_domain_knowledge", "use_human_experience", "use_emotion_lines"}, ctx);
  cfg.use_domain_knowledge = get_bool(j, "use_domain_knowledge", cfg.use_domain_knowledge, ctx);
  cfg.use_human_experience = get_bool(j, "use_human_experience", cfg.use_human_experience, ctx);
  cfg.use_emotion_lines = get_bool(j, "use_emotion_lines", cfg.use_emotion_lines, ctx);
}

void parse_prompt(const ojson& j, PromptConfig& cfg) {
  const std::string ctx = "prompt";
  reject_unknown_keys<ConfigError>(j,
                                   {"max_exemplars", "interleave_exemplars",
                                    "first_exemplar_label", "context_budget_chars"},
                                   ctx);
  cfg.max_exemplars = get_int(j, "max_exemplars", cfg.max_exemplars, ctx);
  cfg.interleave_exemplars =
      get_bool(j, "interleave_exemplars", cfg.interleave_exemplars, ctx);
  const std::string label = get_string(j, "first_exemplar_label", "", ctx);
  if (!label.empty()) cfg.first_exemplar_label = label_from_string(label);
  cfg.context_budget_chars = static_cast<std::size_t>(get_int(
      j, "context_budget_chars", static_cast<int>(cfg.context_budget_chars), ctx));
}

void parse_gateway(const ojson& j, GatewayConfig& cfg) {
  const std::string ctx = "gateway";
  reject_unknown_keys<ConfigError>(
      j, {"retries", "backoff_initial_ms", "timeout_s", "max_parallel", "min_interval_ms"},
      ctx);
  cfg.retries = get_int(j, "retries", cfg.retries, ctx);
  cfg.backoff_initial_ms = get_int(j, "backoff_initial_ms", cfg.backoff_initial_ms, ctx);
  cfg.timeout_s = get_int(j, "timeout_s", cfg.timeout_s, ctx);
  cfg.max_parallel = get_int(j, "max_parallel", cfg.max_parallel, ctx);
  cfg.min_interval_ms = get_int(j, "min_interval_ms", cfg.min_interval_ms, ctx);
}

BackendSpec parse_backend(const ojson& j, std::size_t index) {
  const std::string ctx = "backends[" + std::to_string(index) + "]";
  if (j.contains("api_key") || j.contains("token") || j.contains("secret")) {
    throw ConfigError(ctx +
                      ": secrets do not belong in config files; set the environment "
                      "variable named by api_key_env instead");
  }
  reject_unknown_keys<ConfigError>(j,
                                   {"name", "kind", "endpoint", "model", "api_key_env",
                                    "fixture_dir", "max_tokens", "temperature",
                                    "allows_exemplars"},
                                   ctx);
  BackendSpec spec;
  spec.name = get_string(j, "name", spec.name, ctx);
  spec.kind = backend_kind_from_string(get_string(j, "kind", to_string(spec.kind), ctx));
  spec.endpoint = get_string(j, "endpoint", spec.endpoint, ctx);
  spec.model = get_string(j, "model", spec.model, ctx);
  spec.api_key_env = get_string(j, "api_key_env", spec.api_key_env, ctx);
  if (j.contains("fixture_dir")) spec.fixture_dir = existing_path(j, "fixture_dir", ctx);
  spec.max_tokens = get_int(j, "max_tokens", spec.max_tokens, ctx);
  spec.temperature = get_double(j, "temperature", spec.temperature, ctx);
  spec.allows_exemplars = get_bool(j, "allows_exemplars", spec.allows_exemplars, ctx);
  return spec;
}

void parse_ensemble(const ojson& j, RunConfig& cfg) {
  const std::string ctx = "ensemble";
  reject_unknown_keys<ConfigError>(j,
                                   {"mode", "tie_break", "max_rounds", "decision_maker",
                                    "decision_maker_full_history", "rationale_limit_chars",
                                    "fallback_tie_break"},
                                   ctx);
  cfg.ensemble = ensemble_mode_from_string(get_string(j, "mode", "none", ctx));
  const std::string tie = get_string(j, "tie_break", "", ctx);
  if (!tie.empty()) {
    cfg.vote.tie_break = label_from_string(tie);
    if (cfg.vote.tie_break == Label::Abstain) {
      throw ConfigError("ensemble.tie_break must be ASD or TD");
    }
  }
  cfg.agents.max_rounds = get_int(j, "max_rounds", cfg.agents.max_rounds, ctx);
  cfg.decision_maker = get_string(j, "decision_maker", cfg.decision_maker, ctx);
  cfg.agents.decision_maker_full_history = get_bool(
      j, "decision_maker_full_history", cfg.agents.decision_maker_full_history, ctx);
  cfg.agents.rationale_limit_chars =
      get_int(j, "rationale_limit_chars", cfg.agents.rationale_limit_chars, ctx);
  const std::string fallback = get_string(j, "fallback_tie_break", "", ctx);
  if (!fallback.empty()) {
    cfg.agents.fallback_vote.tie_break = label_from_string(fallback);
    if (cfg.agents.fallback_vote.tie_break == Label::Abstain) {
      throw ConfigError("ensemble.fallback_tie_break must be ASD or TD");
    }
  }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw ConfigError("cannot read config file '" + file.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  ojson j;
  try {
    j = ojson::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(file.string() + ": invalid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError(file.string() + ": config must be a JSON object");

  const std::string ctx = "config";
  reject_unknown_keys<ConfigError>(
      j,
      {"schema_version", "templates_dir", "prompts_dir", "parser", "script", "emotion",
       "profile", "prompt", "gateway", "backends", "ensemble", "dataset", "out", "eval",
       "audit"},
      ctx);
  check_schema_version<ConfigError>(j, ctx);

  RunConfig cfg;
  if (j.contains("templates_dir")) {
    cfg.pipeline.templates = TemplateTable::load(existing_path(j, "templates_dir", ctx));
  }
  if (j.contains("prompts_dir")) {
    cfg.pipeline.prompts = PromptTemplates::load(existing_path(j, "prompts_dir", ctx));
  }
  if (j.contains("parser")) parse_parser(j.at("parser"), cfg.pipeline.parser);
  if (j.contains("script")) parse_script(j.at("script"), cfg.pipeline.script);
  if (j.contains("emotion")) parse_emotion(j.at("emotion"), cfg.pipeline.emotion);
  if (j.contains("profile")) parse_profile(j.at("profile"), cfg.pipeline.profile);
  if (j.contains("prompt")) parse_prompt(j.at("prompt"), cfg.pipeline.prompt);
  if (j.contains("gateway")) parse_gateway(j.at("gateway"), cfg.pipeline.gateway);
  cfg.audit = get_bool(j, "audit", cfg.audit, ctx);

  if (j.contains("backends")) {
    const ojson& arr = j.at("backends");
    if (!arr.is_array() || arr.empty()) {
      throw ConfigError("config.backends must be a non-empty array");
    }
    cfg.backends.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.backends.push_back(parse_backend(arr[i], i));
    }
    std::set<std::string> names;
    for (const BackendSpec& b : cfg.backends) {
      if (!names.insert(b.name).second) {
        throw ConfigError("config.backends: duplicate backend name '" + b.name + "'");
      }
    }
  }
  if (j.contains("ensemble")) parse_ensemble(j.at("ensemble"), cfg);

  if (j.contains("dataset")) cfg.dataset = existing_path(j, "dataset", ctx);
  if (j.contains("out")) cfg.out = get_string(j, "out", cfg.out.string(), ctx);

  if (j.contains("eval")) {
    const ojson& ev = j.at("eval");
    reject_unknown_keys<ConfigError>(ev, {"protocol", "seed", "alphas"}, "eval");
    cfg.protocol = get_string(ev, "protocol", cfg.protocol, "eval");
    if (cfg.protocol != "loocv" && cfg.protocol != "fewshot" && cfg.protocol != "sweep") {
      throw ConfigError("eval.protocol must be loocv, fewshot, or sweep");
    }
    cfg.fewshot_seed = static_cast<std::uint64_t>(
        get_int(ev, "seed", static_cast<int>(cfg.fewshot_seed), "eval"));
    if (ev.contains("alphas")) {
      const ojson& arr = ev.at("alphas");
      if (!arr.is_array()) throw ConfigError("eval.alphas must be an array of numbers");
      cfg.alphas.clear();
      for (const auto& a : arr) {
        if (!a.is_number()) throw ConfigError("eval.alphas must be an array of numbers");
        cfg.alphas.push_back(a.get<double>());
      }
    }
  }

  cfg.pipeline.backend = cfg.backends.front();
  cfg.agents.gateway = cfg.pipeline.gateway;
  return cfg;
}

}  // namespace scbu
