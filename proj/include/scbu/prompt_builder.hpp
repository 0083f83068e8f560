// prompt_builder.hpp
//
// Assembles the four-part detection prompt: system text, script content,
// domain text (knowledge and clinical-experience subsections), and format
// text, with optional labeled exemplar scripts between system and script.
// Also parses the model's verdict line back out of free-form answers.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scbu/script_compiler.hpp"

namespace scbu {

enum class Label { ASD, TD, Abstain };

const char* to_string(Label label);
Label label_from_string(const std::string& s);

// The six editable wording resources. defaults() is compiled in; load()
// reads one file per part from a directory.
struct PromptTemplates {
  std::string system;
  std::string domain_knowledge;
  std::string human_experience;
  std::string format;
  std::string emotion_prompt;    // system text for the segment describer
  std::string emotion_question;  // user question for the segment describer

  static const PromptTemplates& defaults();
  static PromptTemplates load(const std::filesystem::path& dir);
};

struct PromptProfile {
  bool use_domain_knowledge = true;
  bool use_human_experience = true;
  bool use_emotion_lines = true;
};

struct PromptConfig {
  int max_exemplars = 20;
  bool interleave_exemplars = true;
  Label first_exemplar_label = Label::ASD;
  // Budget on the rendered prompt, in bytes. Generous default; HTTP
  // backends can lower it per model.
  std::size_t context_budget_chars = 200000;
};

struct Exemplar {
  ScriptDocument script;
  Label label = Label::ASD;
};

struct PromptBundle {
  std::string case_id;  // provenance, carried from the script
  std::string system_text;
  std::vector<std::pair<std::string, Label>> exemplar_blocks;  // rendered script, label
  std::string script_text;
  std::string context_text;  // extra material after the script (panel discussion etc.)
  std::string domain_text;   // empty when both subsections are off
  std::string format_text;
};

// Deterministic assembly. Emotion lines are dropped from the script and
// exemplar renderings when the profile disables them. Throws ContextOverflow
// when the rendered prompt exceeds cfg.context_budget_chars and ConfigError
// when more exemplars are passed than cfg.max_exemplars.
PromptBundle build_prompt(const ScriptDocument& script, const PromptProfile& profile,
                          const std::vector<Exemplar>& exemplars = {},
                          const PromptConfig& cfg = {},
                          const PromptTemplates& templates = PromptTemplates::defaults());

// Full prompt text, exactly what a text-completion backend would see.
std::string render_prompt(const PromptBundle& bundle);

// Chat split: system text goes in the system turn, everything else in the
// user turn.
std::string render_user_message(const PromptBundle& bundle);

struct Verdict {
  Label label = Label::Abstain;
  std::string rationale;
};

// Reads the judgment out of a model answer: the format-mandated final
// "Judgment: X" line when present, otherwise the last label token anywhere
// in the text. Throws UnparseableVerdict when neither label appears.
Verdict parse_verdict(const std::string& raw_text);

}  // namespace scbu
