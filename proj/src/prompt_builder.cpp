#include "scbu/prompt_builder.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "scbu/errors.hpp"
#include "scbu/util.hpp"

namespace scbu {

const char* to_string(Label label) {
  switch (label) {
    case Label::ASD: return "ASD";
    case Label::TD: return "TD";
    case Label::Abstain: return "Abstain";
  }
  return "?";
}

Label label_from_string(const std::string& s) {
  if (s == "ASD") return Label::ASD;
  if (s == "TD") return Label::TD;
  if (s == "Abstain") return Label::Abstain;
  throw ConfigError("unknown label '" + s + "'");
}

namespace {

PromptTemplates build_default_templates() {
  PromptTemplates t;
  t.system =
      "You are an experienced pediatric clinician reviewing a time-ordered script of a "
      "clinical observation session. Each line carries the timestamp of the event it "
      "describes. Read the events in temporal order and judge whether the observed child "
      "shows signs of autism spectrum disorder (ASD) or typical development (TD).";
  t.domain_knowledge =
      "Diagnostic criteria for autism spectrum disorder include persistent deficits in "
      "social communication and social interaction: deficits in social-emotional "
      "reciprocity, such as failure to respond to one's own name or to share affect; "
      "deficits in nonverbal communicative behaviors, such as reduced eye contact, "
      "pointing, and gesture use; and deficits in developing and maintaining "
      "relationships, such as failure to follow another person's gaze or point, or to "
      "show, bring, or share objects of interest. Restricted, repetitive patterns of "
      "behavior, such as absorption in a toy while ignoring social bids, further support "
      "the diagnosis.";
  t.human_experience =
      "In this observation room, typically developing children usually orient to their "
      "name within a few seconds, alternate gaze between the toy and the clinician, "
      "return a smile, point while checking the picture with their eyes, follow a point "
      "to the correct picture, share a discovery by looking back at the clinician, and "
      "get up or protest when the parent leaves. Children later diagnosed with ASD more "
      "often keep playing with the toy, respond late or not at all, avoid eye contact, "
      "seldom smile back, point rarely, and show fewer and later emotional changes.";
  t.format =
      "Explain your reasoning step by step, citing timestamps from the script. End your "
      "answer with exactly one final line of the form \"Judgment: ASD\" or "
      "\"Judgment: TD\" and write nothing after that line.";
  t.emotion_prompt =
      "You are an assistant that watches a short clip from a clinical observation "
      "session and describes the child's emotional state. Focus on facial expression, "
      "voice, and body language; describe only what is visible and audible in the clip.";
  t.emotion_question =
      "Describe the emotional change of the child in this clip in one or two sentences.";
  return t;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open template file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  // Files end with a newline; the in-memory form does not.
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

}  // namespace

const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates t = build_default_templates();
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t;
  t.system = read_text_file(dir / "system_prompt.txt");
  t.domain_knowledge = read_text_file(dir / "domain_knowledge.txt");
  t.human_experience = read_text_file(dir / "human_experience.txt");
  t.format = read_text_file(dir / "format_prompt.txt");
  t.emotion_prompt = read_text_file(dir / "emotion_prompt.txt");
  t.emotion_question = read_text_file(dir / "emotion_question.txt");
  return t;
}

namespace {

ScriptDocument strip_emotion_lines(const ScriptDocument& doc) {
  ScriptDocument out;
  out.case_id = doc.case_id;
  out.preamble = doc.preamble;
  for (const auto& line : doc.lines) {
    if (line.origin != LineOrigin::Emotion) out.lines.push_back(line);
  }
  return out;
}

std::string render_for_prompt(const ScriptDocument& doc, const PromptProfile& profile) {
  return profile.use_emotion_lines ? render_script(doc)
                                   : render_script(strip_emotion_lines(doc));
}

}  // namespace

PromptBundle build_prompt(const ScriptDocument& script, const PromptProfile& profile,
                          const std::vector<Exemplar>& exemplars, const PromptConfig& cfg,
                          const PromptTemplates& templates) {
  if (static_cast<int>(exemplars.size()) > cfg.max_exemplars) {
    throw ConfigError("exemplar count " + std::to_string(exemplars.size()) +
                      " exceeds configured maximum " + std::to_string(cfg.max_exemplars));
  }
  PromptBundle bundle;
  bundle.case_id = script.case_id;
  bundle.system_text = templates.system;

  // Interleave the two label streams so neither class dominates the tail.
  std::vector<const Exemplar*> ordered;
  if (cfg.interleave_exemplars) {
    std::vector<const Exemplar*> first, second;
    for (const auto& ex : exemplars) {
      (ex.label == cfg.first_exemplar_label ? first : second).push_back(&ex);
    }
    std::size_t i = 0, j = 0;
    while (i < first.size() || j < second.size()) {
      if (i < first.size()) ordered.push_back(first[i++]);
      if (j < second.size()) ordered.push_back(second[j++]);
    }
  } else {
    for (const auto& ex : exemplars) ordered.push_back(&ex);
  }
  for (const Exemplar* ex : ordered) {
    bundle.exemplar_blocks.push_back({render_for_prompt(ex->script, profile), ex->label});
  }

  bundle.script_text = render_for_prompt(script, profile);

  std::string domain;
  if (profile.use_domain_knowledge) {
    domain += "Domain knowledge:\n" + templates.domain_knowledge;
  }
  if (profile.use_human_experience) {
    if (!domain.empty()) domain += "\n\n";
    domain += "Clinical experience:\n" + templates.human_experience;
  }
  bundle.domain_text = std::move(domain);
  bundle.format_text = templates.format;

  std::string rendered = render_prompt(bundle);
  if (rendered.size() > cfg.context_budget_chars) {
    throw ContextOverflow(rendered.size(), cfg.context_budget_chars);
  }
  return bundle;
}

std::string render_user_message(const PromptBundle& bundle) {
  std::ostringstream out;
  int k = 0;
  for (const auto& [text, label] : bundle.exemplar_blocks) {
    out << "Example " << ++k << " (Judgment: " << to_string(label) << "):\n" << text << "\n";
  }
  out << "Script:\n" << bundle.script_text;
  if (!bundle.context_text.empty()) out << "\n" << bundle.context_text << "\n";
  if (!bundle.domain_text.empty()) out << "\n" << bundle.domain_text << "\n";
  else out << "\n";
  out << "\n" << bundle.format_text;
  return out.str();
}

std::string render_prompt(const PromptBundle& bundle) {
  return bundle.system_text + "\n\n" + render_user_message(bundle);
}

// ---------------------------------------------------------------------------
// Verdict parsing

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Byte offset after the last standalone occurrence of token, or npos.
std::size_t last_token(const std::string& lower_text, const std::string& token) {
  std::size_t best = std::string::npos;
  std::size_t pos = lower_text.find(token);
  while (pos != std::string::npos) {
    bool left_ok = pos == 0 || !word_char(lower_text[pos - 1]);
    std::size_t end = pos + token.size();
    bool right_ok = end >= lower_text.size() || !word_char(lower_text[end]);
    if (left_ok && right_ok) best = pos;
    pos = lower_text.find(token, pos + 1);
  }
  return best;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Verdict parse_verdict(const std::string& raw_text) {
  // Stage 1: the format-mandated final line.
  std::size_t end = raw_text.find_last_not_of(" \t\r\n");
  if (end != std::string::npos) {
    std::size_t line_start = raw_text.rfind('\n', end);
    line_start = line_start == std::string::npos ? 0 : line_start + 1;
    std::string line = lowercase(raw_text.substr(line_start, end - line_start + 1));
    if (line.find("judgment") != std::string::npos) {
      bool has_asd = last_token(line, "asd") != std::string::npos;
      bool has_td = last_token(line, "td") != std::string::npos;
      if (has_asd != has_td) {
        Verdict v;
        v.label = has_asd ? Label::ASD : Label::TD;
        v.rationale = trim(raw_text.substr(0, line_start));
        return v;
      }
    }
  }
  // Stage 2: last standalone label token anywhere.
  std::string lower = lowercase(raw_text);
  std::size_t asd = last_token(lower, "asd");
  std::size_t td = last_token(lower, "td");
  if (asd == std::string::npos && td == std::string::npos) {
    throw UnparseableVerdict("no label token in model answer");
  }
  Verdict v;
  v.label = (asd != std::string::npos && (td == std::string::npos || asd > td)) ? Label::ASD
                                                                                : Label::TD;
  v.rationale = trim(raw_text);
  return v;
}

}  // namespace scbu
