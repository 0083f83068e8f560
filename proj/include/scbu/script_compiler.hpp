// script_compiler.hpp
//
// Turns instructions and parsed response events into the timestamped script
// body. Every line's wording comes from a fixed template table: instruction
// sentences keyed by session code, response sentences keyed by (paradigm,
// response index). The wording is pinned by golden tests and deliberately
// kept verbatim, grammar warts included; downstream consumers key on exact
// text, so fidelity beats fluency here.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scbu/behavior_log.hpp"
#include "scbu/response_parser.hpp"

namespace scbu {

// Editable sentence resource. defaults() is compiled in; load() reads the
// same structure from a JSON file so deployments can reword lines.
class TemplateTable {
 public:
  static const TemplateTable& defaults();
  static TemplateTable load(const std::filesystem::path& path);

  // Throw TemplateError when the key has no sentence.
  const std::string& instruction_text(const std::string& session_code) const;
  const std::string& response_text(Paradigm paradigm, int response_index) const;

  bool has_response(Paradigm paradigm, int response_index) const;
  std::string to_json_text() const;  // canonical serialization of the table

  std::map<std::string, std::string> instructions;          // session code -> text
  std::map<std::pair<int, int>, std::string> responses;     // (paradigm, index) -> text
};

struct ScriptConfig {
  // Seconds after an instruction during which events count as its response.
  // Separation anxiety runs much longer than the prompt-response paradigms.
  double window_s = 5.0;
  std::map<Paradigm, double> window_overrides = {{Paradigm::SA, 20.0}};

  // Cap on response lines per instruction in multi-response paradigms.
  int max_response_lines = 3;

  // ROI names with fixed meaning to the classifier.
  std::string doctor_roi = "doctor";
  std::string door_roi = "door";

  // A look this long reads as "keeps looking" rather than a glance.
  double keep_looking_s = 2.0;

  double window_for(Paradigm p) const {
    auto it = window_overrides.find(p);
    return it == window_overrides.end() ? window_s : it->second;
  }
};

enum class LineOrigin { Preamble, Instruction, Response, Emotion };

struct ScriptLine {
  double timestamp_s = 0.0;
  std::string text;
  LineOrigin origin = LineOrigin::Response;
  std::string session_code;    // Instruction lines
  Paradigm paradigm = Paradigm::RN;  // Response lines
  int response_index = 0;            // Response lines
  std::string segment_id;      // Emotion lines
};

struct ScriptDocument {
  std::string case_id;
  std::string preamble;
  std::vector<ScriptLine> lines;  // sorted by (timestamp, origin rank)
};

// Classification outcome for one instruction window.
struct ResponseMatch {
  int response_index = 0;
  double anchor_s = 0.0;  // first qualifying event start, or window end
};

// Maps the events inside one response window to template indices.
// target_roi is the instruction's target; single-response paradigms yield
// exactly one match (possibly the fallback), multi-response paradigms up to
// max_lines matches in anchor order, or the fallback when nothing matched.
std::vector<ResponseMatch> classify_response(Paradigm paradigm,
                                             const std::vector<ResponseEvent>& window_events,
                                             const std::optional<std::string>& target_roi,
                                             double window_end_s, const ScriptConfig& cfg = {});

// Full document: preamble, one instruction line per manifest instruction,
// response lines per the classifier. Deterministic and idempotent.
ScriptDocument compile_script(const std::vector<ResponseEvent>& events,
                              const SessionManifest& manifest, const ScriptConfig& cfg = {},
                              const TemplateTable& templates = TemplateTable::defaults());

// "The child is a {age}-month-old {gender}. ..." with gender worded as
// boy/girl.
std::string make_preamble(const SessionManifest& manifest);

// Insert an already-sorted document line, keeping (timestamp, origin rank)
// order stable. Used by the emotion pipeline stage.
void insert_line(ScriptDocument& doc, ScriptLine line);

// Plain-text rendering: preamble paragraph, then "[mm:ss] sentence" lines.
std::string render_script(const ScriptDocument& doc);

}  // namespace scbu
