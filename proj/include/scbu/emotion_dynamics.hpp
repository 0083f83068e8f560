// emotion_dynamics.hpp
//
// Finds the points where the child's valence changes fast, expands each
// into a short window, merges overlapping windows into segments, and asks
// a Describer for a sentence per segment. Descriptions become Emotion lines
// in the script; with no describer the script is untouched, which is the
// without-emotion ablation mode.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scbu/behavior_log.hpp"
#include "scbu/script_compiler.hpp"

namespace scbu {

enum class DerivativeMode { PerFrame, PerSecond };

struct EmotionConfig {
  double alpha = 0.175;       // |derivative| must exceed this
  double half_window_s = 0.5;  // each point expands to [t - h, t + h]
  DerivativeMode derivative_mode = DerivativeMode::PerFrame;
};

struct DynamicPoint {
  double time_s = 0.0;
  double derivative = 0.0;  // first difference under the configured mode
};

struct EmotionSegment {
  std::string segment_id;
  double start_s = 0.0;
  double end_s = 0.0;
  std::vector<DynamicPoint> source_points;
  std::optional<std::string> description;
};

struct DynamicsStats {
  int frequency = 0;                 // dynamic points in the session
  std::optional<double> latency_s;   // first instruction to first later point
};

// Pluggable sentence source for emotion segments. Implementations must be
// callable from multiple threads or document single-threaded use.
class Describer {
 public:
  virtual ~Describer() = default;
  virtual std::string describe(const std::string& case_id, const EmotionSegment& segment,
                               const std::string& media_ref) = 0;
};

// Deterministic offline describer; sentence derived from the strongest
// source point.
class StubDescriber : public Describer {
 public:
  std::string describe(const std::string& case_id, const EmotionSegment& segment,
                       const std::string& media_ref) override;
};

// Replays recorded descriptions keyed by case id and segment id. Missing
// keys throw DescriberUnavailable.
class FixtureDescriber : public Describer {
 public:
  explicit FixtureDescriber(const std::filesystem::path& store_file);
  std::string describe(const std::string& case_id, const EmotionSegment& segment,
                       const std::string& media_ref) override;

 private:
  std::map<std::string, std::map<std::string, std::string>> store_;
};

// One point per sample whose first-order difference exceeds alpha in
// magnitude. Throws TooShortError when the series has fewer than 2 samples.
std::vector<DynamicPoint> find_dynamic_points(
    const std::vector<std::pair<double, double>>& series, const EmotionConfig& cfg = {});

// Expand points to [t - h, t + h], union overlapping or touching intervals,
// clamp to [0, duration]. Output is sorted, disjoint, and carries the
// source points of each segment. Ids are "seg-1", "seg-2", ... in order.
std::vector<EmotionSegment> merge_segments(const std::vector<DynamicPoint>& points,
                                           const EmotionConfig& cfg, double duration_s);

// Fill each segment's description in order. Propagates DescriberUnavailable
// (callers continue with whatever was described so far).
void describe_segments(std::vector<EmotionSegment>& segments, const std::string& case_id,
                       const std::string& media_ref, Describer& describer);

// Described segments become Emotion lines at their start time; segments
// without a description contribute nothing.
void insert_emotion_lines(ScriptDocument& doc, const std::vector<EmotionSegment>& segments);

// Table-style summary: point count, and delay from the first instruction to
// the first point at or after it (absent without instructions or points).
DynamicsStats dynamics_stats(const std::vector<DynamicPoint>& points,
                             const std::vector<InstructionEvent>& instructions);

}  // namespace scbu
