#include "scbu/emotion_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scbu/errors.hpp"
#include "scbu/jsonio.hpp"
#include "scbu/util.hpp"

namespace scbu {

std::vector<DynamicPoint> find_dynamic_points(
    const std::vector<std::pair<double, double>>& series, const EmotionConfig& cfg) {
  if (series.size() < 2) {
    throw TooShortError("valence series needs at least 2 samples, got " +
                        std::to_string(series.size()));
  }
  std::vector<DynamicPoint> points;
  for (std::size_t n = 1; n < series.size(); ++n) {
    double d = series[n].second - series[n - 1].second;
    if (cfg.derivative_mode == DerivativeMode::PerSecond) {
      double dt = series[n].first - series[n - 1].first;
      if (dt <= 0) continue;
      d /= dt;
    }
    if (d > cfg.alpha || d < -cfg.alpha) {
      points.push_back({series[n].first, d});
    }
  }
  return points;
}

std::vector<EmotionSegment> merge_segments(const std::vector<DynamicPoint>& points,
                                           const EmotionConfig& cfg, double duration_s) {
  std::vector<EmotionSegment> segments;
  for (const auto& p : points) {
    double lo = std::max(0.0, p.time_s - cfg.half_window_s);
    double hi = std::min(duration_s, p.time_s + cfg.half_window_s);
    if (hi <= lo) continue;
    // Touching intervals merge: the paradigm treats back-to-back windows as
    // one continuous mood swing.
    if (!segments.empty() && lo <= segments.back().end_s) {
      segments.back().end_s = std::max(segments.back().end_s, hi);
      segments.back().source_points.push_back(p);
    } else {
      EmotionSegment seg;
      seg.start_s = lo;
      seg.end_s = hi;
      seg.source_points = {p};
      segments.push_back(std::move(seg));
    }
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    segments[i].segment_id = "seg-" + std::to_string(i + 1);
  }
  return segments;
}

std::string StubDescriber::describe(const std::string&, const EmotionSegment& segment,
                                    const std::string&) {
  const DynamicPoint* strongest = nullptr;
  for (const auto& p : segment.source_points) {
    if (!strongest || std::abs(p.derivative) > std::abs(strongest->derivative)) {
      strongest = &p;
    }
  }
  if (!strongest) return "Emotional change of magnitude 0.000 at 0.000s.";
  return "Emotional change of magnitude " + format_fixed(std::abs(strongest->derivative), 3) +
         " at " + format_fixed(strongest->time_s, 3) + "s.";
}

FixtureDescriber::FixtureDescriber(const std::filesystem::path& store_file) {
  std::ifstream f(store_file, std::ios::binary);
  if (!f) throw DescriberUnavailable("cannot open describer store " + store_file.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  ojson j;
  try {
    j = ojson::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw DescriberUnavailable("describer store " + store_file.string() + ": " + e.what());
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    for (auto seg = it.value().begin(); seg != it.value().end(); ++seg) {
      store_[it.key()][seg.key()] = seg.value().get<std::string>();
    }
  }
}

std::string FixtureDescriber::describe(const std::string& case_id,
                                       const EmotionSegment& segment, const std::string&) {
  auto case_it = store_.find(case_id);
  if (case_it != store_.end()) {
    auto seg_it = case_it->second.find(segment.segment_id);
    if (seg_it != case_it->second.end()) return seg_it->second;
  }
  throw DescriberUnavailable("no recorded description for " + case_id + "/" +
                             segment.segment_id);
}

void describe_segments(std::vector<EmotionSegment>& segments, const std::string& case_id,
                       const std::string& media_ref, Describer& describer) {
  for (auto& seg : segments) {
    seg.description = describer.describe(case_id, seg, media_ref);
  }
}

void insert_emotion_lines(ScriptDocument& doc, const std::vector<EmotionSegment>& segments) {
  for (const auto& seg : segments) {
    if (!seg.description) continue;
    ScriptLine line;
    line.timestamp_s = seg.start_s;
    line.text = *seg.description;
    line.origin = LineOrigin::Emotion;
    line.segment_id = seg.segment_id;
    insert_line(doc, std::move(line));
  }
}

DynamicsStats dynamics_stats(const std::vector<DynamicPoint>& points,
                             const std::vector<InstructionEvent>& instructions) {
  DynamicsStats stats;
  stats.frequency = static_cast<int>(points.size());
  if (instructions.empty()) return stats;
  double first_ins = instructions.front().time_s;
  for (const auto& ins : instructions) first_ins = std::min(first_ins, ins.time_s);
  for (const auto& p : points) {
    if (p.time_s >= first_ins) {
      double latency = p.time_s - first_ins;
      if (!stats.latency_s || latency < *stats.latency_s) stats.latency_s = latency;
    }
  }
  return stats;
}

}  // namespace scbu
