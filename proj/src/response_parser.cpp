#include "scbu/response_parser.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace scbu {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::LookAtObject: return "look_at_object";
    case EventKind::PointAtObject: return "point_at_object";
    case EventKind::Smile: return "smile";
    case EventKind::Speak: return "speak";
    case EventKind::Leave: return "leave";
    case EventKind::Chase: return "chase";
  }
  return "?";
}

const char* to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::Look: return "look";
    case MeasureKind::Point: return "point";
    case MeasureKind::Chase: return "chase";
  }
  return "?";
}

namespace {

// Paradigm containing time t, halfopen [start, end). Returns nullptr when t
// falls between declared segments.
const ParadigmSegment* segment_at(const SessionManifest& manifest, double t) {
  for (const auto& seg : manifest.paradigms) {
    if (t >= seg.start_s && t < seg.end_s) return &seg;
  }
  return nullptr;
}

bool kind_permitted(EventKind kind, Paradigm p) {
  switch (kind) {
    case EventKind::LookAtObject:
      return true;
    case EventKind::PointAtObject:
      return p == Paradigm::IG || p == Paradigm::IJA;
    case EventKind::Smile:
      return p == Paradigm::SS;
    case EventKind::Speak:
      return p == Paradigm::RN;
    case EventKind::Leave:
    case EventKind::Chase:
      return p == Paradigm::SA;
  }
  return false;
}

bool gated(const SessionManifest& manifest, EventKind kind, double start_s) {
  const ParadigmSegment* seg = segment_at(manifest, start_s);
  return seg != nullptr && kind_permitted(kind, seg->paradigm);
}

// A run of consecutive qualifying frames, keyed so that e.g. looks at
// different targets never merge. Frames cover [t, t + 1/fps).
struct Run {
  std::string key;
  double start_s = 0.0;
  double end_s = 0.0;
  bool precise_all = true;  // point runs: every frame's gaze confirms target
};

// Collects maximal runs of frames satisfying `classify` (empty key means
// the frame does not qualify). Breaks shorter than bridge_s do not end a
// run with the same key.
template <class Classify>
std::vector<Run> collect_runs(const BehaviorLog& log, double bridge_s, Classify classify) {
  const double dt = 1.0 / log.fps;
  std::vector<Run> runs;
  std::optional<Run> open;
  double gap_start = 0.0;
  bool in_gap = false;
  for (const auto& frame : log.frames) {
    auto [key, precise] = classify(frame);
    if (!key.empty() && open && key == open->key &&
        (!in_gap || frame.timestamp_s - gap_start <= bridge_s)) {
      open->end_s = frame.timestamp_s + dt;
      open->precise_all = open->precise_all && precise;
      in_gap = false;
      continue;
    }
    if (!key.empty()) {
      if (open) runs.push_back(*open);
      open = Run{key, frame.timestamp_s, frame.timestamp_s + dt, precise};
      in_gap = false;
      continue;
    }
    if (open && !in_gap) {
      in_gap = true;
      gap_start = frame.timestamp_s;
    } else if (open && in_gap && frame.timestamp_s - gap_start > bridge_s) {
      runs.push_back(*open);
      open.reset();
      in_gap = false;
    }
  }
  if (open) runs.push_back(*open);
  return runs;
}

const PersonState* child_in(const FrameRecord& frame) {
  const PersonState* ps = frame.find(Role::Child);
  return (ps && ps->present) ? ps : nullptr;
}

void detect_looks(const BehaviorLog& log, const SessionManifest& manifest,
                  const ParserConfig& cfg, const PersonId& child,
                  std::vector<ResponseEvent>& out) {
  auto runs = collect_runs(log, cfg.look_break_s, [&](const FrameRecord& f) {
    const PersonState* ps = child_in(f);
    if (ps && ps->gaze_target.kind == GazeTarget::Kind::ObjectRoi && ps->gaze_angle_deg &&
        *ps->gaze_angle_deg <= cfg.look_angle_deg) {
      return std::pair<std::string, bool>{ps->gaze_target.roi, true};
    }
    return std::pair<std::string, bool>{{}, true};
  });
  for (const auto& run : runs) {
    if (run.end_s - run.start_s < cfg.look_dwell_s) continue;
    if (!gated(manifest, EventKind::LookAtObject, run.start_s)) continue;
    ResponseEvent ev;
    ev.kind = EventKind::LookAtObject;
    ev.start_s = run.start_s;
    ev.end_s = run.end_s;
    ev.person = child;
    ev.roi = run.key;
    out.push_back(std::move(ev));
  }
}

void detect_points(const BehaviorLog& log, const SessionManifest& manifest,
                   const ParserConfig& cfg, const PersonId& child,
                   std::vector<ResponseEvent>& out) {
  auto runs = collect_runs(log, 0.0, [&](const FrameRecord& f) {
    const PersonState* ps = child_in(f);
    if (ps && ps->gesture == Gesture::Pointing && ps->pointing_target) {
      bool precise = ps->gaze_target.kind == GazeTarget::Kind::ObjectRoi &&
                     ps->gaze_target.roi == *ps->pointing_target && ps->gaze_angle_deg &&
                     *ps->gaze_angle_deg <= cfg.point_precise_deg;
      return std::pair<std::string, bool>{*ps->pointing_target, precise};
    }
    return std::pair<std::string, bool>{{}, true};
  });
  for (const auto& run : runs) {
    if (run.end_s - run.start_s < cfg.point_dwell_s) continue;
    if (!gated(manifest, EventKind::PointAtObject, run.start_s)) continue;
    ResponseEvent ev;
    ev.kind = EventKind::PointAtObject;
    ev.start_s = run.start_s;
    ev.end_s = run.end_s;
    ev.person = child;
    ev.roi = run.key;
    ev.precise = run.precise_all;
    out.push_back(std::move(ev));
  }
}

void detect_smiles(const BehaviorLog& log, const SessionManifest& manifest,
                   const ParserConfig& cfg, const PersonId& child,
                   std::vector<ResponseEvent>& out) {
  auto runs = collect_runs(log, 0.0, [&](const FrameRecord& f) {
    const PersonState* ps = child_in(f);
    bool happy = ps && ps->expression == Expression::Happy;
    return std::pair<std::string, bool>{happy ? "smile" : "", true};
  });
  for (const auto& run : runs) {
    if (run.end_s - run.start_s < cfg.smile_dwell_s) continue;
    if (!gated(manifest, EventKind::Smile, run.start_s)) continue;
    ResponseEvent ev;
    ev.kind = EventKind::Smile;
    ev.start_s = run.start_s;
    ev.end_s = run.end_s;
    ev.person = child;
    out.push_back(std::move(ev));
  }
}

void pass_speech(const BehaviorLog& log, const SessionManifest& manifest,
                 std::vector<ResponseEvent>& out) {
  for (const auto& seg : log.speech) {
    if (!gated(manifest, EventKind::Speak, seg.start_s)) continue;
    ResponseEvent ev;
    ev.kind = EventKind::Speak;
    ev.start_s = seg.start_s;
    ev.end_s = seg.end_s;
    ev.person = seg.speaker;
    ev.text = seg.text;
    out.push_back(std::move(ev));
  }
}

// First timestamp of every absence gap of at least leave_gap_s, per person.
// A person absent from the first frame onward never "leaves".
std::vector<ResponseEvent> detect_leaves(const BehaviorLog& log, const SessionManifest& manifest,
                                         const ParserConfig& cfg) {
  std::vector<ResponseEvent> leaves;
  const double duration = log.duration_s();
  for (const auto& person : manifest.persons) {
    bool was_present = false;
    bool in_gap = false;
    double gap_start = 0.0;
    auto close_gap = [&](double gap_end) {
      if (in_gap && was_present && gap_end - gap_start >= cfg.leave_gap_s &&
          gated(manifest, EventKind::Leave, gap_start)) {
        ResponseEvent ev;
        ev.kind = EventKind::Leave;
        ev.start_s = gap_start;
        ev.end_s = gap_start;
        ev.person = person;
        leaves.push_back(std::move(ev));
      }
      in_gap = false;
    };
    for (const auto& frame : log.frames) {
      const PersonState* ps = nullptr;
      for (const auto& cand : frame.persons) {
        if (cand.person == person) ps = &cand;
      }
      bool present = ps && ps->present;
      if (present) {
        close_gap(frame.timestamp_s);
        was_present = true;
      } else if (!in_gap) {
        in_gap = true;
        gap_start = frame.timestamp_s;
      }
    }
    close_gap(duration);
  }
  return leaves;
}

void detect_chases(const BehaviorLog& log, const SessionManifest& manifest,
                   const ParserConfig& cfg, const PersonId& child,
                   const std::vector<ResponseEvent>& leaves, std::vector<ResponseEvent>& out) {
  const ObjectRoi* door = manifest.find_roi(cfg.door_roi);
  if (!door || !door->position_px || leaves.empty()) return;
  const double dx = (*door->position_px)[0];
  const double dy = (*door->position_px)[1];
  double first_leave = leaves.front().start_s;
  for (const auto& ev : leaves) first_leave = std::min(first_leave, ev.start_s);

  // Qualify frame i when the child closes distance to the door between
  // frames i and i+1 faster than chase_speed_px_s.
  auto door_dist = [&](const PersonState& ps) {
    return std::hypot((*ps.position_px)[0] - dx, (*ps.position_px)[1] - dy);
  };
  const double dt = 1.0 / log.fps;
  std::vector<Run> runs;
  std::optional<Run> open;
  for (std::size_t i = 0; i + 1 < log.frames.size(); ++i) {
    const PersonState* a = child_in(log.frames[i]);
    const PersonState* b = child_in(log.frames[i + 1]);
    bool qualifies = false;
    if (a && b && a->position_px && b->position_px &&
        log.frames[i].timestamp_s >= first_leave) {
      double speed_toward = (door_dist(*a) - door_dist(*b)) / dt;
      qualifies = speed_toward > cfg.chase_speed_px_s;
    }
    if (qualifies) {
      if (open) {
        open->end_s = log.frames[i + 1].timestamp_s;
      } else {
        open = Run{"chase", log.frames[i].timestamp_s, log.frames[i + 1].timestamp_s, true};
      }
    } else if (open) {
      runs.push_back(*open);
      open.reset();
    }
  }
  if (open) runs.push_back(*open);

  for (const auto& run : runs) {
    if (run.end_s - run.start_s < cfg.chase_dwell_s) continue;
    if (!gated(manifest, EventKind::Chase, run.start_s)) continue;
    ResponseEvent ev;
    ev.kind = EventKind::Chase;
    ev.start_s = run.start_s;
    ev.end_s = run.end_s;
    ev.person = child;
    out.push_back(std::move(ev));
  }
}

}  // namespace

std::vector<ResponseEvent> parse_events(const BehaviorLog& log, const SessionManifest& manifest,
                                        const ParserConfig& cfg) {
  std::vector<ResponseEvent> events;
  if (log.frames.empty()) return events;
  const PersonId& child = manifest.child();

  detect_looks(log, manifest, cfg, child, events);
  detect_points(log, manifest, cfg, child, events);
  detect_smiles(log, manifest, cfg, child, events);
  pass_speech(log, manifest, events);
  std::vector<ResponseEvent> leaves = detect_leaves(log, manifest, cfg);
  detect_chases(log, manifest, cfg, child, leaves, events);
  events.insert(events.end(), leaves.begin(), leaves.end());

  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    if (a.start_s != b.start_s) return a.start_s < b.start_s;
    if (a.end_s != b.end_s) return a.end_s < b.end_s;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return events;
}

std::vector<ResponseMeasure> measure_responses(const std::vector<ResponseEvent>& events,
                                               const SessionManifest& manifest) {
  auto kind_of = [](const ResponseEvent& ev) -> std::optional<MeasureKind> {
    switch (ev.kind) {
      case EventKind::LookAtObject: return MeasureKind::Look;
      case EventKind::PointAtObject: return MeasureKind::Point;
      case EventKind::Chase: return MeasureKind::Chase;
      default: return std::nullopt;
    }
  };
  std::vector<ResponseMeasure> measures;
  for (const auto& ins : manifest.all_instructions()) {
    for (MeasureKind want : {MeasureKind::Look, MeasureKind::Point, MeasureKind::Chase}) {
      const ResponseEvent* best = nullptr;
      for (const auto& ev : events) {
        auto k = kind_of(ev);
        if (!k || *k != want) continue;
        if (ev.start_s < ins.time_s) continue;
        if (!best || ev.start_s < best->start_s) best = &ev;
      }
      if (best) {
        ResponseMeasure m;
        m.event_kind = want;
        m.latency_s = best->start_s - ins.time_s;
        m.duration_s = best->end_s - best->start_s;
        measures.push_back(m);
      }
    }
  }
  return measures;
}

ojson events_to_json(const std::vector<ResponseEvent>& events) {
  ojson arr = ojson::array();
  for (const auto& ev : events) {
    ojson j;
    j["kind"] = to_string(ev.kind);
    j["start_s"] = ev.start_s;
    j["end_s"] = ev.end_s;
    j["person"] = std::string(to_string(ev.person.role)) + ":" + ev.person.label;
    if (!ev.roi.empty()) j["roi"] = ev.roi;
    if (!ev.text.empty()) j["text"] = ev.text;
    if (ev.kind == EventKind::PointAtObject) j["precise"] = ev.precise;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace scbu
