// Synthetic session generator. Produces schedule-complete sessions whose
// response timing, gaze, smiles, speech, chases, and valence dynamics differ
// between the TD and ASD profiles in the directions the group-statistics
// table expects, scaled so responses land inside the classification windows.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scbu/errors.hpp"
#include "scbu/eval_harness.hpp"
#include "scbu/jsonio.hpp"
#include "scbu/util.hpp"

namespace scbu {

namespace {

constexpr double kSessionSeconds = 152.0;
constexpr double kParentLeaveTime = 115.0;
constexpr double kChaseSpeedPxS = 70.0;  // comfortably above the detection floor

struct SynthProfile {
  double p_respond;      // responds to an instruction at all
  double p_point;        // adds a point in IG / IJA
  double p_smile;        // adds a smile in SS
  double p_speak;        // adds a greeting in RN
  double p_look_door;    // looks at the door after the parting instruction
  double p_second_look;  // shifts gaze to the doctor after an IJA look

  double look_lat_mu, look_lat_sd, look_lat_lo, look_lat_hi;
  double look_dur_mu, look_dur_sd, look_dur_lo, look_dur_hi;
  double point_dur_mu, point_dur_sd;
  double chase_lat_mu, chase_lat_sd;
  double chase_dur_mu, chase_dur_sd;

  double jumps_mu, jumps_sd;    // valence step count per session
  double amp_mu, amp_sd;        // valence step level
  double dyn_lat_mu, dyn_lat_sd;  // first step, relative to the first instruction
};

// Group means follow the observed TD/ASD contrasts: TD responds more often
// and sooner, holds looks longer, swings wider, and shifts emotion earlier
// and more often. Latencies are scaled to fit the 5 s response window.
const SynthProfile kTd{0.90, 0.70, 0.80, 0.60, 0.70, 0.50,
                       3.5, 0.7, 1.0, 4.55,
                       1.65, 0.30, 0.5, 3.0,
                       0.44, 0.08,
                       5.4, 0.8,
                       10.3, 1.0,
                       9.1, 1.2,
                       0.33, 0.04,
                       5.7, 0.5};
const SynthProfile kAsd{0.35, 0.25, 0.30, 0.20, 0.25, 0.30,
                        4.3, 0.8, 1.5, 4.55,
                        1.30, 0.25, 0.4, 2.5,
                        0.27, 0.05,
                        10.0, 1.2,
                        16.3, 1.3,
                        6.85, 1.0,
                        0.27, 0.03,
                        6.7, 0.6};

const std::array<double, 2> kChildHome{320.0, 430.0};
const std::array<double, 2> kDoctorPos{320.0, 120.0};
const std::array<double, 2> kParentPos{120.0, 400.0};
const std::array<double, 2> kDoorPos{610.0, 60.0};

SessionManifest synth_manifest(const std::string& case_id, Gender gender, int age_months,
                               double fps) {
  SessionManifest m;
  m.case_id = case_id;
  m.child_gender = gender;
  m.child_age_months = age_months;
  m.fps = fps;
  m.persons = {{Role::Child, "C"}, {Role::Doctor, "D"}, {Role::Parent, "M"}};
  m.object_rois = {{"flower", std::array<double, 2>{420.0, 260.0}},
                   {"car", std::array<double, 2>{180.0, 420.0}},
                   {"ball", std::array<double, 2>{520.0, 440.0}},
                   {"doctor", kDoctorPos},
                   {"door", kDoorPos}};

  auto seg = [](Paradigm p, double start, double end,
                std::vector<InstructionEvent> ins) {
    ParadigmSegment s;
    s.paradigm = p;
    s.start_s = start;
    s.end_s = end;
    s.instructions = std::move(ins);
    return s;
  };
  m.paradigms = {
      seg(Paradigm::RN, 0.0, 16.0, {{"P1", 1.0, {}}, {"P2", 9.0, {}}}),
      seg(Paradigm::SS, 16.0, 48.0,
          {{"P3", 17.0, {}}, {"P4", 25.0, {}}, {"P5", 33.0, {}}, {"P6", 41.0, {}}}),
      seg(Paradigm::IG, 48.0, 80.0,
          {{"P7", 49.0, "flower"}, {"P8", 57.0, "car"}, {"P9", 65.0, "ball"},
           {"P10", 73.0, "flower"}}),
      seg(Paradigm::RJA, 80.0, 88.0, {{"P11", 81.0, "car"}}),
      seg(Paradigm::IJA, 88.0, 112.0,
          {{"P12", 89.0, "ball"}, {"P13", 97.0, "flower"}, {"P14", 105.0, "car"}}),
      seg(Paradigm::SA, 112.0, kSessionSeconds, {{"P15", 113.0, {}}, {"P16", 133.0, {}}}),
  };
  return m;
}

struct Interval {
  double start = 0.0;
  double end = 0.0;

  bool covers(double t) const { return t >= start && t < end; }
};

struct GazeSpan {
  Interval when;
  std::string roi;
  double angle_deg = 0.0;
};

struct PointSpan {
  Interval when;
  std::string target;
};

// Everything time-shaped about one child, before frame quantization.
struct ChildPlan {
  std::vector<GazeSpan> gazes;          // later spans win on overlap
  std::vector<Interval> smiles;
  std::vector<PointSpan> points;
  std::vector<SpeechSegment> speech;
  std::optional<Interval> chase;        // walk toward the door
  std::array<double, 2> chase_from{0.0, 0.0};
  std::vector<double> jump_times;       // valence step moments
  std::vector<double> jump_levels;      // level after each step
};

ChildPlan plan_child(const SynthProfile& p, Rng& rng) {
  ChildPlan plan;

  auto look_latency = [&] {
    return rng.normal_clamped(p.look_lat_mu, p.look_lat_sd, p.look_lat_lo, p.look_lat_hi);
  };
  auto look_duration = [&] {
    return rng.normal_clamped(p.look_dur_mu, p.look_dur_sd, p.look_dur_lo, p.look_dur_hi);
  };
  auto look_at = [&](double start, double duration, const std::string& roi, double angle) {
    plan.gazes.push_back({{start, start + duration}, roi, angle});
    return Interval{start, start + duration};
  };

  // RN: turn to the doctor, sometimes with a greeting.
  for (double t : {1.0, 9.0}) {
    const bool responds = rng.bernoulli(p.p_respond);
    const double lat = look_latency();
    const double dur = look_duration();
    const bool speaks = rng.bernoulli(p.p_speak);
    if (!responds) continue;
    Interval look = look_at(t + lat, dur, "doctor", rng.uniform(3.0, 12.0));
    if (speaks) {
      plan.speech.push_back(
          {{Role::Child, "C"}, look.start + 0.2, look.start + 0.9, "Hello."});
    }
  }

  // SS: look at the doctor, often smiling back.
  for (double t : {17.0, 25.0, 33.0, 41.0}) {
    const bool responds = rng.bernoulli(p.p_respond);
    const double lat = look_latency();
    const double dur = look_duration();
    const bool smiles = rng.bernoulli(p.p_smile);
    if (!responds) continue;
    Interval look = look_at(t + lat, dur, "doctor", rng.uniform(3.0, 12.0));
    if (smiles) plan.smiles.push_back({look.start + 0.1, look.start + 1.0});
  }

  // IG: find the named toy, possibly pointing at it.
  const std::array<std::pair<double, const char*>, 4> ig = {
      {{49.0, "flower"}, {57.0, "car"}, {65.0, "ball"}, {73.0, "flower"}}};
  for (const auto& [t, target] : ig) {
    const bool responds = rng.bernoulli(p.p_respond);
    const double lat = look_latency();
    const double dur = look_duration();
    const bool points = rng.bernoulli(p.p_point);
    const bool precise = rng.bernoulli(0.7);
    const double point_dur = rng.normal_clamped(p.point_dur_mu, p.point_dur_sd, 0.22, 0.75);
    if (!responds) continue;
    Interval look = look_at(t + lat, dur, target, rng.uniform(3.0, 12.0));
    if (points) {
      const double angle = precise ? rng.uniform(2.0, 8.0) : rng.uniform(11.0, 14.0);
      const double start = look.start + 0.3;
      plan.gazes.push_back({{start, start + point_dur}, target, angle});
      plan.points.push_back({{start, start + point_dur}, target});
    }
  }

  // RJA: follow the doctor's cue to the target.
  {
    const bool responds = rng.bernoulli(p.p_respond);
    const double lat = look_latency();
    const double dur = look_duration();
    if (responds) look_at(81.0 + lat, dur, "car", rng.uniform(3.0, 12.0));
  }

  // IJA: look at the toy; sometimes check back with the doctor or point.
  const std::array<std::pair<double, const char*>, 3> ija = {
      {{89.0, "ball"}, {97.0, "flower"}, {105.0, "car"}}};
  for (const auto& [t, target] : ija) {
    const bool responds = rng.bernoulli(p.p_respond);
    const double lat = look_latency();
    const double dur = look_duration();
    const bool check_back = rng.bernoulli(p.p_second_look);
    const bool points = rng.bernoulli(p.p_point);
    const double point_dur = rng.normal_clamped(p.point_dur_mu, p.point_dur_sd, 0.22, 0.75);
    if (!responds) continue;
    Interval look = look_at(t + lat, dur, target, rng.uniform(3.0, 12.0));
    if (check_back && lat < 3.2) {
      const double start = look.start + std::min(dur, 1.2) + 0.2;
      plan.gazes.push_back({{start, start + 0.8}, "doctor", rng.uniform(3.0, 12.0)});
    }
    if (points) {
      const double start = look.start + 0.3;
      plan.gazes.push_back({{start, start + point_dur}, target, rng.uniform(2.0, 8.0)});
      plan.points.push_back({{start, start + point_dur}, target});
    }
  }

  // SA, parting: chase the parent toward the door.
  {
    const bool responds = rng.bernoulli(p.p_respond);
    const double lat = rng.normal_clamped(p.chase_lat_mu, p.chase_lat_sd, 3.0, 18.0);
    const double dur = rng.normal_clamped(p.chase_dur_mu, p.chase_dur_sd, 6.0, 18.5);
    if (responds) plan.chase = Interval{113.0 + lat, 113.0 + lat + dur};
  }

  // SA, goodbye: watch the door.
  {
    const bool responds = rng.bernoulli(p.p_look_door);
    const double lat = look_latency();
    if (responds) look_at(133.0 + lat, 1.2, "door", rng.uniform(3.0, 12.0));
  }

  // Valence steps: alternate positive and negative levels. Each step is a
  // jump of at least two level magnitudes, far above any smoothing noise.
  const int jumps = static_cast<int>(
      std::lround(rng.normal_clamped(p.jumps_mu, p.jumps_sd, 3.0, 14.0)));
  plan.jump_times.push_back(1.0 + rng.normal_clamped(p.dyn_lat_mu, p.dyn_lat_sd, 2.0, 9.0));
  for (int k = 0; k + 1 < jumps; ++k) {
    const double spacing = (kSessionSeconds - 16.0) / (jumps - 1);
    plan.jump_times.push_back(12.0 + (k + 0.5) * spacing + rng.uniform(-1.5, 1.5));
  }
  std::sort(plan.jump_times.begin(), plan.jump_times.end());
  double sign = 1.0;
  for (int k = 0; k < jumps; ++k) {
    plan.jump_levels.push_back(sign *
                               rng.normal_clamped(p.amp_mu, p.amp_sd, 0.21, 0.45));
    sign = -sign;
  }
  return plan;
}

BehaviorLog render_log(const std::string& case_id, const ChildPlan& plan, double fps,
                       Rng& rng) {
  BehaviorLog log;
  log.case_id = case_id;
  log.fps = fps;
  log.speech = plan.speech;
  std::sort(log.speech.begin(), log.speech.end(), [](const auto& a, const auto& b) {
    return a.start_s < b.start_s;
  });

  const int n_frames = static_cast<int>(std::lround(kSessionSeconds * fps));
  double noise = 0.0;

  std::array<double, 2> walk_dir{0.0, 0.0};
  if (plan.chase) {
    // Put the child far enough from the door that the whole walk keeps the
    // detection speed. The direction retraces the line door -> home corner.
    const double dx = kChildHome[0] - kDoorPos[0];
    const double dy = kChildHome[1] - kDoorPos[1];
    const double len = std::hypot(dx, dy);
    walk_dir = {dx / len, dy / len};
  }

  for (int i = 0; i < n_frames; ++i) {
    const double t = i / fps;
    FrameRecord frame;
    frame.frame_index = i;
    frame.timestamp_s = t;

    PersonState child;
    child.person = {Role::Child, "C"};
    child.present = true;

    // Position: parked at home, except during the staged chase.
    std::array<double, 2> pos = kChildHome;
    if (plan.chase) {
      const double walk = kChaseSpeedPxS * (plan.chase->end - plan.chase->start);
      const double margin = 60.0;
      auto at_distance = [&](double d) {
        return std::array<double, 2>{kDoorPos[0] + walk_dir[0] * d,
                                     kDoorPos[1] + walk_dir[1] * d};
      };
      if (t >= 112.0 && t < plan.chase->start) {
        pos = at_distance(walk + margin);
      } else if (plan.chase->covers(t)) {
        pos = at_distance(walk + margin - kChaseSpeedPxS * (t - plan.chase->start));
      } else if (t >= plan.chase->end) {
        pos = at_distance(margin);
      }
    }
    child.position_px = pos;

    // Gaze: the most recently started span wins.
    const GazeSpan* active = nullptr;
    for (const GazeSpan& g : plan.gazes) {
      if (g.when.covers(t) && (!active || g.when.start > active->when.start)) active = &g;
    }
    if (active) {
      child.gaze_target = GazeTarget::object(active->roi);
      child.gaze_angle_deg = active->angle_deg;
    }

    for (const PointSpan& span : plan.points) {
      if (span.when.covers(t)) {
        child.gesture = Gesture::Pointing;
        child.pointing_target = span.target;
        break;
      }
    }

    for (const Interval& smile : plan.smiles) {
      if (smile.covers(t)) {
        child.expression = Expression::Happy;
        break;
      }
    }

    // Valence: current step level plus small smoothed noise.
    double level = 0.0;
    for (std::size_t k = 0; k < plan.jump_times.size(); ++k) {
      if (t >= plan.jump_times[k]) level = plan.jump_levels[k];
    }
    double next_noise = 0.9 * noise + rng.normal(0.0, 0.004);
    next_noise = std::clamp(next_noise, -0.045, 0.045);
    next_noise = std::clamp(next_noise, noise - 0.015, noise + 0.015);
    noise = next_noise;
    child.valence = level + noise;
    child.arousal = 0.55 * std::fabs(child.valence) + 0.2 * noise;

    PersonState doctor;
    doctor.person = {Role::Doctor, "D"};
    doctor.present = true;
    doctor.position_px = kDoctorPos;

    PersonState parent;
    parent.person = {Role::Parent, "M"};
    parent.present = t < kParentLeaveTime;
    if (parent.present) parent.position_px = kParentPos;

    frame.persons = {child, doctor, parent};
    log.frames.push_back(std::move(frame));
  }
  return log;
}

LabeledCase synth_case(const std::string& case_id, Label truth, const SynthSpec& spec) {
  const SynthProfile& profile = truth == Label::ASD ? kAsd : kTd;
  Rng rng(fnv1a64(case_id + "#" + std::to_string(spec.seed)));

  const int age_months = 18 + static_cast<int>(rng.uniform_index(15));
  const double male_share = truth == Label::ASD ? 0.8 : 0.5;
  const Gender gender = rng.bernoulli(male_share) ? Gender::Male : Gender::Female;

  LabeledCase c;
  c.truth = truth;
  c.session.manifest = synth_manifest(case_id, gender, age_months, spec.fps);
  ChildPlan plan = plan_child(profile, rng);
  c.session.log = render_log(case_id, plan, spec.fps, rng);
  validate_session(c.session.log, c.session.manifest);
  return c;
}

std::string padded(const char* prefix, int i) {
  std::ostringstream out;
  out << prefix << "-" << (i < 100 ? "0" : "") << (i < 10 ? "0" : "") << i;
  return out.str();
}

}  // namespace

Dataset synth_dataset(const SynthSpec& spec) {
  if (spec.n_asd < 0 || spec.n_td < 0) throw ConfigError("case counts must be non-negative");
  if (spec.fps <= 0) throw ConfigError("fps must be positive");
  Dataset dataset;
  dataset.reserve(static_cast<std::size_t>(spec.n_asd + spec.n_td));
  for (int i = 1; i <= spec.n_asd; ++i) {
    dataset.push_back(synth_case(padded("asd", i), Label::ASD, spec));
  }
  for (int i = 1; i <= spec.n_td; ++i) {
    dataset.push_back(synth_case(padded("td", i), Label::TD, spec));
  }
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ojson labels;
  labels["schema_version"] = "1.0";
  labels["labels"] = ojson::object();
  for (const LabeledCase& c : dataset) {
    const std::string& id = c.session.log.case_id;
    if (labels["labels"].contains(id)) throw ConfigError("duplicate case id '" + id + "'");
    if (c.truth == Label::Abstain) throw ConfigError("case '" + id + "' has no truth label");
    labels["labels"][id] = to_string(c.truth);
    save_log(c.session, dir / id);
  }
  std::ofstream f(dir / "labels.json", std::ios::binary);
  f << labels.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream f(dir / "labels.json", std::ios::binary);
  if (!f) throw SchemaError("cannot read " + (dir / "labels.json").string());
  std::ostringstream ss;
  ss << f.rdbuf();
  ojson labels;
  try {
    labels = ojson::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("labels.json: invalid JSON: " + std::string(e.what()));
  }
  reject_unknown_keys(labels, {"schema_version", "labels"}, "labels.json");
  check_schema_version(labels, "labels.json");
  const ojson& table = require_field(labels, "labels", "labels.json");
  if (!table.is_object()) throw SchemaError("labels.json: 'labels' must be an object");

  Dataset dataset;
  for (const auto& [case_id, value] : table.items()) {
    if (!value.is_string()) {
      throw SchemaError("labels.json: label for '" + case_id + "' must be a string");
    }
    const std::string text = value.get<std::string>();
    if (text != "ASD" && text != "TD") {
      throw SchemaError("labels.json: '" + case_id + "' must be ASD or TD, got '" + text + "'");
    }
    LabeledCase c;
    c.truth = text == "ASD" ? Label::ASD : Label::TD;
    c.session = load_log(dir / case_id);
    dataset.push_back(std::move(c));
  }
  return dataset;
}

}  // namespace scbu
