#include "scbu/script_compiler.hpp"

#include <algorithm>

#include "doctest.h"
#include "fixtures.hpp"
#include "scbu/errors.hpp"
#include "scbu/util.hpp"

using namespace scbu;

namespace {

ResponseEvent ev(EventKind kind, double start, double end, const std::string& roi = "",
                 Role role = Role::Child) {
  ResponseEvent e;
  e.kind = kind;
  e.start_s = start;
  e.end_s = end;
  e.roi = roi;
  e.person = {role, role == Role::Child ? "C" : role == Role::Doctor ? "D" : "M"};
  return e;
}

// Manifest with a doctor ROI and one paradigm block holding one instruction.
SessionManifest one_instruction_manifest(Paradigm p, const std::string& code, double ins_time,
                                         double seg_end,
                                         std::optional<std::string> target = std::nullopt) {
  SessionManifest m = testing::basic_manifest(25.0, seg_end);
  m.object_rois.push_back({"doctor", std::nullopt});
  m.object_rois.push_back({"clock", std::nullopt});
  m.paradigms[0].paradigm = p;
  m.paradigms[0].start_s = 0.0;
  m.paradigms[0].end_s = seg_end;
  m.paradigms[0].instructions = {{code, ins_time, target}};
  return m;
}

int count_origin(const ScriptDocument& doc, LineOrigin origin) {
  return static_cast<int>(std::count_if(doc.lines.begin(), doc.lines.end(),
                                        [&](const ScriptLine& l) { return l.origin == origin; }));
}

}  // namespace

TEST_CASE("template table ships the fixed wording") {
  const TemplateTable& t = TemplateTable::defaults();
  CHECK(t.instruction_text("P2") == "The doctor called out the child's name.");
  CHECK(t.response_text(Paradigm::RN, 1) ==
        "The child turns toward the doctor and look with saying hello.");
  CHECK(t.response_text(Paradigm::RN, 2) == "The child turns toward the doctor and look .");
  CHECK(t.response_text(Paradigm::RN, 3) == "The child continued to play with the toy.");
  CHECK(t.response_text(Paradigm::SS, 3) == "The child smile but did not look at the doctor.");
  CHECK(t.response_text(Paradigm::RJA, 1) ==
        "The child turns his head backand then looks to the position of the clock.");
  CHECK(t.response_text(Paradigm::RJA, 3) == "The child looked up at the doctor's hand .");
  CHECK(t.response_text(Paradigm::IJA, 1) ==
        "The child is attracted to the animation playingand looks at the bird on the left wall.");
  CHECK(t.instruction_text("P9") ==
        "The doctor call the child's name and say \"Look at that balloon\"");
  CHECK(t.instruction_text("P16") ==
        "The parent call the child's name outside the door and say, “Hi, mom is leaving. "
        "You have to play alone.");
  CHECK(t.response_text(Paradigm::SA, 4) ==
        "The parents, the doctor and the child have left the room.");
  CHECK_THROWS_AS(t.response_text(Paradigm::RN, 9), TemplateError);
  CHECK_THROWS_AS(t.instruction_text("P99"), TemplateError);
}

TEST_CASE("shipped template file equals the embedded defaults") {
  TemplateTable loaded = TemplateTable::load(SCBU_TEMPLATE_DIR "/response_templates.json");
  CHECK(loaded.instructions == TemplateTable::defaults().instructions);
  CHECK(loaded.responses == TemplateTable::defaults().responses);
  CHECK(loaded.to_json_text() == TemplateTable::defaults().to_json_text());
}

TEST_CASE("classify RN windows") {
  ScriptConfig cfg;
  auto look = ev(EventKind::LookAtObject, 1.0, 1.5, "doctor");
  auto speak = ev(EventKind::Speak, 1.2, 1.8);
  SUBCASE("look and speak selects response 1") {
    auto m = classify_response(Paradigm::RN, {look, speak}, std::nullopt, 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 1);
    CHECK(m[0].anchor_s == doctest::Approx(1.0));
  }
  SUBCASE("look alone selects response 2") {
    auto m = classify_response(Paradigm::RN, {look}, std::nullopt, 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 2);
  }
  SUBCASE("doctor speech does not count as the child's reply") {
    auto doctor_speak = ev(EventKind::Speak, 1.2, 1.8, "", Role::Doctor);
    auto m = classify_response(Paradigm::RN, {look, doctor_speak}, std::nullopt, 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 2);
  }
  SUBCASE("empty window falls back to response 3 at window end") {
    auto m = classify_response(Paradigm::RN, {}, std::nullopt, 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 3);
    CHECK(m[0].anchor_s == doctest::Approx(5.0));
  }
}

TEST_CASE("classify SS windows") {
  ScriptConfig cfg;
  auto look = ev(EventKind::LookAtObject, 1.0, 1.5, "doctor");
  auto smile = ev(EventKind::Smile, 1.4, 2.2);
  auto check_one = [&](std::vector<ResponseEvent> events, int want) {
    auto m = classify_response(Paradigm::SS, events, std::nullopt, 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == want);
  };
  check_one({look, smile}, 2);
  check_one({smile}, 3);
  check_one({look}, 5);
  check_one({}, 4);
}

TEST_CASE("classify IJA window emits co-occurring responses") {
  ScriptConfig cfg;
  auto look = ev(EventKind::LookAtObject, 1.0, 1.5, "wall");
  auto point = ev(EventKind::PointAtObject, 2.0, 2.4, "wall");
  auto m = classify_response(Paradigm::IJA, {look, point}, std::string("wall"), 5.0, cfg);
  REQUIRE(m.size() == 2);
  CHECK(m[0].response_index == 1);
  CHECK(m[0].anchor_s == doctest::Approx(1.0));
  CHECK(m[1].response_index == 5);
  CHECK(m[1].anchor_s == doctest::Approx(2.0));
}

TEST_CASE("classify RJA distinguishes correct and wrong direction") {
  ScriptConfig cfg;
  SUBCASE("look at the target") {
    auto look = ev(EventKind::LookAtObject, 1.0, 1.6, "clock");
    auto m = classify_response(Paradigm::RJA, {look}, std::string("clock"), 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 1);
  }
  SUBCASE("look at some other ROI") {
    auto look = ev(EventKind::LookAtObject, 1.0, 1.6, "flower");
    auto m = classify_response(Paradigm::RJA, {look}, std::string("clock"), 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 2);
  }
  SUBCASE("both: the correct look wins the single slot") {
    auto wrong = ev(EventKind::LookAtObject, 0.8, 1.2, "flower");
    auto right = ev(EventKind::LookAtObject, 2.0, 2.6, "clock");
    auto m = classify_response(Paradigm::RJA, {wrong, right}, std::string("clock"), 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 1);
  }
}

TEST_CASE("classify IG point precision and sustained look") {
  ScriptConfig cfg;
  SUBCASE("precise point") {
    auto point = ev(EventKind::PointAtObject, 1.0, 1.4, "flower");
    point.precise = true;
    auto m = classify_response(Paradigm::IG, {point}, std::string("flower"), 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 3);
  }
  SUBCASE("rough point") {
    auto point = ev(EventKind::PointAtObject, 1.0, 1.4, "flower");
    auto m = classify_response(Paradigm::IG, {point}, std::string("flower"), 5.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 4);
  }
  SUBCASE("sustained look adds the keeps-looking line") {
    auto look = ev(EventKind::LookAtObject, 1.0, 3.5, "flower");
    auto m = classify_response(Paradigm::IG, {look}, std::string("flower"), 5.0, cfg);
    REQUIRE(m.size() == 2);
    CHECK(m[0].response_index == 1);
    CHECK(m[1].response_index == 6);
  }
  SUBCASE("cap at max_response_lines") {
    auto look = ev(EventKind::LookAtObject, 1.0, 3.5, "flower");
    auto point = ev(EventKind::PointAtObject, 1.5, 2.0, "flower");
    point.precise = true;
    auto doctor_look = ev(EventKind::LookAtObject, 2.5, 3.0, "doctor");
    auto m = classify_response(Paradigm::IG, {look, point, doctor_look}, std::string("flower"),
                               5.0, cfg);
    CHECK(m.size() == 3);  // 1, 6 (anchor 1.0), 3 (anchor 1.5) fill the cap
  }
}

TEST_CASE("classify SA chase and group exit") {
  ScriptConfig cfg;
  SUBCASE("chase") {
    auto chase = ev(EventKind::Chase, 4.0, 12.0);
    auto m = classify_response(Paradigm::SA, {chase}, std::nullopt, 20.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 1);
  }
  SUBCASE("all three leave") {
    auto l1 = ev(EventKind::Leave, 3.0, 3.0, "", Role::Parent);
    auto l2 = ev(EventKind::Leave, 5.0, 5.0, "", Role::Doctor);
    auto l3 = ev(EventKind::Leave, 7.0, 7.0, "", Role::Child);
    auto m = classify_response(Paradigm::SA, {l1, l2, l3}, std::nullopt, 20.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 4);
    CHECK(m[0].anchor_s == doctest::Approx(3.0));
  }
  SUBCASE("one leave alone is not the group exit") {
    auto l1 = ev(EventKind::Leave, 3.0, 3.0, "", Role::Parent);
    auto m = classify_response(Paradigm::SA, {l1}, std::nullopt, 20.0, cfg);
    REQUIRE(m.size() == 1);
    CHECK(m[0].response_index == 3);
  }
}

TEST_CASE("compile RN script with instruction then response") {
  SessionManifest m = one_instruction_manifest(Paradigm::RN, "P2", 3.0, 30.0);
  std::vector<ResponseEvent> events = {ev(EventKind::LookAtObject, 4.2, 4.9, "doctor"),
                                       ev(EventKind::Speak, 4.5, 5.1)};
  ScriptDocument doc = compile_script(events, m);
  REQUIRE(doc.lines.size() == 3);
  CHECK(doc.lines[0].origin == LineOrigin::Preamble);
  CHECK(doc.lines[1].origin == LineOrigin::Instruction);
  CHECK(doc.lines[1].text == "The doctor called out the child's name.");
  CHECK(doc.lines[1].timestamp_s == doctest::Approx(3.0));
  CHECK(doc.lines[2].origin == LineOrigin::Response);
  CHECK(doc.lines[2].text == "The child turns toward the doctor and look with saying hello.");
  CHECK(doc.lines[2].timestamp_s == doctest::Approx(4.2));
}

TEST_CASE("compile RN with no qualifying events falls back") {
  SessionManifest m = one_instruction_manifest(Paradigm::RN, "P2", 3.0, 30.0);
  ScriptDocument doc = compile_script({}, m);
  REQUIRE(doc.lines.size() == 3);
  CHECK(doc.lines[2].text == "The child continued to play with the toy.");
  CHECK(doc.lines[2].timestamp_s == doctest::Approx(8.0));  // window end 3.0 + 5.0
}

TEST_CASE("empty manifest compiles to preamble only") {
  SessionManifest m = testing::basic_manifest(25.0, 30.0);
  m.paradigms.clear();
  ScriptDocument doc = compile_script({}, m);
  REQUIRE(doc.lines.size() == 1);
  CHECK(doc.lines[0].origin == LineOrigin::Preamble);
  CHECK(doc.preamble == doc.lines[0].text);
}

TEST_CASE("preamble wording by gender") {
  SessionManifest m = testing::basic_manifest(25.0, 30.0);
  m.child_age_months = 30;
  CHECK(make_preamble(m) ==
        "The child is a 30-month-old boy. The following is a time-ordered record of a clinical "
        "observation session.");
  m.child_gender = Gender::Female;
  m.child_age_months = 41;
  CHECK(make_preamble(m) ==
        "The child is a 41-month-old girl. The following is a time-ordered record of a "
        "clinical observation session.");
}

TEST_CASE("instruction line count equals manifest instruction count") {
  SessionManifest m = testing::basic_manifest(25.0, 120.0);
  m.object_rois.push_back({"doctor", std::nullopt});
  m.paradigms.clear();
  ParadigmSegment rn{Paradigm::RN, 0.0, 20.0, {{"P1", 2.0, std::nullopt},
                                               {"P2", 10.0, std::nullopt}}};
  ParadigmSegment ss{Paradigm::SS, 20.0, 60.0, {{"P3", 22.0, std::nullopt},
                                                {"P4", 30.0, std::nullopt},
                                                {"P5", 40.0, std::nullopt}}};
  ParadigmSegment sa{Paradigm::SA, 60.0, 120.0, {{"P15", 62.0, std::nullopt}}};
  m.paradigms = {rn, ss, sa};
  ScriptDocument doc = compile_script({}, m);
  CHECK(count_origin(doc, LineOrigin::Instruction) == 6);
  CHECK(count_origin(doc, LineOrigin::Response) == 6);
  CHECK(count_origin(doc, LineOrigin::Preamble) == 1);
  for (std::size_t i = 1; i < doc.lines.size(); ++i) {
    CHECK(doc.lines[i - 1].timestamp_s <= doc.lines[i].timestamp_s);
  }
}

TEST_CASE("window clips at the paradigm boundary") {
  SessionManifest m = one_instruction_manifest(Paradigm::RN, "P2", 3.0, 6.0);
  ScriptDocument doc = compile_script({}, m);
  // Fallback line sits at the clipped window end (segment end 6.0, not 8.0).
  CHECK(doc.lines[2].timestamp_s == doctest::Approx(6.0));

  // An event past the boundary is outside the window.
  std::vector<ResponseEvent> events = {ev(EventKind::LookAtObject, 7.0, 7.5, "doctor")};
  ScriptDocument doc2 = compile_script(events, m);
  CHECK(doc2.lines[2].response_index == 3);
}

TEST_CASE("recompilation is byte-identical") {
  SessionManifest m = one_instruction_manifest(Paradigm::IG, "P7", 2.0, 30.0,
                                               std::string("flower"));
  std::vector<ResponseEvent> events = {ev(EventKind::LookAtObject, 3.0, 6.0, "flower"),
                                       ev(EventKind::PointAtObject, 4.0, 4.5, "flower")};
  ScriptDocument a = compile_script(events, m);
  ScriptDocument b = compile_script(events, m);
  CHECK(render_script(a) == render_script(b));
}

TEST_CASE("rendering formats timestamps as minutes and seconds") {
  CHECK(format_timestamp(0.0) == "[00:00]");
  CHECK(format_timestamp(3.0) == "[00:03]");
  CHECK(format_timestamp(3.9) == "[00:03]");
  CHECK(format_timestamp(65.2) == "[01:05]");
  CHECK(format_timestamp(600.0) == "[10:00]");

  SessionManifest m = one_instruction_manifest(Paradigm::RN, "P2", 3.0, 30.0);
  std::vector<ResponseEvent> events = {ev(EventKind::LookAtObject, 4.2, 4.9, "doctor")};
  std::string text = render_script(compile_script(events, m));
  CHECK(text ==
        "The child is a 30-month-old boy. The following is a time-ordered record of a clinical "
        "observation session.\n"
        "[00:03] The doctor called out the child's name.\n"
        "[00:04] The child turns toward the doctor and look .\n");
}

TEST_CASE("unknown template key raises TemplateError during compile") {
  SessionManifest m = one_instruction_manifest(Paradigm::RN, "P2", 3.0, 30.0);
  TemplateTable t = TemplateTable::defaults();
  t.responses.erase({static_cast<int>(Paradigm::RN), 3});
  CHECK_THROWS_AS(compile_script({}, m, {}, t), TemplateError);
}
