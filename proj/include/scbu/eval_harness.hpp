#ifndef SCBU_EVAL_HARNESS_HPP
#define SCBU_EVAL_HARNESS_HPP

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scbu/behavior_log.hpp"
#include "scbu/emotion_dynamics.hpp"
#include "scbu/jsonio.hpp"
#include "scbu/llm_gateway.hpp"
#include "scbu/response_parser.hpp"
#include "scbu/script_compiler.hpp"

namespace scbu {

// ---------------------------------------------------------------------------
// Metrics (positive class = ASD)

struct ConfusionCounts {
  int tp = 0;
  int fp = 0;
  int tn = 0;
  int fn = 0;

  int total() const { return tp + fp + tn + fn; }
};

// Percentages. A ratio with a zero denominator is absent, never coerced to 0.
struct MetricSet {
  std::optional<double> acc;
  std::optional<double> f1;
  std::optional<double> sn;         // tp / (tp + fn)
  std::optional<double> sp;         // tn / (tn + fp)
  std::optional<double> precision;  // tp / (tp + fp)
};

// Throws ConfigError when counts.total() == 0.
MetricSet metrics(const ConfusionCounts& counts);

// ---------------------------------------------------------------------------
// Datasets

struct LabeledCase {
  Session session;
  Label truth = Label::ASD;  // ASD or TD only
};

using Dataset = std::vector<LabeledCase>;

// ---------------------------------------------------------------------------
// Pipeline wiring: log -> events -> script (+ emotion lines) -> prompt

struct PipelineConfig {
  ParserConfig parser;
  ScriptConfig script;
  EmotionConfig emotion;
  TemplateTable templates = TemplateTable::defaults();
  PromptTemplates prompts = PromptTemplates::defaults();
  PromptProfile profile;
  PromptConfig prompt;
  BackendSpec backend;
  GatewayConfig gateway;
  Describer* describer = nullptr;  // emotion lines; null means the stub

  // Cooperative drain: while set and true, cases not yet sent to the
  // backend become failures; in-flight and finished cases keep their rows.
  const std::atomic<bool>* cancel = nullptr;
};

// Full single-case compilation, emotion lines included (the prompt profile
// decides later whether they are rendered).
ScriptDocument compile_case(const Session& session, const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation protocols

struct CaseRow {
  std::string case_id;
  Label truth = Label::ASD;
  Label predicted = Label::Abstain;
  std::string rationale_ref;  // prompt hash; locates the audited raw answer
};

struct EvalReport {
  std::string protocol;  // always printed; results are only comparable within one
  ConfusionCounts counts;
  MetricSet scores;
  int abstentions = 0;  // counted as errors in the confusion counts
  std::vector<CaseRow> rows;          // sorted by case_id
  std::vector<std::string> failures;  // "case_id: reason", excluded from counts
};

// Every case judged once, zero-shot. Backend failures for single cases are
// recorded in report.failures and excluded from the counts.
EvalReport loocv_run(const Dataset& dataset, const PipelineConfig& cfg);

// Shared core: judge `cases` with the given exemplar scripts in the prompt.
EvalReport evaluate_cases(const Dataset& cases, const std::vector<Exemplar>& exemplars,
                          const PipelineConfig& cfg, const std::string& protocol);

struct FewshotSplit {
  Dataset train;  // exactly 10 ASD + 10 TD
  Dataset test;   // the remainder, original order
};

// Stratified, deterministic per seed. Throws InsufficientClass when either
// class has fewer than 10 cases.
FewshotSplit fewshot_split(const Dataset& dataset, std::uint64_t seed);

// Split, compile the train cases into exemplars, judge the test cases.
EvalReport fewshot_run(const Dataset& dataset, std::uint64_t seed, const PipelineConfig& cfg);

struct SweepRow {
  double alpha = 0.0;
  EvalReport report;
};

// One zero-shot report per emotion threshold.
std::vector<SweepRow> threshold_sweep(const Dataset& dataset,
                                      const std::vector<double>& alphas,
                                      const PipelineConfig& cfg);

// Plot-ready TSV: alpha, acc, f1, sn, sp, abstentions.
std::string sweep_table(const std::vector<SweepRow>& rows);

std::string render_report(const EvalReport& report);
ojson report_to_json(const EvalReport& report);

// ---------------------------------------------------------------------------
// Group statistics

struct TTestConfig {
  bool pooled = false;  // default is the unequal-variance (Welch) form
};

struct GroupStats {
  std::string variable;
  double td_mean = 0.0;
  double asd_mean = 0.0;
  double t_value = 0.0;  // sign follows td_mean - asd_mean
  double p_value = 1.0;  // two-sided, in [0, 1]
  double df = 0.0;
  int n_td = 0;
  int n_asd = 0;
};

// Two-sample t-test. Throws ConfigError when either group has < 2 samples.
GroupStats group_ttest(const std::vector<double>& td_samples,
                       const std::vector<double>& asd_samples,
                       const std::string& variable = "", const TTestConfig& cfg = {});

// Two-sided tail probability of Student's t, via the regularized incomplete
// beta function (continued fraction); absolute accuracy target 1e-8.
double student_t_two_sided_p(double t, double df);

// Per-case behavioral measurements, named like the group-stats table rows:
// latency/duration means per response kind, valence and arousal extrema,
// dynamic frequency and latency. Undefined measurements are simply missing.
std::map<std::string, double> case_variables(const Session& session,
                                             const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Synthetic sessions

struct SynthSpec {
  int n_asd = 10;
  int n_td = 10;
  std::uint64_t seed = 1;
  double fps = 10.0;
};

// Deterministic per spec. TD profiles respond more often and faster, look
// longer, swing wider in valence, and shift emotion more frequently than ASD
// profiles. Every generated session passes validate_session.
Dataset synth_dataset(const SynthSpec& spec);

// Writes each case to dir/<case_id>/ (manifest.json + log.jsonl) plus a
// labels.json index; load_dataset reads that layout back.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace scbu

#endif
