#include "scbu/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <semaphore>
#include <sstream>

#include "scbu/errors.hpp"
#include "scbu/util.hpp"

namespace scbu {

MetricSet metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) {
    throw ConfigError("confusion counts must be non-negative");
  }
  if (c.total() == 0) throw ConfigError("metrics need at least one evaluated case");

  MetricSet m;
  m.acc = 100.0 * (c.tp + c.tn) / c.total();
  if (c.tp + c.fn > 0) m.sn = 100.0 * c.tp / (c.tp + c.fn);
  if (c.tn + c.fp > 0) m.sp = 100.0 * c.tn / (c.tn + c.fp);
  if (c.tp + c.fp > 0) m.precision = 100.0 * c.tp / (c.tp + c.fp);
  if (m.precision && m.sn && *m.precision + *m.sn > 0) {
    m.f1 = 2.0 * *m.precision * *m.sn / (*m.precision + *m.sn);
  }
  return m;
}

ScriptDocument compile_case(const Session& session, const PipelineConfig& cfg) {
  std::vector<ResponseEvent> events = parse_events(session.log, session.manifest, cfg.parser);
  ScriptDocument doc = compile_script(events, session.manifest, cfg.script, cfg.templates);

  std::vector<std::pair<double, double>> series = child_valence_series(session.log);
  if (series.size() >= 2) {
    std::vector<DynamicPoint> points = find_dynamic_points(series, cfg.emotion);
    std::vector<EmotionSegment> segments =
        merge_segments(points, cfg.emotion, session.log.duration_s());
    StubDescriber stub;
    Describer& describer = cfg.describer ? *cfg.describer : static_cast<Describer&>(stub);
    describe_segments(segments, session.log.case_id, session.log.case_id, describer);
    insert_emotion_lines(doc, segments);
  }
  return doc;
}

namespace {

void tally_row(ConfusionCounts& counts, int& abstentions, const CaseRow& row) {
  if (row.predicted == Label::Abstain) {
    // Conservative: an abstention is a miss for the true class.
    ++abstentions;
    if (row.truth == Label::ASD) ++counts.fn;
    else ++counts.fp;
    return;
  }
  if (row.truth == Label::ASD) {
    row.predicted == Label::ASD ? ++counts.tp : ++counts.fn;
  } else {
    row.predicted == Label::TD ? ++counts.tn : ++counts.fp;
  }
}

}  // namespace

EvalReport evaluate_cases(const Dataset& cases, const std::vector<Exemplar>& exemplars,
                          const PipelineConfig& cfg, const std::string& protocol) {
  EvalReport report;
  report.protocol = protocol + "; backend=" + cfg.backend.name +
                    "; cases=" + std::to_string(cases.size()) +
                    "; exemplars=" + std::to_string(exemplars.size()) +
                    "; alpha=" + format_fixed(cfg.emotion.alpha, 3);

  struct Slot {
    std::string case_id;
    Label truth = Label::ASD;
    std::optional<PromptBundle> bundle;
    std::optional<DetectionResult> result;
    std::string error;
  };
  std::vector<Slot> slots(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    slots[i].case_id = cases[i].session.log.case_id;
    slots[i].truth = cases[i].truth;
    try {
      ScriptDocument doc = compile_case(cases[i].session, cfg);
      slots[i].bundle = build_prompt(doc, cfg.profile, exemplars, cfg.prompt, cfg.prompts);
    } catch (const ContextOverflow& e) {
      slots[i].error = e.what();
    } catch (const DataError& e) {
      slots[i].error = e.what();
    }
  }

  {
    std::counting_semaphore<> slots_free(std::max(1, cfg.gateway.max_parallel));
    std::vector<std::future<void>> futures;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i].bundle) continue;
      futures.push_back(std::async(std::launch::async, [&cfg, &slots_free, &slot = slots[i]] {
        slots_free.acquire();
        struct Release {
          std::counting_semaphore<>* s;
          ~Release() { s->release(); }
        } release{&slots_free};
        if (cfg.cancel && cfg.cancel->load()) {
          slot.error = "cancelled before dispatch";
          return;
        }
        try {
          slot.result = detect(*slot.bundle, cfg.backend, cfg.gateway);
        } catch (const BackendError& e) {
          slot.error = e.what();
        }
      }));
    }
    for (auto& f : futures) f.get();
  }

  for (const Slot& slot : slots) {
    if (!slot.result) {
      report.failures.push_back(slot.case_id + ": " + slot.error);
      continue;
    }
    CaseRow row;
    row.case_id = slot.case_id;
    row.truth = slot.truth;
    row.predicted = slot.result->label;
    row.rationale_ref = slot.result->prompt_hash;
    tally_row(report.counts, report.abstentions, row);
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const CaseRow& a, const CaseRow& b) { return a.case_id < b.case_id; });
  if (report.counts.total() > 0) report.scores = metrics(report.counts);
  return report;
}

EvalReport loocv_run(const Dataset& dataset, const PipelineConfig& cfg) {
  return evaluate_cases(dataset, {}, cfg, "loocv-zero-shot");
}

FewshotSplit fewshot_split(const Dataset& dataset, std::uint64_t seed) {
  constexpr int kTrainPerClass = 10;
  std::vector<std::size_t> asd, td;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (dataset[i].truth == Label::ASD ? asd : td).push_back(i);
  }
  if (static_cast<int>(asd.size()) < kTrainPerClass) {
    throw InsufficientClass("ASD class has " + std::to_string(asd.size()) +
                            " cases, need at least " + std::to_string(kTrainPerClass));
  }
  if (static_cast<int>(td.size()) < kTrainPerClass) {
    throw InsufficientClass("TD class has " + std::to_string(td.size()) +
                            " cases, need at least " + std::to_string(kTrainPerClass));
  }

  Rng rng(seed);
  rng.shuffle(asd);
  rng.shuffle(td);
  std::vector<std::size_t> train_idx(asd.begin(), asd.begin() + kTrainPerClass);
  train_idx.insert(train_idx.end(), td.begin(), td.begin() + kTrainPerClass);
  std::sort(train_idx.begin(), train_idx.end());

  FewshotSplit split;
  std::vector<bool> in_train(dataset.size(), false);
  for (std::size_t i : train_idx) in_train[i] = true;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (in_train[i] ? split.train : split.test).push_back(dataset[i]);
  }
  return split;
}

EvalReport fewshot_run(const Dataset& dataset, std::uint64_t seed, const PipelineConfig& cfg) {
  FewshotSplit split = fewshot_split(dataset, seed);
  std::vector<Exemplar> exemplars;
  exemplars.reserve(split.train.size());
  for (const LabeledCase& c : split.train) {
    exemplars.push_back({compile_case(c.session, cfg), c.truth});
  }
  return evaluate_cases(split.test, exemplars, cfg,
                        "fewshot-10+10 seed=" + std::to_string(seed));
}

std::vector<SweepRow> threshold_sweep(const Dataset& dataset,
                                      const std::vector<double>& alphas,
                                      const PipelineConfig& cfg) {
  std::vector<SweepRow> rows;
  rows.reserve(alphas.size());
  for (double alpha : alphas) {
    PipelineConfig swept = cfg;
    swept.emotion.alpha = alpha;
    rows.push_back({alpha, loocv_run(dataset, swept)});
  }
  return rows;
}

namespace {

std::string pct(const std::optional<double>& v) {
  return v ? format_fixed(*v, 2) : std::string("n/a");
}

}  // namespace

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "alpha\tacc\tf1\tsn\tsp\tabstentions\n";
  for (const SweepRow& row : rows) {
    out << format_fixed(row.alpha, 3) << "\t" << pct(row.report.scores.acc) << "\t"
        << pct(row.report.scores.f1) << "\t" << pct(row.report.scores.sn) << "\t"
        << pct(row.report.scores.sp) << "\t" << row.report.abstentions << "\n";
  }
  return out.str();
}

std::string render_report(const EvalReport& report) {
  std::ostringstream out;
  out << "Protocol: " << report.protocol << "\n";
  out << "Counts: tp=" << report.counts.tp << " fp=" << report.counts.fp
      << " tn=" << report.counts.tn << " fn=" << report.counts.fn
      << " total=" << report.counts.total() << " abstentions=" << report.abstentions << "\n";
  out << "Scores: ACC=" << pct(report.scores.acc) << "% F1=" << pct(report.scores.f1)
      << "% SN=" << pct(report.scores.sn) << "% SP=" << pct(report.scores.sp) << "%\n";
  if (!report.rows.empty()) {
    out << "Cases:\n";
    for (const CaseRow& row : report.rows) {
      out << "  " << row.case_id << " truth=" << to_string(row.truth)
          << " predicted=" << to_string(row.predicted) << " ref=" << row.rationale_ref << "\n";
    }
  }
  if (!report.failures.empty()) {
    out << "Failures (excluded from counts):\n";
    for (const std::string& f : report.failures) out << "  " << f << "\n";
  }
  return out.str();
}

ojson report_to_json(const EvalReport& report) {
  auto num_or_null = [](const std::optional<double>& v) {
    return v ? ojson(*v) : ojson(nullptr);
  };
  ojson j;
  j["protocol"] = report.protocol;
  j["counts"] = {{"tp", report.counts.tp},
                 {"fp", report.counts.fp},
                 {"tn", report.counts.tn},
                 {"fn", report.counts.fn}};
  j["scores"] = {{"acc", num_or_null(report.scores.acc)},
                 {"f1", num_or_null(report.scores.f1)},
                 {"sn", num_or_null(report.scores.sn)},
                 {"sp", num_or_null(report.scores.sp)},
                 {"precision", num_or_null(report.scores.precision)}};
  j["abstentions"] = report.abstentions;
  j["cases"] = ojson::array();
  for (const CaseRow& row : report.rows) {
    j["cases"].push_back({{"case_id", row.case_id},
                          {"truth", to_string(row.truth)},
                          {"predicted", to_string(row.predicted)},
                          {"rationale_ref", row.rationale_ref}});
  }
  j["failures"] = report.failures;
  return j;
}

// ---------------------------------------------------------------------------
// Student's t machinery

namespace {

// Continued fraction for the regularized incomplete beta (modified Lentz).
double ibeta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 400; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * ibeta_cf(a, b, x) / a;
  return 1.0 - front * ibeta_cf(b, a, 1.0 - x) / b;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw ConfigError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  const double p = reg_inc_beta(df / 2.0, 0.5, x);
  return std::clamp(p, 0.0, 1.0);
}

GroupStats group_ttest(const std::vector<double>& td_samples,
                       const std::vector<double>& asd_samples,
                       const std::string& variable, const TTestConfig& cfg) {
  if (td_samples.size() < 2 || asd_samples.size() < 2) {
    throw ConfigError("each group needs at least 2 samples");
  }
  const double n1 = static_cast<double>(td_samples.size());
  const double n2 = static_cast<double>(asd_samples.size());
  const double m1 = mean_of(td_samples);
  const double m2 = mean_of(asd_samples);
  const double v1 = sample_var(td_samples, m1);
  const double v2 = sample_var(asd_samples, m2);

  GroupStats g;
  g.variable = variable;
  g.td_mean = m1;
  g.asd_mean = m2;
  g.n_td = static_cast<int>(td_samples.size());
  g.n_asd = static_cast<int>(asd_samples.size());

  double se, df;
  if (cfg.pooled) {
    const double pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
    se = std::sqrt(pooled * (1.0 / n1 + 1.0 / n2));
    df = n1 + n2 - 2.0;
  } else {
    const double a = v1 / n1, b = v2 / n2;
    se = std::sqrt(a + b);
    df = (a + b) > 0.0
             ? (a + b) * (a + b) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0))
             : n1 + n2 - 2.0;
  }

  const double diff = m1 - m2;
  g.df = df;
  if (se == 0.0) {
    // Degenerate zero-variance groups.
    g.t_value = diff == 0.0 ? 0.0
                            : std::copysign(std::numeric_limits<double>::infinity(), diff);
    g.p_value = diff == 0.0 ? 1.0 : 0.0;
    return g;
  }
  g.t_value = diff / se;
  g.p_value = student_t_two_sided_p(g.t_value, df);
  return g;
}

std::map<std::string, double> case_variables(const Session& session,
                                             const PipelineConfig& cfg) {
  std::map<std::string, double> out;
  std::vector<ResponseEvent> events = parse_events(session.log, session.manifest, cfg.parser);
  std::vector<ResponseMeasure> measures = measure_responses(events, session.manifest);

  auto add_means = [&](MeasureKind kind, const char* latency_name, const char* duration_name) {
    double latency = 0.0, duration = 0.0;
    int n = 0;
    for (const ResponseMeasure& m : measures) {
      if (m.event_kind != kind) continue;
      latency += m.latency_s;
      duration += m.duration_s;
      ++n;
    }
    if (n > 0) {
      out[latency_name] = latency / n;
      out[duration_name] = duration / n;
    }
  };
  add_means(MeasureKind::Look, "latency_look", "duration_look");
  add_means(MeasureKind::Point, "latency_point", "duration_point");
  add_means(MeasureKind::Chase, "latency_chase", "duration_chase");

  bool seen = false;
  double vmax = 0.0, vmin = 0.0, amax = 0.0, amin = 0.0;
  for (const FrameRecord& frame : session.log.frames) {
    const PersonState* child = frame.find(Role::Child);
    if (!child || !child->present) continue;
    if (!seen) {
      vmax = vmin = child->valence;
      amax = amin = child->arousal;
      seen = true;
    } else {
      vmax = std::max(vmax, child->valence);
      vmin = std::min(vmin, child->valence);
      amax = std::max(amax, child->arousal);
      amin = std::min(amin, child->arousal);
    }
  }
  if (seen) {
    out["valence_max"] = vmax;
    out["valence_min"] = vmin;
    out["arousal_max"] = amax;
    out["arousal_min"] = amin;
  }

  std::vector<std::pair<double, double>> series;
  if (seen) series = child_valence_series(session.log);
  if (series.size() >= 2) {
    std::vector<DynamicPoint> points = find_dynamic_points(series, cfg.emotion);
    DynamicsStats stats = dynamics_stats(points, session.manifest.all_instructions());
    out["dynamic_frequency"] = static_cast<double>(stats.frequency);
    if (stats.latency_s) out["dynamic_latency"] = *stats.latency_s;
  }
  return out;
}

}  // namespace scbu
