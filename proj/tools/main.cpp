// Command line surface for the pipeline: generate synthetic datasets, parse
// logs into events, compile scripts, judge cases through one or many
// backends, and run the evaluation protocols. One binary, subcommands,
// config file plus flag overrides (flags win).
//
// Exit codes: 0 success, 1 usage or config, 2 data error, 3 backend error.
// Ctrl-C during a long run drains the worker pool and still emits the
// partial report; everything written lands under the --out directory.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scbu/ensemble.hpp"
#include "scbu/errors.hpp"
#include "scbu/eval_harness.hpp"
#include "scbu/run_config.hpp"
#include "scbu/util.hpp"

namespace fs = std::filesystem;
using namespace scbu;

namespace {

std::atomic<bool> g_cancel{false};

void on_interrupt(int) { g_cancel.store(true); }

void write_text(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  std::ofstream f(file, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + file.string() + "'");
  f << text;
}

void emit(bool json, const ojson& machine, const std::string& human) {
  if (json) {
    std::cout << machine.dump(2) << "\n";
  } else if (!human.empty()) {
    std::cout << human;
  }
}

Session load_case(const std::string& case_dir, const std::string& log_file,
                  const std::string& manifest_file) {
  if (!case_dir.empty()) {
    if (!fs::is_directory(case_dir)) {
      throw SchemaError("case directory '" + case_dir + "' does not exist");
    }
    return load_log(case_dir);
  }
  if (log_file.empty() || manifest_file.empty()) {
    throw ConfigError("pass either --case DIR or both --log FILE and --manifest FILE");
  }
  return load_log_files(log_file, manifest_file);
}

// Everything the subcommands need after flags beat config.
struct Invocation {
  RunConfig cfg;
  bool json = false;
  fs::path out;

  fs::path out_file(const fs::path& rel) const { return out / rel; }
};

int cmd_synth(Invocation& inv, const SynthSpec& spec) {
  Dataset dataset = synth_dataset(spec);
  save_dataset(dataset, inv.out);
  ojson machine;
  machine["command"] = "synth";
  machine["out"] = inv.out.string();
  machine["cases"] = dataset.size();
  machine["asd"] = spec.n_asd;
  machine["td"] = spec.n_td;
  machine["seed"] = spec.seed;
  emit(inv.json, machine,
       "wrote " + std::to_string(dataset.size()) + " cases (" + std::to_string(spec.n_asd) +
           " ASD, " + std::to_string(spec.n_td) + " TD) to " + inv.out.string() + "\n");
  return 0;
}

int cmd_parse(Invocation& inv, const Session& session) {
  std::vector<ResponseEvent> events =
      parse_events(session.log, session.manifest, inv.cfg.pipeline.parser);
  fs::path file = inv.out_file(session.log.case_id + ".events.json");
  write_text(file, events_to_json(events).dump(2) + "\n");
  ojson machine;
  machine["command"] = "parse";
  machine["case_id"] = session.log.case_id;
  machine["events"] = events.size();
  machine["file"] = file.string();
  emit(inv.json, machine,
       session.log.case_id + ": " + std::to_string(events.size()) + " events -> " +
           file.string() + "\n");
  return 0;
}

int cmd_script(Invocation& inv, const Session& session, bool no_emotion) {
  ScriptDocument doc;
  if (no_emotion) {
    std::vector<ResponseEvent> events =
        parse_events(session.log, session.manifest, inv.cfg.pipeline.parser);
    doc = compile_script(events, session.manifest, inv.cfg.pipeline.script,
                         inv.cfg.pipeline.templates);
  } else {
    doc = compile_case(session, inv.cfg.pipeline);
  }
  fs::path file = inv.out_file(session.log.case_id + ".script.txt");
  write_text(file, render_script(doc));
  ojson machine;
  machine["command"] = "script";
  machine["case_id"] = session.log.case_id;
  machine["lines"] = doc.lines.size();
  machine["emotion"] = !no_emotion;
  machine["file"] = file.string();
  emit(inv.json, machine,
       session.log.case_id + ": " + std::to_string(doc.lines.size()) + " lines -> " +
           file.string() + "\n");
  return 0;
}

int cmd_detect(Invocation& inv, std::vector<Session> sessions) {
  RunConfig& cfg = inv.cfg;
  ojson rows = ojson::array();
  std::string human;
  bool backend_failed = false;
  bool data_failed = false;

  for (const Session& session : sessions) {
    const std::string& id = session.log.case_id;
    if (g_cancel.load()) {
      rows.push_back({{"case_id", id}, {"error", "cancelled"}});
      human += id + "\tcancelled\n";
      continue;
    }
    try {
      ScriptDocument doc = compile_case(session, cfg.pipeline);
      PromptBundle bundle = build_prompt(doc, cfg.pipeline.profile, {}, cfg.pipeline.prompt,
                                         cfg.pipeline.prompts);
      switch (cfg.ensemble) {
        case EnsembleMode::None: {
          DetectionResult r = detect(bundle, cfg.pipeline.backend, cfg.pipeline.gateway);
          rows.push_back({{"case_id", id},
                          {"mode", "single"},
                          {"backend", r.backend},
                          {"label", to_string(r.label)},
                          {"prompt_hash", r.prompt_hash},
                          {"rationale", r.rationale}});
          human += id + "\t" + to_string(r.label) + "\n";
          break;
        }
        case EnsembleMode::Vote: {
          std::vector<DetectionResult> results;
          for (const BackendSpec& backend : cfg.backends) {
            results.push_back(detect(bundle, backend, cfg.pipeline.gateway));
          }
          VoteOutcome outcome = vote(results, cfg.vote);
          ojson votes = ojson::array();
          for (const DetectionResult& r : results) {
            votes.push_back({{"backend", r.backend}, {"label", to_string(r.label)}});
          }
          rows.push_back({{"case_id", id},
                          {"mode", "vote"},
                          {"label", to_string(outcome.label)},
                          {"tally", outcome.tally()},
                          {"tie", outcome.tie},
                          {"votes", std::move(votes)}});
          human += id + "\t" + to_string(outcome.label) + "\t(" + outcome.tally() + ")\n";
          break;
        }
        case EnsembleMode::Agents: {
          AgentConfig agents = cfg.agents;
          agents.decision_maker = select_backend(cfg, cfg.decision_maker);
          DiscussionTranscript transcript = run_agents(bundle, cfg.backends, agents);
          fs::path text_file = inv.out_file(fs::path("transcripts") / (id + ".txt"));
          fs::path json_file = inv.out_file(fs::path("transcripts") / (id + ".json"));
          write_text(text_file, render_transcript(transcript));
          write_text(json_file, transcript_to_json(transcript).dump(2) + "\n");
          ojson dropped = ojson::array();
          for (const std::string& d : transcript.dropped) dropped.push_back(d);
          rows.push_back({{"case_id", id},
                          {"mode", "agents"},
                          {"label", to_string(transcript.final.label)},
                          {"decided_by", to_string(transcript.final.decided_by)},
                          {"rounds", transcript.rounds.size()},
                          {"dropped", std::move(dropped)},
                          {"transcript", json_file.string()}});
          human += id + "\t" + to_string(transcript.final.label) + "\t(" +
                   to_string(transcript.final.decided_by) + ")\n";
          break;
        }
      }
    } catch (const BackendError& e) {
      backend_failed = true;
      rows.push_back({{"case_id", id}, {"error", e.what()}});
      human += id + "\terror\t" + e.what() + "\n";
    } catch (const NoQuorum& e) {
      backend_failed = true;
      rows.push_back({{"case_id", id}, {"error", e.what()}});
      human += id + "\terror\t" + e.what() + "\n";
    } catch (const DataError& e) {
      data_failed = true;
      rows.push_back({{"case_id", id}, {"error", e.what()}});
      human += id + "\terror\t" + e.what() + "\n";
    }
  }

  ojson machine;
  machine["command"] = "detect";
  machine["mode"] = to_string(cfg.ensemble);
  machine["results"] = rows;
  fs::path file = inv.out_file("results.json");
  write_text(file, machine.dump(2) + "\n");
  machine["file"] = file.string();
  emit(inv.json, machine, human);
  if (g_cancel.load() && !inv.json) std::cout << "cancelled: partial results written\n";
  if (backend_failed) return 3;
  if (data_failed) return 2;
  return 0;
}

int cmd_eval(Invocation& inv) {
  RunConfig& cfg = inv.cfg;
  if (cfg.dataset.empty()) throw ConfigError("eval needs --dataset DIR (or dataset in config)");
  Dataset dataset = load_dataset(cfg.dataset);
  cfg.pipeline.cancel = &g_cancel;

  ojson machine;
  machine["command"] = "eval";
  machine["protocol"] = cfg.protocol;
  std::string human;

  if (cfg.protocol == "sweep") {
    std::vector<SweepRow> rows = threshold_sweep(dataset, cfg.alphas, cfg.pipeline);
    std::string table = sweep_table(rows);
    write_text(inv.out_file("sweep.tsv"), table);
    ojson jrows = ojson::array();
    for (const SweepRow& row : rows) {
      jrows.push_back({{"alpha", row.alpha}, {"report", report_to_json(row.report)}});
    }
    write_text(inv.out_file("sweep.json"), jrows.dump(2) + "\n");
    machine["rows"] = std::move(jrows);
    machine["files"] = {inv.out_file("sweep.tsv").string(),
                        inv.out_file("sweep.json").string()};
    human = table;
  } else {
    EvalReport report = cfg.protocol == "fewshot"
                            ? fewshot_run(dataset, cfg.fewshot_seed, cfg.pipeline)
                            : loocv_run(dataset, cfg.pipeline);
    write_text(inv.out_file("report.txt"), render_report(report));
    write_text(inv.out_file("report.json"), report_to_json(report).dump(2) + "\n");
    machine["report"] = report_to_json(report);
    machine["files"] = {inv.out_file("report.txt").string(),
                        inv.out_file("report.json").string()};
    human = render_report(report);
  }

  machine["cancelled"] = g_cancel.load();
  emit(inv.json, machine, human);
  if (g_cancel.load() && !inv.json) std::cout << "cancelled: partial report written\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavioral screening pipeline: logs to scripts to model verdicts"};
  app.require_subcommand(1);

  std::string config_file;
  bool json = false;
  std::string out_flag;
  app.add_option("--config", config_file, "JSON run configuration")
      ->check(CLI::ExistingFile);
  app.add_flag("--json", json, "machine-readable output on stdout");
  app.add_option("--out", out_flag, "output directory (default from config, else ./out)");

  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
  synth->fallthrough();
  SynthSpec spec;
  synth->add_option("--asd", spec.n_asd, "ASD cases")->check(CLI::NonNegativeNumber);
  synth->add_option("--td", spec.n_td, "TD cases")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--fps", spec.fps, "frames per second");

  std::string case_dir, log_file, manifest_file, dataset_flag, backend_flag;
  std::string ensemble_flag, protocol_flag;
  double alpha_flag = 0.0;
  bool no_emotion = false;
  std::uint64_t seed_flag = 0;
  std::vector<double> alphas_flag;

  auto add_case_options = [&](CLI::App* cmd) {
    cmd->add_option("--case", case_dir, "case directory (log.jsonl + manifest.json)");
    cmd->add_option("--log", log_file, "behavior log (JSONL)");
    cmd->add_option("--manifest", manifest_file, "session manifest (JSON)");
  };

  auto* parse = app.add_subcommand("parse", "Extract response events from a log");
  parse->fallthrough();
  add_case_options(parse);

  auto* script = app.add_subcommand("script", "Compile a log into a timestamped script");
  script->fallthrough();
  add_case_options(script);
  script->add_flag("--no-emotion", no_emotion, "skip emotion segment description");
  script->add_option("--alpha", alpha_flag, "emotion derivative threshold");

  auto* detect = app.add_subcommand("detect", "Judge cases through the configured backends");
  detect->fallthrough();
  add_case_options(detect);
  detect->add_option("--dataset", dataset_flag, "dataset directory (labels.json)");
  detect->add_option("--backend", backend_flag, "roster backend for single-model runs");
  detect->add_option("--ensemble", ensemble_flag, "none, vote, or agents");
  detect->add_option("--alpha", alpha_flag, "emotion derivative threshold");

  auto* eval = app.add_subcommand("eval", "Run an evaluation protocol over a dataset");
  eval->fallthrough();
  eval->add_option("--dataset", dataset_flag, "dataset directory (labels.json)");
  eval->add_option("--protocol", protocol_flag, "loocv, fewshot, or sweep");
  eval->add_option("--seed", seed_flag, "fewshot split seed");
  eval->add_option("--alphas", alphas_flag, "sweep thresholds")->delimiter(',');
  eval->add_option("--backend", backend_flag, "roster backend to judge with");
  eval->add_option("--alpha", alpha_flag, "emotion derivative threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::signal(SIGINT, on_interrupt);

  try {
    Invocation inv;
    inv.cfg = config_file.empty() ? RunConfig{} : load_run_config(config_file);
    inv.json = json;

    // Flags win over the config file.
    if (!out_flag.empty()) inv.cfg.out = out_flag;
    if (!dataset_flag.empty()) inv.cfg.dataset = dataset_flag;
    if (detect->count("--ensemble")) inv.cfg.ensemble = ensemble_mode_from_string(ensemble_flag);
    if (!backend_flag.empty() || inv.cfg.pipeline.backend.name.empty()) {
      inv.cfg.pipeline.backend = select_backend(inv.cfg, backend_flag);
    }
    if (script->count("--alpha") || detect->count("--alpha") || eval->count("--alpha")) {
      inv.cfg.pipeline.emotion.alpha = alpha_flag;
    }
    if (eval->count("--protocol")) {
      if (protocol_flag != "loocv" && protocol_flag != "fewshot" && protocol_flag != "sweep") {
        throw ConfigError("--protocol must be loocv, fewshot, or sweep");
      }
      inv.cfg.protocol = protocol_flag;
    }
    if (eval->count("--seed")) inv.cfg.fewshot_seed = seed_flag;
    if (eval->count("--alphas")) inv.cfg.alphas = alphas_flag;

    inv.out = inv.cfg.out;
    fs::create_directories(inv.out);
    if (inv.cfg.audit) {
      inv.cfg.pipeline.gateway.audit_dir = inv.out / "audit";
      inv.cfg.agents.gateway.audit_dir = inv.out / "audit";
    }

    if (synth->parsed()) return cmd_synth(inv, spec);
    if (parse->parsed()) return cmd_parse(inv, load_case(case_dir, log_file, manifest_file));
    if (script->parsed()) {
      return cmd_script(inv, load_case(case_dir, log_file, manifest_file), no_emotion);
    }
    if (detect->parsed()) {
      std::vector<Session> sessions;
      if (!inv.cfg.dataset.empty() && case_dir.empty() && log_file.empty()) {
        for (LabeledCase& c : load_dataset(inv.cfg.dataset)) {
          sessions.push_back(std::move(c.session));
        }
      } else {
        sessions.push_back(load_case(case_dir, log_file, manifest_file));
      }
      return cmd_detect(inv, std::move(sessions));
    }
    if (eval->parsed()) return cmd_eval(inv);
    throw ConfigError("no subcommand given");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 3;
  } catch (const NoQuorum& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
