// run_config.hpp
//
// One JSON file describing a batch run: pipeline knobs, the backend roster,
// the fusion policy, and default paths. The command line can override any
// invocation-level choice; flags always win. Unknown keys are rejected at
// every level so a typo cannot silently fall back to a default.
//
// Credentials never appear in a config file. A backend entry carries only
// the NAME of the environment variable that holds its key.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scbu/ensemble.hpp"
#include "scbu/eval_harness.hpp"

namespace scbu {

enum class EnsembleMode { None, Vote, Agents };

const char* to_string(EnsembleMode m);
EnsembleMode ensemble_mode_from_string(const std::string& s);

struct RunConfig {
  PipelineConfig pipeline;  // pipeline.backend is the selected roster entry

  // Every configured backend; ensembles use the whole roster.
  std::vector<BackendSpec> backends = {BackendSpec{}};

  EnsembleMode ensemble = EnsembleMode::None;
  VoteConfig vote;
  AgentConfig agents;          // decision_maker resolved from the roster
  std::string decision_maker;  // roster name; empty means the first entry

  // Default paths, overridable per invocation.
  std::filesystem::path dataset;
  std::filesystem::path out = "out";

  // Evaluation protocol defaults.
  std::string protocol = "loocv";
  std::uint64_t fewshot_seed = 1;
  std::vector<double> alphas = {0.05, 0.1, 0.175, 0.2, 0.3};

  // Mirror every raw model answer under <out>/audit.
  bool audit = false;
};

// The roster entry with the given name; an empty name picks the first.
const BackendSpec& select_backend(const RunConfig& cfg, const std::string& name);

// Parse and validate a config file. Referenced paths (templates, prompt
// texts, fixture dirs, dataset) must exist at load time.
RunConfig load_run_config(const std::filesystem::path& file);

}  // namespace scbu
