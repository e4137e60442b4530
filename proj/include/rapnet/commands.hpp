#pragma once

// Command implementations behind the rapnet executable. Each returns an exit
// code (0 ok, 1 invalid input, 2 numerical failure) and prints a short
// summary; artifacts go to a fresh <out>/run-<timestamp>-<seed>/ directory.

#include "rapnet/grad_check.hpp"
#include "rapnet/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rapnet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNumerical = 2;

struct RunConfig {
  std::string command;
  std::filesystem::path train_path, dev_path, corpus_path, checkpoint_path;
  std::filesystem::path out_dir = "runs";
  ModelKind model_kind = ModelKind::rapnet;
  AblationFlags flags;
  int embed_dim = 64;
  int hidden = 32;
  double lr = 0.001;
  int epochs = 10;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // ablate; empty means {seed}
  int subtask = 1;
  std::optional<double> tau;  // unset: auto
  int jobs = 1;

  // gen-data
  int n_train = 2000, n_dev = 200, n_test = 200;
  int vocab_size = 200;
  int k_candidates = 10;
  bool with_knowledge = false;
  double hard_negative_fraction = 0.5;
  double no_answer_fraction = 0.2;

  // dump-attention
  std::string dialogue_id;  // empty: first dialogue
  int candidate = 0;

  // grad-check
  double eps = 1e-5;
  double tolerance = 1e-4;
};

/// JSON snapshot written as config.json in every run directory.
std::string run_config_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

/// Creates <out>/run-<UTC timestamp>-<seed>[-n]/.
std::filesystem::path make_run_dir(const std::filesystem::path& out, std::uint64_t seed);

/// Model and corpus used by grad-check: two utterances of three tokens, two
/// candidates, e = 4, h = 3.
ModelConfig grad_check_model_config(ModelKind kind, const AblationFlags& flags, int knowledge_dim);
EncodedDialogue grad_check_dialogue(const ModelConfig& cfg, std::uint64_t seed);
GradCheckReport<double> grad_check_model(ResponseModel& model, const EncodedDialogue& d, double eps);

struct CommandResult {
  int code = kExitOk;
  std::filesystem::path run_dir;
};

// These throw on bad input; run_command turns exceptions into exit codes.
CommandResult cmd_gen_data(const RunConfig& cfg, std::ostream& out);
CommandResult cmd_train(const RunConfig& cfg, std::ostream& out);
CommandResult cmd_eval(const RunConfig& cfg, std::ostream& out);
CommandResult cmd_ablate(const RunConfig& cfg, std::ostream& out);
CommandResult cmd_dump_attention(const RunConfig& cfg, std::ostream& out);
CommandResult cmd_grad_check(const RunConfig& cfg, std::ostream& out);

/// Dispatches on cfg.command; error messages go to `err`.
CommandResult run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace rapnet
