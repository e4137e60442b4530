// rapnet: data generation, training, evaluation, ablation, attention export
// and gradient checking for the response-selection models.

#include "rapnet/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace rapnet;

namespace {

void add_model_options(CLI::App* app, RunConfig& cfg, std::string& kind) {
  app->add_option("--model", kind, "rapnet, dual_encoder or hred")->check(CLI::IsMember({"rapnet", "dual_encoder", "hred"}));
  app->add_option("--embed-dim", cfg.embed_dim, "word embedding width e");
  app->add_option("--hidden", cfg.hidden, "LSTM hidden width h");
}

void add_flag_options(CLI::App* app, RunConfig& cfg) {
  app->add_flag_callback("--no-inter-attention", [&] { cfg.flags.inter_attention = false; }, "drop align/mean/max casts");
  app->add_flag_callback("--no-intra-attention", [&] { cfg.flags.intra_attention = false; }, "drop the intra cast");
  app->add_flag_callback("--no-highway", [&] { cfg.flags.highway_encoder = false; }, "skip the MCAN highway encoder");
  app->add_flag_callback("--no-dynamic-pooling", [&] { cfg.flags.dynamic_pooling = false; },
                         "last hidden states instead of per-utterance max pooling");
  app->add_flag_callback("--no-mcan", [&] { cfg.flags.use_mcan = false; }, "zero the f_mcan features");
  app->add_flag_callback("--no-knowledge", [&] { cfg.flags.use_knowledge = false; }, "zero the knowledge features");
}

void add_eval_options(CLI::App* app, RunConfig& cfg, std::string& tau) {
  app->add_option("--subtask", cfg.subtask, "1, 3 or 4")->check(CLI::IsMember({1, 3, 4}));
  app->add_option("--tau", tau, "no-answer threshold for subtask 4, or 'auto'");
  app->add_option("--jobs", cfg.jobs, "evaluation threads")->check(CLI::PositiveNumber);
}

void add_train_options(CLI::App* app, RunConfig& cfg) {
  app->add_option("--train", cfg.train_path, "training corpus (JSONL)")->required();
  app->add_option("--dev", cfg.dev_path, "development corpus (JSONL)")->required();
  app->add_option("--lr", cfg.lr, "Adam learning rate");
  app->add_option("--epochs", cfg.epochs, "training epochs");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  std::string kind = "rapnet";
  std::string tau = "auto";

  CLI::App app{"Response selection with dynamic-pooling LSTMs and multi-cast attention"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--out", cfg.out_dir, "parent directory for run directories");
  app.add_option("--seed", cfg.seed, "random seed");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic train/dev/test corpus");
  gen->add_option("--subtask", cfg.subtask, "1, 3 or 4")->check(CLI::IsMember({1, 3, 4}));
  gen->add_option("--n-train", cfg.n_train);
  gen->add_option("--n-dev", cfg.n_dev);
  gen->add_option("--n-test", cfg.n_test);
  gen->add_option("--vocab-size", cfg.vocab_size);
  gen->add_option("--candidates", cfg.k_candidates);
  gen->add_flag("--with-knowledge", cfg.with_knowledge, "add suggested/prior course sets");
  gen->add_option("--hard-negatives", cfg.hard_negative_fraction, "share of same-topic negatives");
  gen->add_option("--no-answer-fraction", cfg.no_answer_fraction, "subtask 4 all-negative share");

  auto* tr = app.add_subcommand("train", "train a model and keep the best dev epoch");
  add_train_options(tr, cfg);
  add_model_options(tr, cfg, kind);
  add_flag_options(tr, cfg);
  add_eval_options(tr, cfg, tau);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", cfg.checkpoint_path)->required();
  ev->add_option("--corpus", cfg.corpus_path)->required();
  add_eval_options(ev, cfg, tau);

  auto* ab = app.add_subcommand("ablate", "full model and four single-removal variants");
  add_train_options(ab, cfg);
  add_model_options(ab, cfg, kind);
  add_flag_options(ab, cfg);
  add_eval_options(ab, cfg, tau);
  ab->add_option("--seeds", cfg.seeds, "seeds averaged per row (default: --seed)");

  auto* dump = app.add_subcommand("dump-attention", "export normalised f_mcan maps as CSV");
  dump->add_option("--checkpoint", cfg.checkpoint_path)->required();
  dump->add_option("--corpus", cfg.corpus_path)->required();
  dump->add_option("--subtask", cfg.subtask)->check(CLI::IsMember({1, 3, 4}));
  dump->add_option("--dialogue", cfg.dialogue_id, "dialogue id (default: first)");
  dump->add_option("--candidate", cfg.candidate, "candidate index");

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of every parameter on a toy dialogue");
  gc->add_option("--model", kind, "rapnet, dual_encoder or hred")->check(CLI::IsMember({"rapnet", "dual_encoder", "hred"}));
  add_flag_options(gc, cfg);
  gc->add_flag("--with-knowledge", cfg.with_knowledge, "include knowledge features");
  gc->add_option("--eps", cfg.eps, "central difference step");
  gc->add_option("--tolerance", cfg.tolerance, "maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  cfg.command = app.get_subcommands().front()->get_name();
  cfg.model_kind = parse_model_kind(kind);
  if (tau != "auto") {
    try {
      std::size_t used = 0;
      cfg.tau = std::stod(tau, &used);
      if (used != tau.size()) throw std::invalid_argument(tau);
    } catch (const std::exception&) {
      std::cerr << "error: --tau must be a number or 'auto', got '" << tau << "'\n";
      return kExitInvalid;
    }
  }
  return run_command(cfg, std::cout, std::cerr).code;
}
