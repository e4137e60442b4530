#include "rapnet/commands.hpp"

#include "rapnet/ablation.hpp"
#include "rapnet/attention.hpp"
#include "rapnet/checkpoint.hpp"
#include "rapnet/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <random>

namespace rapnet {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json flags_json(const AblationFlags& f) {
  return {{"inter_attention", f.inter_attention}, {"intra_attention", f.intra_attention},
          {"highway_encoder", f.highway_encoder}, {"dynamic_pooling", f.dynamic_pooling},
          {"use_mcan", f.use_mcan},               {"use_knowledge", f.use_knowledge}};
}

ordered_json report_json(const EvalReport& r) {
  ordered_json j;
  j["subtask"] = r.subtask;
  j["tau"] = r.tau ? ordered_json(*r.tau) : ordered_json(nullptr);
  for (std::size_t i = 0; i < r.ks.size(); ++i) j["r_at_" + std::to_string(r.ks[i])] = r.recall[i];
  j["mrr"] = r.mrr;
  j["average"] = r.average;
  if (r.subtask == 4) {
    j["no_answer_precision"] = r.no_answer_precision;
    j["no_answer_recall"] = r.no_answer_recall;
  }
  j["dialogues"] = r.ranks.size();
  j["ranks"] = r.ranks;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void print_report(std::ostream& out, const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "R@1 %.4f  R@2 %.4f  R@5 %.4f  R@10 %.4f  MRR %.4f  average %.4f\n",
                r.recall_at(1), r.recall_at(2), r.recall_at(5), r.recall_at(10), r.mrr, r.average);
  out << buf;
  if (r.subtask == 4) {
    std::snprintf(buf, sizeof buf, "tau %.2f  no-answer precision %.4f  recall %.4f\n", *r.tau, r.no_answer_precision,
                  r.no_answer_recall);
    out << buf;
  }
}

ModelConfig model_config(const RunConfig& cfg, int vocab_size, int knowledge_dim) {
  ModelConfig mc;
  mc.kind = cfg.model_kind;
  mc.vocab_size = vocab_size;
  mc.embed_dim = cfg.embed_dim;
  mc.hidden = cfg.hidden;
  mc.knowledge_dim = knowledge_dim;
  mc.flags = cfg.flags;
  return mc;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.lr = cfg.lr;
  tc.epochs = cfg.epochs;
  tc.seed = cfg.seed;
  tc.subtask = cfg.subtask;
  tc.tau = cfg.tau;
  tc.jobs = cfg.jobs;
  return tc;
}

void check_common(const RunConfig& cfg) {
  validate_subtask(cfg.subtask);
  if (cfg.embed_dim <= 0 || cfg.hidden <= 0) throw std::invalid_argument("--embed-dim and --hidden must be positive");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("--lr must be positive");
  if (cfg.epochs < 0) throw std::invalid_argument("--epochs must be >= 0");
  if (cfg.jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
  if (cfg.tau && !(*cfg.tau >= 0.0 && *cfg.tau <= 1.0)) throw std::invalid_argument("--tau must lie in [0, 1]");
  if (cfg.tau && cfg.subtask != 4) throw std::invalid_argument("--tau applies to subtask 4 only");
}

struct Corpora {
  Corpus train, dev;
  Vocab vocab;
  int knowledge_dim = 0;
  std::vector<EncodedDialogue> train_enc, dev_enc;
};

Corpora load_train_dev(const RunConfig& cfg) {
  if (cfg.train_path.empty() || cfg.dev_path.empty()) throw std::invalid_argument("--train and --dev are required");
  Corpora c;
  c.train = load_corpus(cfg.train_path, cfg.subtask);
  c.dev = load_corpus(cfg.dev_path, cfg.subtask);
  if (c.train.empty()) throw DataError(cfg.train_path.string() + ": no dialogues");
  if (c.dev.empty()) throw DataError(cfg.dev_path.string() + ": no dialogues");
  c.vocab = build_vocab(c.train, 1);
  c.knowledge_dim = corpus_has_knowledge(c.train) ? kKnowledgeDim : 0;
  c.train_enc = encode_corpus(c.train, c.vocab, c.knowledge_dim);
  c.dev_enc = encode_corpus(c.dev, c.vocab, c.knowledge_dim);
  return c;
}

struct Loaded {
  std::unique_ptr<ResponseModel> model;
  Vocab vocab;
};

Loaded load_model(const RunConfig& cfg) {
  if (cfg.checkpoint_path.empty()) throw std::invalid_argument("--checkpoint is required");
  Loaded l;
  l.model = load_checkpoint(cfg.checkpoint_path);
  l.vocab = load_vocab(cfg.checkpoint_path.parent_path() / "vocab.txt");
  if (l.vocab.size() != l.model->config().vocab_size)
    throw DataError("vocab.txt has " + std::to_string(l.vocab.size()) + " entries, checkpoint expects " +
                    std::to_string(l.model->config().vocab_size));
  return l;
}

std::vector<EncodedDialogue> encode_for(const ResponseModel& m, const Corpus& c, const Vocab& v) {
  return encode_corpus(c, v, m.config().knowledge_dim, m.config().limits);
}

}  // namespace

std::string run_config_json(const RunConfig& c) {
  ordered_json j;
  j["command"] = c.command;
  j["train"] = c.train_path.string();
  j["dev"] = c.dev_path.string();
  j["corpus"] = c.corpus_path.string();
  j["checkpoint"] = c.checkpoint_path.string();
  j["out"] = c.out_dir.string();
  j["model_kind"] = to_string(c.model_kind);
  j["flags"] = flags_json(c.flags);
  j["embed_dim"] = c.embed_dim;
  j["hidden"] = c.hidden;
  j["lr"] = c.lr;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["seeds"] = c.seeds;
  j["subtask"] = c.subtask;
  j["tau"] = c.tau ? ordered_json(*c.tau) : ordered_json("auto");
  j["jobs"] = c.jobs;
  j["n_train"] = c.n_train;
  j["n_dev"] = c.n_dev;
  j["n_test"] = c.n_test;
  j["vocab_size"] = c.vocab_size;
  j["k_candidates"] = c.k_candidates;
  j["with_knowledge"] = c.with_knowledge;
  j["hard_negative_fraction"] = c.hard_negative_fraction;
  j["no_answer_fraction"] = c.no_answer_fraction;
  j["dialogue_id"] = c.dialogue_id;
  j["candidate"] = c.candidate;
  j["eps"] = c.eps;
  j["tolerance"] = c.tolerance;
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  RunConfig c;
  c.command = j.at("command").get<std::string>();
  c.train_path = j.at("train").get<std::string>();
  c.dev_path = j.at("dev").get<std::string>();
  c.corpus_path = j.at("corpus").get<std::string>();
  c.checkpoint_path = j.at("checkpoint").get<std::string>();
  c.out_dir = j.at("out").get<std::string>();
  c.model_kind = parse_model_kind(j.at("model_kind").get<std::string>());
  const auto& f = j.at("flags");
  c.flags = {f.at("inter_attention").get<bool>(), f.at("intra_attention").get<bool>(),
             f.at("highway_encoder").get<bool>(), f.at("dynamic_pooling").get<bool>(),
             f.at("use_mcan").get<bool>(),        f.at("use_knowledge").get<bool>()};
  c.embed_dim = j.at("embed_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.lr = j.at("lr").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.subtask = j.at("subtask").get<int>();
  if (j.at("tau").is_number()) c.tau = j.at("tau").get<double>();
  c.jobs = j.at("jobs").get<int>();
  c.n_train = j.at("n_train").get<int>();
  c.n_dev = j.at("n_dev").get<int>();
  c.n_test = j.at("n_test").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.k_candidates = j.at("k_candidates").get<int>();
  c.with_knowledge = j.at("with_knowledge").get<bool>();
  c.hard_negative_fraction = j.at("hard_negative_fraction").get<double>();
  c.no_answer_fraction = j.at("no_answer_fraction").get<double>();
  c.dialogue_id = j.at("dialogue_id").get<std::string>();
  c.candidate = j.at("candidate").get<int>();
  c.eps = j.at("eps").get<double>();
  c.tolerance = j.at("tolerance").get<double>();
  return c;
}

fs::path make_run_dir(const fs::path& out, std::uint64_t seed) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  const std::string base = std::string("run-") + stamp + "-" + std::to_string(seed);
  fs::create_directories(out);
  for (int n = 1;; ++n) {
    fs::path dir = out / (n == 1 ? base : base + "-" + std::to_string(n));
    if (fs::create_directory(dir)) return dir;
  }
}

ModelConfig grad_check_model_config(ModelKind kind, const AblationFlags& flags, int knowledge_dim) {
  ModelConfig mc;
  mc.kind = kind;
  mc.vocab_size = 8;
  mc.embed_dim = 4;
  mc.hidden = 3;
  mc.knowledge_dim = knowledge_dim;
  mc.flags = flags;
  mc.init_range = 0.5;
  return mc;
}

EncodedDialogue grad_check_dialogue(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(Vocab::kReserved, cfg.vocab_size - 1);
  auto sequence = [&](int speaker) {
    EncodedSequence s;
    s.ids = {speaker, word(rng), word(rng)};
    if (speaker < 0) s.ids[0] = word(rng);
    s.knowledge = MatrixXd::Zero(3, cfg.knowledge_dim);
    for (Index i = 0; i < s.knowledge.size(); ++i) s.knowledge.data()[i] = static_cast<double>(rng() % 2);
    return s;
  };
  EncodedDialogue d;
  d.id = "grad-check";
  d.utterances = {sequence(Vocab::kSpeaker1), sequence(Vocab::kSpeaker2)};
  d.candidates = {sequence(-1), sequence(-1)};
  d.labels = {1, 0};
  return d;
}

GradCheckReport<double> grad_check_model(ResponseModel& model, const EncodedDialogue& d, double eps) {
  auto params = model.parameters();
  return grad_check([&](Tape& t) { return model.loss(t, d); }, params, eps);
}

CommandResult cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
  if (cfg.n_train < 1 || cfg.n_dev < 1 || cfg.n_test < 0) throw std::invalid_argument("split sizes must be positive");
  SyntheticConfig sc;
  sc.n_dialogues = cfg.n_train + cfg.n_dev + cfg.n_test;
  sc.vocab_size = cfg.vocab_size;
  sc.k_candidates = cfg.k_candidates;
  sc.subtask = cfg.subtask;
  sc.with_knowledge = cfg.with_knowledge;
  sc.seed = cfg.seed;
  sc.hard_negative_fraction = cfg.hard_negative_fraction;
  sc.no_answer_fraction = cfg.no_answer_fraction;
  Corpus all = gen_synthetic(sc);

  const fs::path dir = make_run_dir(cfg.out_dir, cfg.seed);
  auto split = [&](const char* name, std::size_t begin, std::size_t n) {
    write_corpus(dir / name, Corpus(all.begin() + static_cast<std::ptrdiff_t>(begin),
                                    all.begin() + static_cast<std::ptrdiff_t>(begin + n)));
  };
  const auto nt = static_cast<std::size_t>(cfg.n_train), nd = static_cast<std::size_t>(cfg.n_dev);
  split("train.jsonl", 0, nt);
  split("dev.jsonl", nt, nd);
  split("test.jsonl", nt + nd, static_cast<std::size_t>(cfg.n_test));

  ordered_json manifest;
  manifest["seed"] = cfg.seed;
  manifest["subtask"] = cfg.subtask;
  manifest["vocab_size"] = cfg.vocab_size;
  manifest["k_candidates"] = cfg.k_candidates;
  manifest["with_knowledge"] = cfg.with_knowledge;
  manifest["hard_negative_fraction"] = cfg.hard_negative_fraction;
  manifest["no_answer_fraction"] = cfg.no_answer_fraction;
  manifest["splits"] = {{"train", cfg.n_train}, {"dev", cfg.n_dev}, {"test", cfg.n_test}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(dir / "config.json", run_config_json(cfg));
  out << "wrote " << cfg.n_train << "/" << cfg.n_dev << "/" << cfg.n_test << " dialogues to " << dir.string() << "\n";
  return {kExitOk, dir};
}

CommandResult cmd_train(const RunConfig& cfg, std::ostream& out) {
  check_common(cfg);
  auto data = load_train_dev(cfg);
  ModelConfig mc = model_config(cfg, data.vocab.size(), data.knowledge_dim);
  auto model = make_model(mc, cfg.seed);
  out << to_string(mc.kind) << ": " << model->parameter_count() << " parameters, " << data.train_enc.size()
      << " train / " << data.dev_enc.size() << " dev dialogues\n";

  const fs::path dir = make_run_dir(cfg.out_dir, cfg.seed);
  write_text(dir / "config.json", run_config_json(cfg));
  save_vocab(dir / "vocab.txt", data.vocab);
  auto res = train(std::move(model), data.train_enc, data.dev_enc, train_config(cfg), [&](const EpochRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d  loss %.6f  dev R@10 %.4f  MRR %.4f  average %.4f\n", r.epoch,
                  r.train_loss, r.dev_r_at_10, r.dev_mrr, r.dev_avg);
    out << buf << std::flush;
  });
  write_history(dir / "history.jsonl", res.history);
  save_checkpoint(dir / "model.ckpt", *res.best);
  auto report = res.best_dev ? *res.best_dev : evaluate(*res.best, data.dev_enc, cfg.subtask, cfg.tau, cfg.jobs);
  auto metrics = report_json(report);
  metrics["best_epoch"] = res.best_epoch;
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  out << "best epoch " << res.best_epoch << ", dev ";
  print_report(out, report);
  out << "run directory " << dir.string() << "\n";
  return {kExitOk, dir};
}

CommandResult cmd_eval(const RunConfig& cfg, std::ostream& out) {
  check_common(cfg);
  const fs::path& path = cfg.corpus_path.empty() ? cfg.dev_path : cfg.corpus_path;
  if (path.empty()) throw std::invalid_argument("--corpus is required");
  auto loaded = load_model(cfg);
  Corpus corpus = load_corpus(path, cfg.subtask);
  if (corpus.empty()) throw DataError(path.string() + ": no dialogues");
  auto enc = encode_for(*loaded.model, corpus, loaded.vocab);
  auto report = evaluate(*loaded.model, enc, cfg.subtask, cfg.tau, cfg.jobs);
  const fs::path dir = make_run_dir(cfg.out_dir, cfg.seed);
  write_text(dir / "config.json", run_config_json(cfg));
  write_text(dir / "metrics.json", report_json(report).dump(2) + "\n");
  print_report(out, report);
  out << "run directory " << dir.string() << "\n";
  return {kExitOk, dir};
}

CommandResult cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  check_common(cfg);
  if (cfg.model_kind != ModelKind::rapnet) throw std::invalid_argument("ablate requires --model rapnet");
  auto data = load_train_dev(cfg);
  const std::vector<std::uint64_t> seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.seeds;
  const fs::path dir = make_run_dir(cfg.out_dir, cfg.seed);
  write_text(dir / "config.json", run_config_json(cfg));
  auto rows = run_ablation(model_config(cfg, data.vocab.size(), data.knowledge_dim), train_config(cfg), seeds,
                           data.train_enc, data.dev_enc);
  const std::string table = ablation_markdown(rows);
  write_text(dir / "ablation.md", table);
  ordered_json j = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json row;
    row["variant"] = r.name;
    row["flags"] = flags_json(r.flags);
    row["r_at_10"] = r.r_at_10;
    row["mrr"] = r.mrr;
    row["average"] = r.average;
    row["per_seed_average"] = ordered_json::array();
    for (const auto& rep : r.reports) row["per_seed_average"].push_back(rep.average);
    j.push_back(row);
  }
  write_text(dir / "ablation.json", j.dump(2) + "\n");
  out << table << "run directory " << dir.string() << "\n";
  return {kExitOk, dir};
}

CommandResult cmd_dump_attention(const RunConfig& cfg, std::ostream& out) {
  const fs::path& path = cfg.corpus_path.empty() ? cfg.dev_path : cfg.corpus_path;
  if (path.empty()) throw std::invalid_argument("--corpus is required");
  auto loaded = load_model(cfg);
  const auto* rap = dynamic_cast<const RapNet*>(loaded.model.get());
  if (!rap) throw std::invalid_argument("dump-attention needs a rapnet checkpoint");
  Corpus corpus = load_corpus(path, cfg.subtask);
  auto it = corpus.begin();
  if (!cfg.dialogue_id.empty())
    it = std::find_if(corpus.begin(), corpus.end(), [&](const Dialogue& d) { return d.id == cfg.dialogue_id; });
  if (it == corpus.end())
    throw DataError(cfg.dialogue_id.empty() ? path.string() + ": no dialogues"
                                            : "dialogue '" + cfg.dialogue_id + "' not in " + path.string());
  if (cfg.candidate < 0 || static_cast<std::size_t>(cfg.candidate) >= it->candidates.size())
    throw std::invalid_argument("--candidate " + std::to_string(cfg.candidate) + " out of range for dialogue '" +
                                it->id + "'");
  auto enc = encode_dialogue(*it, loaded.vocab, rap->config().knowledge_dim, rap->config().limits);
  attention_maps(*rap, enc, loaded.vocab, static_cast<std::size_t>(cfg.candidate));  // validate before writing
  const fs::path dir = make_run_dir(cfg.out_dir, cfg.seed);
  write_text(dir / "config.json", run_config_json(cfg));
  auto dump = dump_attention(*rap, enc, loaded.vocab, static_cast<std::size_t>(cfg.candidate), dir / "attention");
  out << "dialogue " << it->id << " candidate " << cfg.candidate << ": " << dump.context.tokens.size()
      << " context tokens, " << dump.response.tokens.size() << " response tokens\n"
      << "run directory " << dir.string() << "\n";
  return {kExitOk, dir};
}

CommandResult cmd_grad_check(const RunConfig& cfg, std::ostream& out) {
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("--eps must be positive");
  const int kd = cfg.with_knowledge ? kKnowledgeDim : 0;
  ModelConfig mc = grad_check_model_config(cfg.model_kind, cfg.flags, kd);
  auto model = make_model(mc, cfg.seed);
  const auto d = grad_check_dialogue(mc, cfg.seed);
  const auto rep = grad_check_model(*model, d, cfg.eps);
  char buf[256];
  for (const auto& [name, err] : rep.per_parameter) {
    std::snprintf(buf, sizeof buf, "  %-28s %.3e\n", name.c_str(), err);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "max relative error %.3e over %zu entries (worst %s[%ld]: analytic %.6e, numeric %.6e)\n",
                rep.max_relative_error, rep.checked, rep.worst_parameter.c_str(), static_cast<long>(rep.worst_index),
                rep.worst_analytic, rep.worst_numeric);
  out << buf;
  const bool ok = rep.passed(cfg.tolerance);
  out << (ok ? "PASS" : "FAIL") << " at tolerance " << cfg.tolerance << "\n";

  const fs::path dir = make_run_dir(cfg.out_dir, cfg.seed);
  write_text(dir / "config.json", run_config_json(cfg));
  ordered_json j;
  j["max_relative_error"] = rep.max_relative_error;
  j["worst_parameter"] = rep.worst_parameter;
  j["checked"] = rep.checked;
  j["finite"] = rep.finite;
  j["passed"] = ok;
  for (const auto& [name, err] : rep.per_parameter) j["per_parameter"][name] = err;
  write_text(dir / "grad_check.json", j.dump(2) + "\n");
  return {ok ? kExitOk : kExitNumerical, dir};
}

CommandResult run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.command == "gen-data") return cmd_gen_data(cfg, out);
    if (cfg.command == "train") return cmd_train(cfg, out);
    if (cfg.command == "eval") return cmd_eval(cfg, out);
    if (cfg.command == "ablate") return cmd_ablate(cfg, out);
    if (cfg.command == "dump-attention") return cmd_dump_attention(cfg, out);
    if (cfg.command == "grad-check") return cmd_grad_check(cfg, out);
    err << "error: unknown command '" << cfg.command << "'\n";
    return {kExitInvalid, {}};
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return {kExitNumerical, {}};
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return {kExitInvalid, {}};
  }
}

}  // namespace rapnet
