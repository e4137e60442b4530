#include "rapnet/model.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rapnet {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::rapnet: return "rapnet";
    case ModelKind::dual_encoder: return "dual_encoder";
    case ModelKind::hred: return "hred";
  }
  return "rapnet";
}

std::string to_string(CandidatePool pool) { return pool == CandidatePool::cells ? "cells" : "hiddens"; }

ModelKind parse_model_kind(std::string_view text) {
  if (text == "rapnet") return ModelKind::rapnet;
  if (text == "dual_encoder") return ModelKind::dual_encoder;
  if (text == "hred") return ModelKind::hred;
  throw std::invalid_argument("unknown model kind '" + std::string(text) + "'");
}

CandidatePool parse_candidate_pool(std::string_view text) {
  if (text == "cells") return CandidatePool::cells;
  if (text == "hiddens") return CandidatePool::hiddens;
  throw std::invalid_argument("unknown candidate pool '" + std::string(text) + "'");
}

// ModelConfig ------------------------------------------------------------------

std::string ModelConfig::to_text() const {
  char range[32];
  std::snprintf(range, sizeof range, "%.17g", init_range);
  std::ostringstream os;
  auto flag = [&](const char* key, bool v) { os << key << '=' << (v ? "true" : "false") << '\n'; };
  os << "model_kind=" << to_string(kind) << '\n'
     << "vocab_size=" << vocab_size << '\n'
     << "embed_dim=" << embed_dim << '\n'
     << "hidden=" << hidden << '\n'
     << "knowledge_dim=" << knowledge_dim << '\n'
     << "candidate_pool=" << to_string(candidate_pool) << '\n';
  flag("inter_attention", flags.inter_attention);
  flag("intra_attention", flags.intra_attention);
  flag("highway_encoder", flags.highway_encoder);
  flag("dynamic_pooling", flags.dynamic_pooling);
  flag("use_mcan", flags.use_mcan);
  flag("use_knowledge", flags.use_knowledge);
  os << "init_range=" << range << '\n'
     << "max_utterances=" << limits.max_utterances << '\n'
     << "max_tokens=" << limits.max_tokens << '\n';
  return os.str();
}

ModelConfig ModelConfig::parse(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument(std::string("config missing key '") + key + "'");
    return it->second;
  };
  auto to_int = [&](const char* key) {
    const auto& s = get(key);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument(std::string("config key '") + key + "' is not an integer");
    return v;
  };
  auto to_bool = [&](const char* key) {
    const auto& s = get(key);
    if (s == "true") return true;
    if (s == "false") return false;
    throw std::invalid_argument(std::string("config key '") + key + "' is not a boolean");
  };
  ModelConfig c;
  c.kind = parse_model_kind(get("model_kind"));
  c.vocab_size = to_int("vocab_size");
  c.embed_dim = to_int("embed_dim");
  c.hidden = to_int("hidden");
  c.knowledge_dim = to_int("knowledge_dim");
  c.candidate_pool = parse_candidate_pool(get("candidate_pool"));
  c.flags.inter_attention = to_bool("inter_attention");
  c.flags.intra_attention = to_bool("intra_attention");
  c.flags.highway_encoder = to_bool("highway_encoder");
  c.flags.dynamic_pooling = to_bool("dynamic_pooling");
  c.flags.use_mcan = to_bool("use_mcan");
  c.flags.use_knowledge = to_bool("use_knowledge");
  c.init_range = std::stod(get("init_range"));
  c.limits.max_utterances = to_int("max_utterances");
  c.limits.max_tokens = to_int("max_tokens");
  return c;
}

// ResponseModel ------------------------------------------------------------------

std::vector<const Parameter*> ResponseModel::parameters() const {
  auto mutable_params = const_cast<ResponseModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

Var ResponseModel::loss(Tape& tape, const EncodedDialogue& d) const { return bce_loss(forward(tape, d), d.labels); }

std::vector<double> ResponseModel::score(const EncodedDialogue& d) const {
  Tape tape;
  auto p = forward(tape, d);
  const auto& v = p.value();
  return {v.data(), v.data() + v.size()};
}

std::size_t ResponseModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

std::unique_ptr<ResponseModel> make_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.vocab_size <= 0 || cfg.embed_dim <= 0 || cfg.hidden <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (cfg.knowledge_dim != 0 && cfg.knowledge_dim != kKnowledgeDim)
    throw std::invalid_argument("knowledge_dim must be 0 or " + std::to_string(kKnowledgeDim));
  switch (cfg.kind) {
    case ModelKind::rapnet: {
      auto m = std::make_unique<RapNet>(cfg);
      m->init(seed);
      return m;
    }
    case ModelKind::dual_encoder: {
      auto m = std::make_unique<DualEncoder>(cfg);
      m->init(seed);
      return m;
    }
    case ModelKind::hred: {
      auto m = std::make_unique<Hred>(cfg);
      m->init(seed);
      return m;
    }
  }
  throw std::invalid_argument("unknown model kind");
}

Var augment(const Var& words, const Var& f_mcan, const Var& knowledge) {
  if (words.rows() != f_mcan.rows() || words.rows() != knowledge.rows())
    throw ShapeError("augment: row counts differ " + shape_str(words.value()) + ", " + shape_str(knowledge.value()) +
                     ", " + shape_str(f_mcan.value()));
  return concat_cols({words, knowledge, f_mcan});
}

Var bce_loss(const Var& probs, std::span<const int> labels) { return binary_cross_entropy(probs, labels); }

namespace {

struct FlatContext {
  std::vector<int> ids;
  std::vector<int> lengths;
  MatrixXd knowledge;
};

FlatContext flatten(const EncodedDialogue& d, int knowledge_dim) {
  if (d.utterances.empty()) throw std::invalid_argument("dialogue '" + d.id + "' has no utterances");
  FlatContext f;
  Index rows = 0;
  for (const auto& u : d.utterances) {
    if (u.ids.empty()) throw std::invalid_argument("dialogue '" + d.id + "' has an empty utterance");
    if (u.knowledge.cols() != knowledge_dim || u.knowledge.rows() != static_cast<Index>(u.ids.size()))
      throw ShapeError("dialogue '" + d.id + "': knowledge features " + shape_str(u.knowledge) +
                       " do not match width " + std::to_string(knowledge_dim));
    f.ids.insert(f.ids.end(), u.ids.begin(), u.ids.end());
    f.lengths.push_back(static_cast<int>(u.ids.size()));
    rows += static_cast<Index>(u.ids.size());
  }
  f.knowledge.resize(rows, knowledge_dim);
  Index at = 0;
  for (const auto& u : d.utterances) {
    f.knowledge.middleRows(at, u.knowledge.rows()) = u.knowledge;
    at += u.knowledge.rows();
  }
  return f;
}

void require_candidates(const EncodedDialogue& d) {
  if (d.candidates.empty()) throw std::invalid_argument("dialogue '" + d.id + "' has no candidates");
  for (const auto& c : d.candidates)
    if (c.ids.empty()) throw std::invalid_argument("dialogue '" + d.id + "' has an empty candidate");
}

/// Groups sequence indices by row count, in ascending length order.
std::map<Index, std::vector<std::size_t>> group_by_length(std::span<const Var> seqs) {
  std::map<Index, std::vector<std::size_t>> groups;
  for (std::size_t j = 0; j < seqs.size(); ++j) groups[seqs[j].rows()].push_back(j);
  return groups;
}

/// Runs `encode_group` per length group and restores the input order.
template <typename EncodeGroup>
Var batched_by_length(std::span<const Var> seqs, EncodeGroup&& encode_group) {
  if (seqs.empty()) throw ShapeError("no sequences to encode");
  auto groups = group_by_length(seqs);
  std::vector<Var> blocks;
  std::vector<int> position(seqs.size());
  int row = 0;
  for (const auto& [len, members] : groups) {
    if (len == 0) throw ShapeError("cannot encode an empty sequence");
    std::vector<Var> batch;
    for (auto j : members) {
      batch.push_back(seqs[j]);
      position[j] = row++;
    }
    blocks.push_back(encode_group(batch));
  }
  Var all = blocks.size() == 1 ? blocks.front() : concat_rows(std::span<const Var>(blocks));
  bool ordered = true;
  for (std::size_t j = 0; j < position.size(); ++j) ordered = ordered && position[j] == static_cast<int>(j);
  return ordered ? all : gather_rows(all, std::span<const int>(position.data(), position.size()));
}

}  // namespace

// RapNet -------------------------------------------------------------------------

RapNet::RapNet(ModelConfig cfg) : ResponseModel(std::move(cfg)) {
  const Index e = cfg_.embed_dim, h = cfg_.hidden;
  embedding = Parameter("embedding", cfg_.vocab_size, e);
  mcan = McanParams<double>("mcan", e);
  lstm1 = BiLstmParams<double>("lstm1", cfg_.augmented_dim(), h);
  lstm2 = BiLstmParams<double>("lstm2", 2 * h, h);
  scorer_inner = HighwayParams<double>("scorer.h2", 8 * h);
  scorer_outer = HighwayParams<double>("scorer.h1", 8 * h);
  projection = Parameter("scorer.projection", 1, 8 * h);
  bias = Parameter("scorer.bias", 1, 1);
}

void RapNet::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double r = cfg_.init_range;
  uniform_init(embedding, rng, -r, r);
  mcan.init(rng, r);
  lstm1.init(rng, r);
  lstm2.init(rng, r);
  scorer_inner.init(rng, r);
  scorer_outer.init(rng, r);
  uniform_init(projection, rng, -r, r);
  uniform_init(bias, rng, -r, r);
}

std::vector<Parameter*> RapNet::parameters() {
  std::vector<Parameter*> out{&embedding};
  for (auto* p : mcan.parameters()) out.push_back(p);
  for (auto* p : lstm1.parameters()) out.push_back(p);
  for (auto* p : lstm2.parameters()) out.push_back(p);
  for (auto* p : scorer_inner.parameters()) out.push_back(p);
  for (auto* p : scorer_outer.parameters()) out.push_back(p);
  out.push_back(&projection);
  out.push_back(&bias);
  return out;
}

Var RapNet::embed(Tape& tape, std::span<const int> ids) const { return gather_rows(tape.parameter(embedding), ids); }

Var RapNet::knowledge_input(Tape& tape, const MatrixXd& features) const {
  if (features.cols() != cfg_.knowledge_dim)
    throw ShapeError("knowledge features " + shape_str(features) + " do not match width " +
                     std::to_string(cfg_.knowledge_dim));
  if (!cfg_.flags.use_knowledge) return tape.zeros(features.rows(), features.cols());
  return tape.constant(features);
}

ContextEncoding RapNet::encode_context(Tape& tape, std::span<const Var> contexts, std::span<const int> lengths) const {
  if (contexts.empty() || lengths.empty()) throw ShapeError("encode_context: empty dialogue");
  Index total = 0;
  for (int n : lengths) {
    if (n <= 0) throw ShapeError("encode_context: empty utterance");
    total += n;
  }
  if (contexts.front().rows() != total)
    throw ShapeError("encode_context: utterance lengths sum to " + std::to_string(total) + " but context is " +
                     shape_str(contexts.front().value()));
  const Index batch = static_cast<Index>(contexts.size());
  auto stacked = batch == 1 ? contexts.front() : stack_time_major(contexts);

  // One pass over the concatenation carries state across utterance
  // boundaries in both directions.
  ContextEncoding enc;
  enc.first_layer = bilstm_run(tape, lstm1, stacked, batch);
  const auto& fwd = enc.first_layer.forward.h;
  const auto& bwd = enc.first_layer.backward.h;
  std::size_t start = 0;
  for (int n : lengths) {
    const std::size_t len = static_cast<std::size_t>(n);
    if (cfg_.flags.dynamic_pooling) {
      auto f = max_over(std::span<const Var>(fwd.data() + start, len));
      auto b = max_over(std::span<const Var>(bwd.data() + start, len));
      enc.pooled.push_back(concat_cols({f, b}));
    } else {
      enc.pooled.push_back(concat_cols({fwd[start + len - 1], bwd[start]}));
    }
    start += len;
  }
  // Per-utterance vectors are stacked time-major already: block i is utterance i.
  auto second_input = enc.pooled.size() == 1 ? enc.pooled.front() : concat_rows(std::span<const Var>(enc.pooled));
  auto second = bilstm_run(tape, lstm2, second_input, batch);
  enc.r_c = concat_cols({second.forward.c.back(), second.backward.c.front()});
  return enc;
}

ContextEncoding RapNet::encode_utterances(Tape& tape, std::span<const Var> utterances) const {
  if (utterances.empty()) throw ShapeError("encode_context: empty dialogue");
  std::vector<int> lengths;
  for (const auto& u : utterances) {
    if (u.rows() == 0) throw ShapeError("encode_context: empty utterance");
    lengths.push_back(static_cast<int>(u.rows()));
  }
  auto joined = utterances.size() == 1 ? utterances.front() : concat_rows(utterances);
  return encode_context(tape, std::span<const Var>(&joined, 1), lengths);
}

Var RapNet::encode_candidates(Tape& tape, std::span<const Var> candidates) const {
  return batched_by_length(candidates, [&](std::span<const Var> batch) {
    const Index b = static_cast<Index>(batch.size());
    auto stacked = b == 1 ? batch.front() : stack_time_major(batch);
    auto run = bilstm_run(tape, lstm1, stacked, b);
    const bool cells = cfg_.candidate_pool == CandidatePool::cells;
    const auto& f = cells ? run.forward.c : run.forward.h;
    const auto& r = cells ? run.backward.c : run.backward.h;
    return concat_cols({max_over(f), max_over(r)});
  });
}

Var RapNet::encode_candidate(Tape& tape, const Var& candidate) const {
  if (candidate.rows() == 0) throw ShapeError("encode_candidate: empty candidate");
  return encode_candidates(tape, std::span<const Var>(&candidate, 1));
}

Var RapNet::score(Tape& tape, const Var& r_c, const Var& r_x) const {
  const Index width = 2 * cfg_.hidden;
  if (r_c.cols() != width || r_x.cols() != width || r_c.rows() != r_x.rows())
    throw ShapeError("score: expected two [B," + std::to_string(width) + "] inputs, got " + shape_str(r_c.value()) +
                     " and " + shape_str(r_x.value()));
  auto v = concat_cols({r_c, r_x, mul(r_c, r_x), sub(r_c, r_x)});
  auto hidden = highway_forward(tape, scorer_outer, highway_forward(tape, scorer_inner, v));
  auto logit = add_row(matmul_nt(hidden, tape.parameter(projection)), tape.parameter(bias));
  return sigmoid(logit);
}

McanFeatures<double> RapNet::attention_features(Tape& tape, const EncodedDialogue& d, std::size_t candidate) const {
  auto ctx = flatten(d, cfg_.knowledge_dim);
  const auto& cand = d.candidates.at(candidate);
  auto ctx_words = embed(tape, ctx.ids);
  auto cand_words = embed(tape, cand.ids);
  return mcan_extract(tape, mcan, ctx_words, cand_words, cfg_.flags);
}

Var RapNet::forward(Tape& tape, const EncodedDialogue& d) const {
  require_candidates(d);
  const auto& flags = cfg_.flags;
  auto ctx = flatten(d, cfg_.knowledge_dim);
  const Index t = static_cast<Index>(ctx.ids.size());
  auto ctx_words = embed(tape, ctx.ids);
  auto ctx_kb = knowledge_input(tape, ctx.knowledge);

  std::optional<McanSide<double>> ctx_side;
  if (flags.use_mcan) ctx_side = mcan_prepare(tape, mcan, mcan.intra_context, ctx_words, flags);

  std::vector<Var> contexts, candidates;
  contexts.reserve(d.candidates.size());
  candidates.reserve(d.candidates.size());
  Var ctx_plain;
  for (const auto& c : d.candidates) {
    if (c.knowledge.cols() != cfg_.knowledge_dim || c.knowledge.rows() != static_cast<Index>(c.ids.size()))
      throw ShapeError("dialogue '" + d.id + "': candidate knowledge features " + shape_str(c.knowledge) +
                       " do not match width " + std::to_string(cfg_.knowledge_dim));
    auto words = embed(tape, c.ids);
    auto kb = knowledge_input(tape, c.knowledge);
    if (flags.use_mcan) {
      auto side = mcan_prepare(tape, mcan, mcan.intra_response, words, flags);
      auto feats = mcan_cross(tape, mcan, *ctx_side, side, flags);
      contexts.push_back(augment(ctx_words, feats.context, ctx_kb));
      candidates.push_back(augment(words, feats.response, kb));
    } else {
      if (!ctx_plain.valid()) ctx_plain = augment(ctx_words, tape.zeros(t, kMcanFeatures), ctx_kb);
      contexts.push_back(ctx_plain);
      candidates.push_back(augment(words, tape.zeros(words.rows(), kMcanFeatures), kb));
    }
  }
  auto enc = encode_context(tape, contexts, ctx.lengths);
  auto r_x = encode_candidates(tape, candidates);
  return score(tape, enc.r_c, r_x);
}

// Baselines -------------------------------------------------------------------------

Var final_hidden_states(Tape& tape, const LstmParams<double>& lstm, std::span<const Var> sequences) {
  return batched_by_length(sequences, [&](std::span<const Var> batch) {
    const Index b = static_cast<Index>(batch.size());
    auto stacked = b == 1 ? batch.front() : stack_time_major(batch);
    return lstm_run(tape, lstm, stacked, b, false).h.back();
  });
}

namespace {

Var bilinear_probabilities(Tape& tape, const Var& context, const Var& responses, const Parameter& m,
                           const Parameter& b) {
  auto cm = matmul(context, tape.parameter(m));
  auto logits = row_sum(mul(repeat_rows(cm, responses.rows()), responses));
  return sigmoid(add_row(logits, tape.parameter(b)));
}

}  // namespace

DualEncoder::DualEncoder(ModelConfig cfg) : ResponseModel(std::move(cfg)) {
  embedding = Parameter("embedding", cfg_.vocab_size, cfg_.embed_dim);
  lstm = LstmParams<double>("lstm", cfg_.embed_dim, cfg_.hidden);
  bilinear = Parameter("bilinear", cfg_.hidden, cfg_.hidden);
  bias = Parameter("bias", 1, 1);
}

void DualEncoder::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double r = cfg_.init_range;
  uniform_init(embedding, rng, -r, r);
  lstm.init(rng, r);
  uniform_init(bilinear, rng, -r, r);
  uniform_init(bias, rng, -r, r);
}

std::vector<Parameter*> DualEncoder::parameters() {
  std::vector<Parameter*> out{&embedding};
  for (auto* p : lstm.parameters()) out.push_back(p);
  out.push_back(&bilinear);
  out.push_back(&bias);
  return out;
}

Var DualEncoder::forward(Tape& tape, const EncodedDialogue& d) const {
  require_candidates(d);
  auto ctx = flatten(d, cfg_.knowledge_dim);
  auto table = tape.parameter(embedding);
  auto ctx_words = gather_rows(table, ctx.ids);
  auto c = final_hidden_states(tape, lstm, std::span<const Var>(&ctx_words, 1));
  std::vector<Var> cands;
  for (const auto& x : d.candidates) cands.push_back(gather_rows(table, x.ids));
  auto r = final_hidden_states(tape, lstm, cands);
  return bilinear_probabilities(tape, c, r, bilinear, bias);
}

Hred::Hred(ModelConfig cfg) : ResponseModel(std::move(cfg)) {
  embedding = Parameter("embedding", cfg_.vocab_size, cfg_.embed_dim);
  utterance_lstm = LstmParams<double>("lstm1", cfg_.embed_dim, cfg_.hidden);
  conversation_lstm = LstmParams<double>("lstm2", cfg_.hidden, cfg_.hidden);
  bilinear = Parameter("bilinear", cfg_.hidden, cfg_.hidden);
  bias = Parameter("bias", 1, 1);
}

void Hred::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double r = cfg_.init_range;
  uniform_init(embedding, rng, -r, r);
  utterance_lstm.init(rng, r);
  conversation_lstm.init(rng, r);
  uniform_init(bilinear, rng, -r, r);
  uniform_init(bias, rng, -r, r);
}

std::vector<Parameter*> Hred::parameters() {
  std::vector<Parameter*> out{&embedding};
  for (auto* p : utterance_lstm.parameters()) out.push_back(p);
  for (auto* p : conversation_lstm.parameters()) out.push_back(p);
  out.push_back(&bilinear);
  out.push_back(&bias);
  return out;
}

Var Hred::forward(Tape& tape, const EncodedDialogue& d) const {
  require_candidates(d);
  if (d.utterances.empty()) throw std::invalid_argument("dialogue '" + d.id + "' has no utterances");
  auto table = tape.parameter(embedding);
  std::vector<Var> utts;
  for (const auto& u : d.utterances) {
    if (u.ids.empty()) throw std::invalid_argument("dialogue '" + d.id + "' has an empty utterance");
    utts.push_back(gather_rows(table, u.ids));
  }
  auto per_utterance = final_hidden_states(tape, utterance_lstm, utts);  // [l,h], time order
  auto c = final_hidden_states(tape, conversation_lstm, std::span<const Var>(&per_utterance, 1));
  std::vector<Var> cands;
  for (const auto& x : d.candidates) cands.push_back(gather_rows(table, x.ids));
  auto r = final_hidden_states(tape, utterance_lstm, cands);
  return bilinear_probabilities(tape, c, r, bilinear, bias);
}

}  // namespace rapnet
