#include "oracles.hpp"
#include "rapnet/checkpoint.hpp"
#include "rapnet/commands.hpp"
#include "rapnet/model.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace rapnet;
using oracle::LstmOut;

namespace {

ModelConfig small_config(ModelKind kind, int knowledge_dim = 0) {
  ModelConfig c;
  c.kind = kind;
  c.vocab_size = 20;
  c.embed_dim = 5;
  c.hidden = 4;
  c.knowledge_dim = knowledge_dim;
  c.init_range = 0.4;
  return c;
}

EncodedSequence sequence(std::mt19937_64& rng, int len, int vocab, int knowledge_dim) {
  EncodedSequence s;
  for (int i = 0; i < len; ++i) s.ids.push_back(static_cast<int>(rng() % static_cast<unsigned>(vocab)));
  s.knowledge = MatrixXd::Zero(len, knowledge_dim);
  for (Index r = 0; r < s.knowledge.rows(); ++r)
    for (Index c = 0; c < knowledge_dim; ++c) s.knowledge(r, c) = static_cast<double>(rng() % 2);
  return s;
}

/// Candidates of mixed lengths so batching has to regroup and reorder.
EncodedDialogue random_dialogue(std::mt19937_64& rng, int vocab, int knowledge_dim) {
  EncodedDialogue d;
  d.id = "t";
  for (int len : {3, 1, 4}) d.utterances.push_back(sequence(rng, len, vocab, knowledge_dim));
  for (int len : {2, 5, 2, 1, 5}) d.candidates.push_back(sequence(rng, len, vocab, knowledge_dim));
  d.labels = {0, 1, 0, 0, 0};
  return d;
}

struct UnrolledRun {
  std::vector<MatrixXd> h, c;  // by position
};

UnrolledRun unroll(const LstmParams<double>& p, const MatrixXd& x, bool reverse) {
  const Index n = x.rows(), hd = p.hidden_dim();
  UnrolledRun r{std::vector<MatrixXd>(static_cast<std::size_t>(n)), std::vector<MatrixXd>(static_cast<std::size_t>(n))};
  MatrixXd h = MatrixXd::Zero(1, hd), c = MatrixXd::Zero(1, hd);
  for (Index s = 0; s < n; ++s) {
    const Index t = reverse ? n - 1 - s : s;
    LstmOut o = oracle::lstm_step(p.w_input.value, p.w_hidden.value, p.bias.value, x.row(t), h, c);
    h = o.h;
    c = o.c;
    r.h[static_cast<std::size_t>(t)] = h;
    r.c[static_cast<std::size_t>(t)] = c;
  }
  return r;
}

MatrixXd elementwise_max(const std::vector<MatrixXd>& v, std::size_t from, std::size_t count) {
  MatrixXd m = v[from];
  for (std::size_t i = from + 1; i < from + count; ++i) m = m.cwiseMax(v[i]);
  return m;
}

MatrixXd hcat(std::initializer_list<MatrixXd> parts) {
  Index cols = 0;
  for (const auto& p : parts) cols += p.cols();
  MatrixXd out(parts.begin()->rows(), cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return out;
}

MatrixXd embed_rows(const MatrixXd& table, const std::vector<int>& ids) {
  MatrixXd out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Index>(i)) = table.row(ids[i]);
  return out;
}

/// RAP-Net scored one candidate at a time from step-by-step recurrences.
std::vector<double> rapnet_oracle(const RapNet& m, const EncodedDialogue& d) {
  const auto& cfg = m.config();
  std::vector<int> ids;
  std::vector<MatrixXd> kbs;
  MatrixXd ctx_kb(0, cfg.knowledge_dim);
  for (const auto& u : d.utterances) {
    ids.insert(ids.end(), u.ids.begin(), u.ids.end());
    MatrixXd grown(ctx_kb.rows() + u.knowledge.rows(), cfg.knowledge_dim);
    grown << ctx_kb, u.knowledge;
    ctx_kb = grown;
  }
  if (!cfg.flags.use_knowledge) ctx_kb.setZero();
  const MatrixXd ctx_words = embed_rows(m.embedding.value, ids);
  std::vector<double> out;
  for (std::size_t j = 0; j < d.candidates.size(); ++j) {
    const auto& cand = d.candidates[j];
    const MatrixXd cand_words = embed_rows(m.embedding.value, cand.ids);
    MatrixXd cand_kb = cand.knowledge;
    if (!cfg.flags.use_knowledge) cand_kb.setZero();
    MatrixXd fd = MatrixXd::Zero(ctx_words.rows(), kMcanFeatures), fq = MatrixXd::Zero(cand_words.rows(), kMcanFeatures);
    if (cfg.flags.use_mcan) {
      Tape t;
      auto f = mcan_extract(t, m.mcan, t.constant(ctx_words), t.constant(cand_words), cfg.flags);
      fd = f.context.value();
      fq = f.response.value();
    }
    const MatrixXd x = hcat({ctx_words, ctx_kb, fd});
    auto fw = unroll(m.lstm1.forward, x, false), bw = unroll(m.lstm1.backward, x, true);
    MatrixXd pooled(static_cast<Index>(d.utterances.size()), 2 * cfg.hidden);
    std::size_t start = 0;
    for (std::size_t u = 0; u < d.utterances.size(); ++u) {
      const std::size_t len = d.utterances[u].size();
      if (cfg.flags.dynamic_pooling)
        pooled.row(static_cast<Index>(u)) = hcat({elementwise_max(fw.h, start, len), elementwise_max(bw.h, start, len)});
      else
        pooled.row(static_cast<Index>(u)) = hcat({fw.h[start + len - 1], bw.h[start]});
      start += len;
    }
    auto fw2 = unroll(m.lstm2.forward, pooled, false), bw2 = unroll(m.lstm2.backward, pooled, true);
    const MatrixXd rc = hcat({fw2.c.back(), bw2.c.front()});

    const MatrixXd y = hcat({cand_words, cand_kb, fq});
    auto cf = unroll(m.lstm1.forward, y, false), cb = unroll(m.lstm1.backward, y, true);
    const bool cells = cfg.candidate_pool == CandidatePool::cells;
    const MatrixXd rx = hcat({elementwise_max(cells ? cf.c : cf.h, 0, cand.size()),
                              elementwise_max(cells ? cb.c : cb.h, 0, cand.size())});

    MatrixXd v = hcat({rc, rx, rc.cwiseProduct(rx), rc - rx});
    v = oracle::highway(m.scorer_inner.gate.value, m.scorer_inner.transform.value, v);
    v = oracle::highway(m.scorer_outer.gate.value, m.scorer_outer.transform.value, v);
    out.push_back(oracle::sigmoid((v * m.projection.value.transpose())(0, 0) + m.bias.value(0, 0)));
  }
  return out;
}

MatrixXd final_h(const LstmParams<double>& p, const MatrixXd& x) { return unroll(p, x, false).h.back(); }

double bilinear_prob(const MatrixXd& c, const MatrixXd& m, const MatrixXd& r, double b) {
  return oracle::sigmoid((c * m * r.transpose())(0, 0) + b);
}

std::vector<double> dual_encoder_oracle(const DualEncoder& m, const EncodedDialogue& d) {
  std::vector<int> ids;
  for (const auto& u : d.utterances) ids.insert(ids.end(), u.ids.begin(), u.ids.end());
  MatrixXd c = final_h(m.lstm, embed_rows(m.embedding.value, ids));
  std::vector<double> out;
  for (const auto& x : d.candidates)
    out.push_back(bilinear_prob(c, m.bilinear.value, final_h(m.lstm, embed_rows(m.embedding.value, x.ids)),
                                m.bias.value(0, 0)));
  return out;
}

std::vector<double> hred_oracle(const Hred& m, const EncodedDialogue& d) {
  MatrixXd states(static_cast<Index>(d.utterances.size()), m.config().hidden);
  for (std::size_t u = 0; u < d.utterances.size(); ++u)
    states.row(static_cast<Index>(u)) = final_h(m.utterance_lstm, embed_rows(m.embedding.value, d.utterances[u].ids));
  MatrixXd c = final_h(m.conversation_lstm, states);
  std::vector<double> out;
  for (const auto& x : d.candidates)
    out.push_back(bilinear_prob(c, m.bilinear.value,
                                final_h(m.utterance_lstm, embed_rows(m.embedding.value, x.ids)), m.bias.value(0, 0)));
  return out;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "candidate " << i;
}

std::vector<AblationFlags> flag_variants() {
  std::vector<AblationFlags> out(1);
  auto add = [&](bool AblationFlags::*f) {
    AblationFlags a;
    a.*f = false;
    out.push_back(a);
  };
  add(&AblationFlags::inter_attention);
  add(&AblationFlags::intra_attention);
  add(&AblationFlags::highway_encoder);
  add(&AblationFlags::dynamic_pooling);
  add(&AblationFlags::use_mcan);
  add(&AblationFlags::use_knowledge);
  return out;
}

}  // namespace

TEST(RapNet, ProbabilitiesHaveCandidateShape) {
  std::mt19937_64 rng(3);
  auto cfg = small_config(ModelKind::rapnet, 2);
  auto model = make_model(cfg, 7);
  auto d = random_dialogue(rng, cfg.vocab_size, 2);
  Tape t;
  auto p = model->forward(t, d);
  EXPECT_EQ(p.rows(), 5);
  EXPECT_EQ(p.cols(), 1);
  EXPECT_GT(p.value().minCoeff(), 0.0);
  EXPECT_LT(p.value().maxCoeff(), 1.0);
  EXPECT_EQ(cfg.augmented_dim(), 5 + 2 + 12);
}

TEST(RapNet, BatchedForwardMatchesUnrolledOracle) {
  for (const auto& flags : flag_variants()) {
    for (auto pool : {CandidatePool::cells, CandidatePool::hiddens}) {
      std::mt19937_64 rng(5);
      auto cfg = small_config(ModelKind::rapnet, 2);
      cfg.flags = flags;
      cfg.candidate_pool = pool;
      auto model = make_model(cfg, 11);
      auto d = random_dialogue(rng, cfg.vocab_size, 2);
      expect_close(model->score(d), rapnet_oracle(dynamic_cast<const RapNet&>(*model), d), 1e-12);
    }
  }
}

TEST(RapNet, ScoresDoNotDependOnOtherCandidates) {
  std::mt19937_64 rng(6);
  auto cfg = small_config(ModelKind::rapnet);
  auto model = make_model(cfg, 2);
  auto d = random_dialogue(rng, cfg.vocab_size, 0);
  auto all = model->score(d);
  for (std::size_t j = 0; j < d.candidates.size(); ++j) {
    auto single = d;
    single.candidates = {d.candidates[j]};
    single.labels = {d.labels[j]};
    EXPECT_NEAR(model->score(single)[0], all[j], 1e-12);
  }
}

TEST(RapNet, KnowledgeFeaturesChangeScoresOnlyWhenEnabled) {
  std::mt19937_64 rng(8);
  auto cfg = small_config(ModelKind::rapnet, 2);
  auto d = random_dialogue(rng, cfg.vocab_size, 2);
  auto blank = d;
  for (auto& u : blank.utterances) u.knowledge.setZero();
  for (auto& c : blank.candidates) c.knowledge.setZero();
  auto on = make_model(cfg, 4);
  EXPECT_GT(std::abs(on->score(d)[1] - on->score(blank)[1]), 1e-9);
  cfg.flags.use_knowledge = false;
  auto off = make_model(cfg, 4);
  expect_close(off->score(d), off->score(blank), 0.0);
}

TEST(RapNet, RejectsMalformedDialogues) {
  std::mt19937_64 rng(9);
  auto cfg = small_config(ModelKind::rapnet, 2);
  auto model = make_model(cfg, 1);
  auto d = random_dialogue(rng, cfg.vocab_size, 2);
  auto no_cands = d;
  no_cands.candidates.clear();
  EXPECT_ANY_THROW(model->score(no_cands));
  auto empty_utt = d;
  empty_utt.utterances[1].ids.clear();
  empty_utt.utterances[1].knowledge.resize(0, 2);
  EXPECT_ANY_THROW(model->score(empty_utt));
  auto wrong_kb = random_dialogue(rng, cfg.vocab_size, 0);
  EXPECT_THROW(model->score(wrong_kb), ShapeError);
}

TEST(Baselines, MatchUnrolledOracles) {
  std::mt19937_64 rng(12);
  auto de_cfg = small_config(ModelKind::dual_encoder);
  auto de = make_model(de_cfg, 3);
  auto d = random_dialogue(rng, de_cfg.vocab_size, 0);
  expect_close(de->score(d), dual_encoder_oracle(dynamic_cast<const DualEncoder&>(*de), d), 1e-12);
  auto hred = make_model(small_config(ModelKind::hred), 3);
  expect_close(hred->score(d), hred_oracle(dynamic_cast<const Hred&>(*hred), d), 1e-12);
}

TEST(Model, SeedDeterminesInitialisation) {
  auto cfg = small_config(ModelKind::rapnet);
  auto a = make_model(cfg, 5), b = make_model(cfg, 5), c = make_model(cfg, 6);
  auto pa = a->parameters(), pb = b->parameters(), pc = c->parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
    differs = differs || pa[i]->value != pc[i]->value;
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(make_model(small_config(ModelKind::rapnet, 1), 1), std::invalid_argument);
}

TEST(Model, GradientsMatchFiniteDifferences) {
  struct Case {
    ModelKind kind;
    AblationFlags flags;
    int kd;
  };
  std::vector<Case> cases{{ModelKind::dual_encoder, {}, 0}, {ModelKind::hred, {}, 0}};
  for (const auto& f : flag_variants()) cases.push_back({ModelKind::rapnet, f, 2});
  cases.push_back({ModelKind::rapnet, {}, 0});
  for (const auto& c : cases) {
    for (std::uint64_t seed : {1u, 2u}) {
      auto cfg = grad_check_model_config(c.kind, c.flags, c.kd);
      auto model = make_model(cfg, seed);
      auto d = grad_check_dialogue(cfg, seed);
      auto rep = grad_check_model(*model, d, 1e-5);
      EXPECT_TRUE(rep.passed(1e-4)) << to_string(c.kind) << " seed " << seed << "\n"
                                    << cfg.to_text() << rep.worst_parameter << "[" << rep.worst_index
                                    << "] rel " << rep.max_relative_error;
      EXPECT_EQ(rep.checked, model->parameter_count());
    }
  }
}

TEST(Config, TextRoundTrip) {
  auto cfg = small_config(ModelKind::hred, 2);
  cfg.flags.dynamic_pooling = false;
  cfg.candidate_pool = CandidatePool::hiddens;
  cfg.init_range = 0.123456789012345678;
  cfg.limits = {7, 33};
  EXPECT_EQ(ModelConfig::parse(cfg.to_text()), cfg);
  EXPECT_THROW(ModelConfig::parse("model_kind=rapnet\n"), std::invalid_argument);
  EXPECT_THROW(ModelConfig::parse("garbage"), std::invalid_argument);
  auto bad = cfg.to_text();
  bad.replace(bad.find("hidden=4"), 8, "hidden=x");
  EXPECT_THROW(ModelConfig::parse(bad), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(13);
  for (auto kind : {ModelKind::rapnet, ModelKind::dual_encoder, ModelKind::hred}) {
    auto cfg = small_config(kind, kind == ModelKind::rapnet ? 2 : 0);
    cfg.flags.intra_attention = false;
    auto model = make_model(cfg, 21);
    std::stringstream buf;
    write_checkpoint(buf, *model);
    auto loaded = read_checkpoint(buf);
    EXPECT_EQ(loaded->config(), cfg);
    auto pa = model->parameters(), pb = loaded->parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_EQ(pa[i]->name, pb[i]->name);
      EXPECT_EQ(pa[i]->value, pb[i]->value);
    }
    auto d = random_dialogue(rng, cfg.vocab_size, cfg.knowledge_dim);
    auto sa = model->score(d), sb = loaded->score(d);
    for (std::size_t j = 0; j < sa.size(); ++j) EXPECT_EQ(std::bit_cast<std::uint64_t>(sa[j]), std::bit_cast<std::uint64_t>(sb[j]));

    std::stringstream again;
    write_checkpoint(again, *loaded);
    std::stringstream first;
    write_checkpoint(first, *model);
    EXPECT_EQ(again.str(), first.str());
  }
}

TEST(Checkpoint, RejectsCorruptInput) {
  auto model = make_model(small_config(ModelKind::dual_encoder), 1);
  std::stringstream buf;
  write_checkpoint(buf, *model);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 7), "RAPNET1");

  std::stringstream bad_magic("RAPNET2" + bytes.substr(7));
  EXPECT_THROW(read_checkpoint(bad_magic), CheckpointError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_checkpoint(truncated), CheckpointError);
  std::stringstream empty("");
  EXPECT_THROW(read_checkpoint(empty), CheckpointError);

  // Renaming a parameter inside the payload must be reported by name.
  std::string renamed = bytes;
  renamed.replace(renamed.find("bilinear"), 8, "bilinEAR");
  std::stringstream r(renamed);
  try {
    read_checkpoint(r);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("bilinEAR"), std::string::npos);
  }
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), CheckpointError);
}
