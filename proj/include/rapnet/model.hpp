#pragma once

#include "rapnet/data.hpp"
#include "rapnet/flags.hpp"
#include "rapnet/layers.hpp"
#include "rapnet/mcan.hpp"
#include "rapnet/tensor.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rapnet {

enum class ModelKind { rapnet, dual_encoder, hred };
enum class CandidatePool { cells, hiddens };

std::string to_string(ModelKind kind);
std::string to_string(CandidatePool pool);
ModelKind parse_model_kind(std::string_view text);
CandidatePool parse_candidate_pool(std::string_view text);

struct ModelConfig {
  ModelKind kind = ModelKind::rapnet;
  int vocab_size = 0;
  int embed_dim = 64;
  int hidden = 32;
  /// Width of F(w): 2 with a knowledge base, 0 otherwise.
  int knowledge_dim = 0;
  CandidatePool candidate_pool = CandidatePool::cells;
  AblationFlags flags;
  double init_range = 0.1;
  EncodeLimits limits;

  /// e + |F| + 12
  int augmented_dim() const { return embed_dim + knowledge_dim + kMcanFeatures; }

  /// UTF-8 key=value lines; round-trips through parse.
  std::string to_text() const;
  static ModelConfig parse(std::string_view text);

  bool operator==(const ModelConfig& o) const {
    return kind == o.kind && vocab_size == o.vocab_size && embed_dim == o.embed_dim && hidden == o.hidden &&
           knowledge_dim == o.knowledge_dim && candidate_pool == o.candidate_pool && flags == o.flags &&
           init_range == o.init_range && limits.max_utterances == o.limits.max_utterances &&
           limits.max_tokens == o.limits.max_tokens;
  }
};

/// Common scoring interface: one independent probability per candidate.
class ResponseModel {
 public:
  explicit ResponseModel(ModelConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~ResponseModel() = default;

  const ModelConfig& config() const { return cfg_; }

  /// [k,1] candidate probabilities on `tape`.
  virtual Var forward(Tape& tape, const EncodedDialogue& d) const = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::unique_ptr<ResponseModel> clone() const = 0;

  std::vector<const Parameter*> parameters() const;
  Var loss(Tape& tape, const EncodedDialogue& d) const;
  std::vector<double> score(const EncodedDialogue& d) const;
  std::size_t parameter_count() const;

 protected:
  ModelConfig cfg_;
};

std::unique_ptr<ResponseModel> make_model(const ModelConfig& cfg, std::uint64_t seed);

/// [words; F; f_mcan] per row.
Var augment(const Var& words, const Var& f_mcan, const Var& knowledge);

/// Negated log-likelihood, minimised during training.
Var bce_loss(const Var& probs, std::span<const int> labels);

struct ContextEncoding {
  Var r_c;                   // [B, 2h]
  std::vector<Var> pooled;   // one [B, 2h] vector per utterance
  BiLstmState<double> first_layer;
};

class RapNet final : public ResponseModel {
 public:
  explicit RapNet(ModelConfig cfg);

  Var forward(Tape& tape, const EncodedDialogue& d) const override;
  std::vector<Parameter*> parameters() override;
  std::unique_ptr<ResponseModel> clone() const override { return std::make_unique<RapNet>(*this); }

  void init(std::uint64_t seed);

  Var embed(Tape& tape, std::span<const int> ids) const;
  Var knowledge_input(Tape& tape, const MatrixXd& features) const;

  /// Batched over B context variants that share utterance boundaries: each
  /// entry of `contexts` is the augmented concatenation [T, in] of all
  /// utterances, `lengths` the utterance lengths summing to T.
  ContextEncoding encode_context(Tape& tape, std::span<const Var> contexts, std::span<const int> lengths) const;
  /// Single dialogue from its augmented utterances.
  ContextEncoding encode_utterances(Tape& tape, std::span<const Var> utterances) const;

  /// [1, 2h] max-pooled first-layer states of one augmented candidate.
  Var encode_candidate(Tape& tape, const Var& candidate) const;
  /// [k, 2h] in input order; equal-length candidates share one batched run.
  Var encode_candidates(Tape& tape, std::span<const Var> candidates) const;

  /// sigmoid(proj . H_1(H_2([r_c; r_x; r_c*r_x; r_c-r_x])) + b), [B,1].
  Var score(Tape& tape, const Var& r_c, const Var& r_x) const;

  /// MCAN features for the context and one candidate, as used by forward.
  McanFeatures<double> attention_features(Tape& tape, const EncodedDialogue& d, std::size_t candidate) const;

  int scorer_dim() const { return 8 * cfg_.hidden; }

  Parameter embedding;
  McanParams<double> mcan;
  BiLstmParams<double> lstm1;
  BiLstmParams<double> lstm2;
  HighwayParams<double> scorer_inner;  // H_2, applied first
  HighwayParams<double> scorer_outer;  // H_1
  Parameter projection;
  Parameter bias;
};

/// LSTM over the flattened context and the candidate with shared weights,
/// p = sigmoid(c^T M r + b).
class DualEncoder final : public ResponseModel {
 public:
  explicit DualEncoder(ModelConfig cfg);

  Var forward(Tape& tape, const EncodedDialogue& d) const override;
  std::vector<Parameter*> parameters() override;
  std::unique_ptr<ResponseModel> clone() const override { return std::make_unique<DualEncoder>(*this); }
  void init(std::uint64_t seed);

  Parameter embedding;
  LstmParams<double> lstm;
  Parameter bilinear;
  Parameter bias;
};

/// Utterance-level LSTM per utterance, conversation-level LSTM over their
/// final states, candidate by the utterance LSTM, bilinear score.
class Hred final : public ResponseModel {
 public:
  explicit Hred(ModelConfig cfg);

  Var forward(Tape& tape, const EncodedDialogue& d) const override;
  std::vector<Parameter*> parameters() override;
  std::unique_ptr<ResponseModel> clone() const override { return std::make_unique<Hred>(*this); }
  void init(std::uint64_t seed);

  Parameter embedding;
  LstmParams<double> utterance_lstm;
  LstmParams<double> conversation_lstm;
  Parameter bilinear;
  Parameter bias;
};

/// Final hidden state of a forward LSTM for each sequence, [n, h] in input
/// order; sequences of equal length are batched.
Var final_hidden_states(Tape& tape, const LstmParams<double>& lstm, std::span<const Var> sequences);

}  // namespace rapnet
