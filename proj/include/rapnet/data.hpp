#pragma once

#include "rapnet/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rapnet {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Utterance {
  int speaker = 1;
  /// Starts with the speaker token once loaded.
  std::vector<std::string> tokens;

  bool operator==(const Utterance&) const = default;
};

struct Knowledge {
  std::set<std::string> suggested;
  std::set<std::string> prior;

  bool operator==(const Knowledge&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;
  std::vector<std::vector<std::string>> candidates;
  std::vector<int> labels;
  std::optional<Knowledge> knowledge;

  int positives() const;
  bool operator==(const Dialogue&) const = default;
};

using Corpus = std::vector<Dialogue>;

/// Whitespace split with lowercasing; course-like tokens (letters followed by
/// digits, e.g. EECS281) are kept verbatim.
std::vector<std::string> tokenize(std::string_view text);
bool is_course_token(std::string_view token);
std::string speaker_token(int speaker);
bool is_speaker_token(std::string_view token);

/// Enforces |candidates| = |labels| and the subtask's positive-count rule.
void validate_dialogue(const Dialogue& d, int subtask);
void validate_subtask(int subtask);

/// JSON Lines, one dialogue per line. Errors carry the line number or the
/// dialogue id.
Corpus parse_corpus(std::istream& in, int subtask);
Corpus load_corpus(const std::filesystem::path& path, int subtask);
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

bool corpus_has_knowledge(const Corpus& corpus);

inline constexpr int kKnowledgeDim = 2;

/// [in suggested, in prior].
std::array<double, kKnowledgeDim> knowledge_features(std::string_view token, const Knowledge& kb);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSpeaker1 = 2;
  static constexpr int kSpeaker2 = 3;
  static constexpr int kReserved = 4;

  Vocab();
  explicit Vocab(std::vector<std::string> tokens);

  /// Out-of-vocabulary tokens map to <unk>.
  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  int add(const std::string& token);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Reserved tokens, then <speakerN> for N >= 3 as they occur, then tokens with
/// count >= min_count ordered by count descending and lexicographically.
Vocab build_vocab(const Corpus& corpus, int min_count);

void save_vocab(const std::filesystem::path& path, const Vocab& vocab);
Vocab load_vocab(const std::filesystem::path& path);

struct EncodedSequence {
  std::vector<int> ids;
  /// [n, knowledge_dim]; width 0 when the corpus has no knowledge base.
  MatrixXd knowledge;

  std::size_t size() const { return ids.size(); }
};

struct EncodedDialogue {
  std::string id;
  std::vector<EncodedSequence> utterances;
  std::vector<EncodedSequence> candidates;
  std::vector<int> labels;

  int positives() const;
};

struct EncodeLimits {
  int max_utterances = 10;  // most recent utterances kept
  int max_tokens = 50;      // leading tokens kept per utterance or candidate
};

EncodedDialogue encode_dialogue(const Dialogue& d, const Vocab& vocab, int knowledge_dim,
                                const EncodeLimits& limits = {});
std::vector<EncodedDialogue> encode_corpus(const Corpus& corpus, const Vocab& vocab, int knowledge_dim,
                                           const EncodeLimits& limits = {});

// Synthetic corpus -----------------------------------------------------------

struct SyntheticConfig {
  int n_dialogues = 2400;
  int vocab_size = 200;
  int k_candidates = 10;
  int subtask = 1;
  bool with_knowledge = false;
  std::uint64_t seed = 1;
  double no_answer_fraction = 0.2;
  double paraphrase_drop = 0.2;
  /// Share of negatives drawn from the dialogue's own topic while avoiding
  /// every context token (knowledge mode always uses half, with courses).
  double hard_negative_fraction = 0.0;
  int n_topics = 0;  // 0 = k_candidates + 1
  int min_utterances = 2;
  int max_utterances = 4;
  int min_tokens = 3;
  int max_tokens = 6;
};

/// Topic-coherent dialogues: each dialogue's topic owns a disjoint token set,
/// the positive shares at least two topic tokens with the context and
/// negatives come from distinct other topics. With knowledge, positives
/// mention a suggested course and part of the negatives are same-topic
/// distractors that mention other courses.
Corpus gen_synthetic(const SyntheticConfig& cfg);

}  // namespace rapnet
