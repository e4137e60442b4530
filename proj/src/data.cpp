#include "rapnet/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace rapnet {

using nlohmann::json;

int Dialogue::positives() const { return static_cast<int>(std::count(labels.begin(), labels.end(), 1)); }
int EncodedDialogue::positives() const { return static_cast<int>(std::count(labels.begin(), labels.end(), 1)); }

bool is_course_token(std::string_view token) {
  std::size_t i = 0;
  while (i < token.size() && std::isalpha(static_cast<unsigned char>(token[i]))) ++i;
  if (i == 0 || i == token.size()) return false;
  std::size_t digits = i;
  while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) ++i;
  return i == token.size() && i > digits;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) break;
    std::string tok(text.substr(start, i - start));
    if (!is_course_token(tok))
      std::transform(tok.begin(), tok.end(), tok.begin(), [](unsigned char c) { return std::tolower(c); });
    out.push_back(std::move(tok));
  }
  return out;
}

std::string speaker_token(int speaker) { return "<speaker" + std::to_string(speaker) + ">"; }

bool is_speaker_token(std::string_view token) {
  return token.size() == 10 && token.substr(0, 8) == "<speaker" && token[9] == '>' && token[8] >= '1' &&
         token[8] <= '9';
}

void validate_subtask(int subtask) {
  if (subtask != 1 && subtask != 3 && subtask != 4)
    throw DataError("unsupported subtask " + std::to_string(subtask) + " (expected 1, 3 or 4)");
}

void validate_dialogue(const Dialogue& d, int subtask) {
  validate_subtask(subtask);
  const std::string where = "dialogue '" + d.id + "': ";
  if (d.utterances.empty()) throw DataError(where + "no utterances");
  for (const auto& u : d.utterances) {
    if (u.speaker < 1 || u.speaker > 9) throw DataError(where + "speaker id " + std::to_string(u.speaker) + " not in 1..9");
    if (u.tokens.empty() || u.tokens.front() != speaker_token(u.speaker))
      throw DataError(where + "utterance does not start with its speaker token");
  }
  if (d.candidates.empty()) throw DataError(where + "empty candidate list");
  for (const auto& c : d.candidates)
    if (c.empty()) throw DataError(where + "empty candidate");
  if (d.candidates.size() != d.labels.size())
    throw DataError(where + std::to_string(d.candidates.size()) + " candidates but " + std::to_string(d.labels.size()) +
                    " labels");
  for (int y : d.labels)
    if (y != 0 && y != 1) throw DataError(where + "labels must be 0 or 1");
  const int pos = d.positives();
  bool ok = subtask == 1 ? pos == 1 : subtask == 3 ? (pos >= 1 && pos <= 5) : (pos == 0 || pos == 1);
  if (!ok)
    throw DataError(where + std::to_string(pos) + " positive candidates violate the subtask " +
                    std::to_string(subtask) + " rule");
}

namespace {

std::vector<std::string> string_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + " must be an array");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw DataError(what + " entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& what) {
  for (const auto& [key, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw DataError("unknown field '" + key + "' in " + what);
}

Dialogue dialogue_from_json(const json& j) {
  if (!j.is_object()) throw DataError("expected a JSON object");
  reject_unknown(j, {"id", "utterances", "candidates", "labels", "knowledge"}, "dialogue");
  for (const char* key : {"id", "utterances", "candidates", "labels"})
    if (!j.contains(key)) throw DataError(std::string("missing field '") + key + "'");

  Dialogue d;
  if (!j["id"].is_string()) throw DataError("id must be a string");
  d.id = j["id"].get<std::string>();
  if (!j["utterances"].is_array()) throw DataError("utterances must be an array");
  for (const auto& u : j["utterances"]) {
    if (!u.is_object()) throw DataError("utterance must be an object");
    reject_unknown(u, {"speaker", "text"}, "utterance");
    if (!u.contains("speaker") || !u["speaker"].is_number_integer()) throw DataError("utterance speaker must be an integer");
    if (!u.contains("text") || !u["text"].is_string()) throw DataError("utterance text must be a string");
    Utterance utt;
    utt.speaker = u["speaker"].get<int>();
    if (utt.speaker < 1 || utt.speaker > 9)
      throw DataError("speaker id " + std::to_string(utt.speaker) + " not in 1..9");
    utt.tokens.push_back(speaker_token(utt.speaker));
    for (auto& t : tokenize(u["text"].get<std::string>())) utt.tokens.push_back(std::move(t));
    d.utterances.push_back(std::move(utt));
  }
  for (const auto& c : string_list(j["candidates"], "candidates")) d.candidates.push_back(tokenize(c));
  if (!j["labels"].is_array()) throw DataError("labels must be an array");
  for (const auto& y : j["labels"]) {
    if (!y.is_number_integer()) throw DataError("labels must be integers");
    d.labels.push_back(y.get<int>());
  }
  if (j.contains("knowledge") && !j["knowledge"].is_null()) {
    const auto& kb = j["knowledge"];
    if (!kb.is_object()) throw DataError("knowledge must be an object or null");
    reject_unknown(kb, {"suggested", "prior"}, "knowledge");
    Knowledge k;
    if (kb.contains("suggested"))
      for (auto& s : string_list(kb["suggested"], "knowledge.suggested")) k.suggested.insert(std::move(s));
    if (kb.contains("prior"))
      for (auto& s : string_list(kb["prior"], "knowledge.prior")) k.prior.insert(std::move(s));
    d.knowledge = std::move(k);
  }
  return d;
}

std::string join(std::vector<std::string>::const_iterator begin, std::vector<std::string>::const_iterator end) {
  std::string out;
  for (auto it = begin; it != end; ++it) {
    if (!out.empty()) out += ' ';
    out += *it;
  }
  return out;
}

json dialogue_to_json(const Dialogue& d) {
  json j;
  j["id"] = d.id;
  j["utterances"] = json::array();
  for (const auto& u : d.utterances) {
    auto begin = u.tokens.begin();
    if (begin != u.tokens.end() && *begin == speaker_token(u.speaker)) ++begin;
    j["utterances"].push_back({{"speaker", u.speaker}, {"text", join(begin, u.tokens.end())}});
  }
  j["candidates"] = json::array();
  for (const auto& c : d.candidates) j["candidates"].push_back(join(c.begin(), c.end()));
  j["labels"] = d.labels;
  if (d.knowledge) {
    j["knowledge"] = {{"suggested", std::vector<std::string>(d.knowledge->suggested.begin(), d.knowledge->suggested.end())},
                      {"prior", std::vector<std::string>(d.knowledge->prior.begin(), d.knowledge->prior.end())}};
  } else {
    j["knowledge"] = nullptr;
  }
  return j;
}

}  // namespace

Corpus parse_corpus(std::istream& in, int subtask) {
  validate_subtask(subtask);
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Dialogue d;
    try {
      d = dialogue_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    validate_dialogue(d, subtask);
    corpus.push_back(std::move(d));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, int subtask) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return parse_corpus(in, subtask);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus) out << dialogue_to_json(d).dump() << '\n';
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus " + path.string());
  write_corpus(out, corpus);
  if (!out) throw DataError("failed writing corpus " + path.string());
}

bool corpus_has_knowledge(const Corpus& corpus) {
  return std::any_of(corpus.begin(), corpus.end(), [](const Dialogue& d) { return d.knowledge.has_value(); });
}

std::array<double, kKnowledgeDim> knowledge_features(std::string_view token, const Knowledge& kb) {
  std::string t(token);
  return {kb.suggested.count(t) ? 1.0 : 0.0, kb.prior.count(t) ? 1.0 : 0.0};
}

// Vocab ----------------------------------------------------------------------

Vocab::Vocab() : Vocab(std::vector<std::string>{"<pad>", "<unk>", "<speaker1>", "<speaker2>"}) {}

Vocab::Vocab(std::vector<std::string> tokens) {
  for (auto& t : tokens) add(t);
  if (size() < kReserved || tokens_[kPad] != "<pad>" || tokens_[kUnk] != "<unk>" ||
      tokens_[kSpeaker1] != "<speaker1>" || tokens_[kSpeaker2] != "<speaker2>")
    throw DataError("vocabulary must start with <pad>, <unk>, <speaker1>, <speaker2>");
}

int Vocab::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  int id = size();
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.count(std::string(token)) > 0; }

Vocab build_vocab(const Corpus& corpus, int min_count) {
  std::map<std::string, int> counts;
  std::set<int> speakers;
  auto count = [&](const std::vector<std::string>& toks) {
    for (const auto& t : toks) {
      if (is_speaker_token(t)) {
        speakers.insert(t[8] - '0');
        continue;
      }
      ++counts[t];
    }
  };
  for (const auto& d : corpus) {
    for (const auto& u : d.utterances) count(u.tokens);
    for (const auto& c : d.candidates) count(c);
  }
  Vocab vocab;
  for (int s : speakers)
    if (s >= 3) vocab.add(speaker_token(s));
  std::vector<std::pair<std::string, int>> ranked;
  for (const auto& [tok, n] : counts)
    if (n >= min_count && !vocab.contains(tok)) ranked.emplace_back(tok, n);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [tok, _] : ranked) vocab.add(tok);
  return vocab;
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) tokens.push_back(line);
  return Vocab(std::move(tokens));
}

// Encoding -------------------------------------------------------------------

namespace {

EncodedSequence encode_tokens(std::vector<std::string>::const_iterator begin,
                              std::vector<std::string>::const_iterator end, const Vocab& vocab, int knowledge_dim,
                              const std::optional<Knowledge>& kb) {
  EncodedSequence s;
  for (auto it = begin; it != end; ++it) s.ids.push_back(vocab.id(*it));
  s.knowledge = MatrixXd::Zero(static_cast<Index>(s.ids.size()), knowledge_dim);
  if (knowledge_dim == kKnowledgeDim && kb) {
    Index r = 0;
    for (auto it = begin; it != end; ++it, ++r) {
      auto f = knowledge_features(*it, *kb);
      s.knowledge(r, 0) = f[0];
      s.knowledge(r, 1) = f[1];
    }
  }
  return s;
}

}  // namespace

EncodedDialogue encode_dialogue(const Dialogue& d, const Vocab& vocab, int knowledge_dim, const EncodeLimits& limits) {
  if (knowledge_dim != 0 && knowledge_dim != kKnowledgeDim)
    throw DataError("knowledge width must be 0 or " + std::to_string(kKnowledgeDim));
  EncodedDialogue e;
  e.id = d.id;
  e.labels = d.labels;
  std::size_t first = d.utterances.size() > static_cast<std::size_t>(limits.max_utterances)
                          ? d.utterances.size() - static_cast<std::size_t>(limits.max_utterances)
                          : 0;
  auto clip = [&](const std::vector<std::string>& toks) {
    return toks.begin() + static_cast<std::ptrdiff_t>(std::min(toks.size(), static_cast<std::size_t>(limits.max_tokens)));
  };
  for (std::size_t i = first; i < d.utterances.size(); ++i) {
    const auto& toks = d.utterances[i].tokens;
    e.utterances.push_back(encode_tokens(toks.begin(), clip(toks), vocab, knowledge_dim, d.knowledge));
  }
  for (const auto& c : d.candidates) e.candidates.push_back(encode_tokens(c.begin(), clip(c), vocab, knowledge_dim, d.knowledge));
  return e;
}

std::vector<EncodedDialogue> encode_corpus(const Corpus& corpus, const Vocab& vocab, int knowledge_dim,
                                           const EncodeLimits& limits) {
  std::vector<EncodedDialogue> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus) out.push_back(encode_dialogue(d, vocab, knowledge_dim, limits));
  return out;
}

// Synthetic ------------------------------------------------------------------

namespace {

std::string synthetic_word(int index) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  const int syllables = static_cast<int>(consonants.size() * vowels.size());
  std::string w;
  int i = index;
  do {
    int s = i % syllables;
    w += consonants[static_cast<std::size_t>(s / static_cast<int>(vowels.size()))];
    w += vowels[static_cast<std::size_t>(s % static_cast<int>(vowels.size()))];
    i /= syllables;
  } while (i > 0 || w.size() < 4);
  return w;
}

class Generator {
 public:
  explicit Generator(const SyntheticConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    const int v = cfg.vocab_size;
    n_topics_ = cfg.n_topics > 0 ? cfg.n_topics : cfg.k_candidates + 1;
    const int n_function = std::max(8, v / 5);
    const int n_courses = cfg.with_knowledge ? std::max(10, v / 10) : 0;
    const int per_topic = (v - n_function - n_courses) / n_topics_;
    if (per_topic < 4)
      throw std::invalid_argument("gen_synthetic: vocab_size " + std::to_string(v) + " leaves " +
                                  std::to_string(per_topic) + " tokens per topic for " + std::to_string(n_topics_) +
                                  " topics (need 4)");
    int next = 0;
    for (int i = 0; i < n_function; ++i) function_.push_back(synthetic_word(next++));
    topics_.resize(static_cast<std::size_t>(n_topics_));
    for (auto& topic : topics_)
      for (int i = 0; i < per_topic; ++i) topic.push_back(synthetic_word(next++));
    for (int i = 0; i < n_courses; ++i) courses_.push_back("CS" + std::to_string(101 + i));
  }

  Corpus run() {
    Corpus corpus;
    corpus.reserve(static_cast<std::size_t>(cfg_.n_dialogues));
    for (int n = 0; n < cfg_.n_dialogues; ++n) corpus.push_back(dialogue(n));
    return corpus;
  }

 private:
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

  std::vector<std::string> sentence(int topic, int min_topic_tokens) {
    int len = uniform(cfg_.min_tokens, cfg_.max_tokens);
    std::vector<std::string> toks;
    for (int i = 0; i < len; ++i) {
      bool topical = i < min_topic_tokens || coin(0.5);
      toks.push_back(topical ? pick(topics_[static_cast<std::size_t>(topic)]) : pick(function_));
    }
    std::shuffle(toks.begin(), toks.end(), rng_);
    return toks;
  }

  /// Response built around two topic tokens taken from the context.
  std::vector<std::string> grounded_response(int topic, const std::vector<std::string>& context_topic_tokens) {
    std::vector<std::string> anchors = context_topic_tokens;
    std::shuffle(anchors.begin(), anchors.end(), rng_);
    std::vector<std::string> toks(anchors.begin(), anchors.begin() + 2);
    int extra = uniform(std::max(0, cfg_.min_tokens - 2), std::max(0, cfg_.max_tokens - 2));
    for (int i = 0; i < extra; ++i)
      toks.push_back(coin(0.5) ? pick(topics_[static_cast<std::size_t>(topic)]) : pick(function_));
    std::shuffle(toks.begin(), toks.end(), rng_);
    return toks;
  }

  /// Same topic as the context but sharing none of its tokens.
  std::vector<std::string> unanchored_response(int topic, const std::set<std::string>& context_tokens) {
    std::vector<std::string> fresh;
    for (const auto& t : topics_[static_cast<std::size_t>(topic)])
      if (!context_tokens.count(t)) fresh.push_back(t);
    std::vector<std::string> filler;
    for (const auto& t : function_)
      if (!context_tokens.count(t)) filler.push_back(t);
    if (filler.empty()) filler = function_;
    const int len = uniform(cfg_.min_tokens, cfg_.max_tokens);
    std::vector<std::string> toks;
    for (int i = 0; i < len; ++i)
      toks.push_back(!fresh.empty() && (i < 2 || coin(0.5)) ? pick(fresh) : pick(filler));
    std::shuffle(toks.begin(), toks.end(), rng_);
    return toks;
  }

  void insert_token(std::vector<std::string>& toks, std::string token, std::size_t first = 0) {
    auto pos = static_cast<std::ptrdiff_t>(uniform(static_cast<int>(first), static_cast<int>(toks.size())));
    toks.insert(toks.begin() + pos, std::move(token));
  }

  std::string course_outside(const std::set<std::string>& excluded) {
    std::vector<std::string> pool;
    for (const auto& c : courses_)
      if (!excluded.count(c)) pool.push_back(c);
    return pick(pool);
  }

  Dialogue dialogue(int index) {
    const int k = cfg_.k_candidates;
    const int topic = uniform(0, n_topics_ - 1);
    Dialogue d;
    d.id = "syn-" + std::to_string(index);

    const int l = uniform(cfg_.min_utterances, cfg_.max_utterances);
    std::set<std::string> topical;
    for (int i = 0; i < l; ++i) {
      Utterance u;
      u.speaker = i % 2 + 1;
      u.tokens.push_back(speaker_token(u.speaker));
      for (auto& t : sentence(topic, i == 0 ? 2 : 0)) u.tokens.push_back(std::move(t));
      d.utterances.push_back(std::move(u));
    }
    // Guarantee two distinct topic tokens in the context.
    const auto& own = topics_[static_cast<std::size_t>(topic)];
    for (const auto& u : d.utterances)
      for (const auto& t : u.tokens)
        if (std::find(own.begin(), own.end(), t) != own.end()) topical.insert(t);
    while (topical.size() < 2) {
      const auto& t = pick(own);
      if (topical.insert(t).second) d.utterances.front().tokens.push_back(t);
    }
    std::vector<std::string> anchors(topical.begin(), topical.end());

    std::optional<Knowledge> kb;
    if (cfg_.with_knowledge) {
      Knowledge knowledge;
      while (knowledge.suggested.size() < 2) knowledge.suggested.insert(pick(courses_));
      while (knowledge.prior.size() < 2) {
        const auto& c = pick(courses_);
        if (!knowledge.suggested.count(c)) knowledge.prior.insert(c);
      }
      auto& u = d.utterances[static_cast<std::size_t>(uniform(0, l - 1))];
      insert_token(u.tokens, pick(std::vector<std::string>(knowledge.prior.begin(), knowledge.prior.end())), 1);
      kb = std::move(knowledge);
    }

    const bool no_answer = cfg_.subtask == 4 && coin(cfg_.no_answer_fraction);
    int positives = no_answer ? 0 : 1;
    std::vector<std::pair<std::vector<std::string>, int>> cands;
    std::vector<std::string> positive;
    if (positives == 1) {
      positive = grounded_response(topic, anchors);
      if (kb) insert_token(positive, pick(std::vector<std::string>(kb->suggested.begin(), kb->suggested.end())));
      cands.emplace_back(positive, 1);
      if (cfg_.subtask == 3) {
        int paraphrases = std::min(uniform(1, 4), k - 1);
        for (int p = 0; p < paraphrases; ++p) {
          std::vector<std::string> copy;
          for (const auto& t : positive)
            if (!coin(cfg_.paraphrase_drop)) copy.push_back(t);
          if (copy.empty()) copy.push_back(positive.front());
          cands.emplace_back(std::move(copy), 1);
        }
      }
    }

    const int negatives = k - static_cast<int>(cands.size());
    const int hard = kb ? negatives / 2
                        : static_cast<int>(std::lround(negatives * cfg_.hard_negative_fraction));
    std::set<std::string> context_tokens;
    for (const auto& u : d.utterances) context_tokens.insert(u.tokens.begin(), u.tokens.end());
    for (int n = 0; n < hard; ++n) {
      if (kb) {
        auto neg = grounded_response(topic, anchors);
        insert_token(neg, course_outside(kb->suggested));
        cands.emplace_back(std::move(neg), 0);
      } else {
        cands.emplace_back(unanchored_response(topic, context_tokens), 0);
      }
    }
    std::vector<int> others;
    for (int t = 0; t < n_topics_; ++t)
      if (t != topic) others.push_back(t);
    std::shuffle(others.begin(), others.end(), rng_);
    for (int n = 0; n < negatives - hard; ++n) {
      auto neg = sentence(others[static_cast<std::size_t>(n)], 2);
      if (kb) insert_token(neg, course_outside(kb->suggested));
      cands.emplace_back(std::move(neg), 0);
    }
    std::shuffle(cands.begin(), cands.end(), rng_);
    for (auto& [c, y] : cands) {
      d.candidates.push_back(std::move(c));
      d.labels.push_back(y);
    }
    d.knowledge = std::move(kb);
    return d;
  }

  SyntheticConfig cfg_;
  std::mt19937_64 rng_;
  int n_topics_ = 0;
  std::vector<std::string> function_;
  std::vector<std::vector<std::string>> topics_;
  std::vector<std::string> courses_;
};

}  // namespace

Corpus gen_synthetic(const SyntheticConfig& cfg) {
  validate_subtask(cfg.subtask);
  if (cfg.vocab_size < 50) throw std::invalid_argument("gen_synthetic: vocab_size must be at least 50");
  if (cfg.k_candidates < 2) throw std::invalid_argument("gen_synthetic: need at least 2 candidates");
  if (cfg.min_utterances < 1 || cfg.max_utterances < cfg.min_utterances || cfg.min_tokens < 1 ||
      cfg.max_tokens < cfg.min_tokens)
    throw std::invalid_argument("gen_synthetic: invalid length ranges");
  for (double f : {cfg.no_answer_fraction, cfg.paraphrase_drop, cfg.hard_negative_fraction})
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("gen_synthetic: fractions must lie in [0, 1]");
  const int topics = cfg.n_topics > 0 ? cfg.n_topics : cfg.k_candidates + 1;
  // Every negative needs its own topic; subtask 4 may need k of them.
  const int needed = cfg.subtask == 4 ? cfg.k_candidates : cfg.k_candidates - 1;
  if (needed > topics - 1)
    throw std::invalid_argument("gen_synthetic: " + std::to_string(needed) + " negatives need distinct topics but only " +
                                std::to_string(topics - 1) + " are available");
  return Generator(cfg).run();
}

}  // namespace rapnet
