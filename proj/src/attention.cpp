#include "rapnet/attention.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace rapnet {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

AttentionMap make_map(const MatrixXd& raw, std::vector<std::string> tokens) {
  return {std::move(tokens), raw, normalize_rows(raw.transpose())};
}

std::vector<std::string> token_strings(const std::vector<int>& ids, const Vocab& vocab) {
  std::vector<std::string> out;
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace

MatrixXd normalize_rows(const MatrixXd& m) {
  MatrixXd out = MatrixXd::Zero(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    if (m.cols() == 0) break;
    const double lo = m.row(r).minCoeff(), hi = m.row(r).maxCoeff();
    if (hi > lo) out.row(r) = (m.row(r).array() - lo) / (hi - lo);
  }
  return out;
}

AttentionDump attention_maps(const RapNet& model, const EncodedDialogue& d, const Vocab& vocab,
                             std::size_t candidate) {
  if (candidate >= d.candidates.size())
    throw std::invalid_argument("candidate " + std::to_string(candidate) + " out of range");
  std::vector<int> ctx;
  for (const auto& u : d.utterances) ctx.insert(ctx.end(), u.ids.begin(), u.ids.end());
  if (ctx.empty() || d.candidates[candidate].ids.empty()) throw std::invalid_argument("empty token sequence");
  Tape tape;
  auto f = model.attention_features(tape, d, candidate);
  return {make_map(f.context.value(), token_strings(ctx, vocab)),
          make_map(f.response.value(), token_strings(d.candidates[candidate].ids, vocab))};
}

void write_attention_csv(std::ostream& out, const AttentionMap& map) {
  out << "token";
  for (const auto& t : map.tokens) out << ',' << csv_field(t);
  out << '\n';
  char buf[32];
  for (Index r = 0; r < map.normalized.rows(); ++r) {
    out << kMcanFeatureNames[static_cast<std::size_t>(r)];
    for (Index c = 0; c < map.normalized.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", map.normalized(r, c));
      out << ',' << buf;
    }
    out << '\n';
  }
}

AttentionDump dump_attention(const RapNet& model, const EncodedDialogue& d, const Vocab& vocab,
                             std::size_t candidate, const std::filesystem::path& prefix) {
  auto dump = attention_maps(model, d, vocab, candidate);
  for (auto [suffix, map] : {std::pair{".context.csv", &dump.context}, std::pair{".response.csv", &dump.response}}) {
    std::filesystem::path p = prefix;
    p += suffix;
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    write_attention_csv(out, *map);
    if (!out) throw std::runtime_error("failed writing " + p.string());
  }
  return dump;
}

}  // namespace rapnet
