#pragma once

#include "rapnet/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace rapnet {

struct AttentionMap {
  std::vector<std::string> tokens;
  MatrixXd raw;         // [n, 12] f_mcan rows per token
  MatrixXd normalized;  // [12, n] each feature row min-max scaled to [0, 1]
};

struct AttentionDump {
  AttentionMap context;
  AttentionMap response;
};

/// Min-max per row; constant rows become zeros.
MatrixXd normalize_rows(const MatrixXd& m);

AttentionDump attention_maps(const RapNet& model, const EncodedDialogue& d, const Vocab& vocab,
                             std::size_t candidate);

/// First row "token,<t1>,...", then one "feature_name,v1,..." row per feature.
void write_attention_csv(std::ostream& out, const AttentionMap& map);

/// Writes <prefix>.context.csv and <prefix>.response.csv.
AttentionDump dump_attention(const RapNet& model, const EncodedDialogue& d, const Vocab& vocab,
                             std::size_t candidate, const std::filesystem::path& prefix);

}  // namespace rapnet
