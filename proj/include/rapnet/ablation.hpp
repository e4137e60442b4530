#pragma once

#include "rapnet/train.hpp"

#include <string>
#include <vector>

namespace rapnet {

struct AblationRow {
  std::string name;  // "full" or the removed component
  AblationFlags flags;
  std::vector<EvalReport> reports;  // best dev report per seed
  double r_at_10 = 0.0;             // means over seeds
  double mrr = 0.0;
  double average = 0.0;
};

/// The full model followed by the four single-removal variants, each trained
/// with the same seeds.
std::vector<AblationFlags> ablation_variants(const AblationFlags& base);
std::vector<std::string> ablation_names();

std::vector<AblationRow> run_ablation(const ModelConfig& base, const TrainConfig& train_cfg,
                                      std::span<const std::uint64_t> seeds, std::span<const EncodedDialogue> train_set,
                                      std::span<const EncodedDialogue> dev_set);

/// | Model | R@10 | MRR | Average |, values in percent.
std::string ablation_markdown(std::span<const AblationRow> rows);

}  // namespace rapnet
