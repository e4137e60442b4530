#include "rapnet/ablation.hpp"

#include <cstdio>
#include <sstream>

namespace rapnet {

std::vector<std::string> ablation_names() {
  return {"full", "inter-attention", "intra-attention", "highway encoder", "dynamic pooling"};
}

std::vector<AblationFlags> ablation_variants(const AblationFlags& base) {
  std::vector<AblationFlags> v(5, base);
  v[1].inter_attention = false;
  v[2].intra_attention = false;
  v[3].highway_encoder = false;
  v[4].dynamic_pooling = false;
  return v;
}

std::vector<AblationRow> run_ablation(const ModelConfig& base, const TrainConfig& train_cfg,
                                      std::span<const std::uint64_t> seeds, std::span<const EncodedDialogue> train_set,
                                      std::span<const EncodedDialogue> dev_set) {
  if (base.kind != ModelKind::rapnet) throw std::invalid_argument("ablation runs on rapnet only");
  if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  const auto names = ablation_names();
  const auto variants = ablation_variants(base.flags);
  std::vector<AblationRow> rows;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    AblationRow row{names[v], variants[v], {}, 0.0, 0.0, 0.0};
    ModelConfig mc = base;
    mc.flags = variants[v];
    for (auto seed : seeds) {
      TrainConfig tc = train_cfg;
      tc.seed = seed;
      auto res = train(mc, train_set, dev_set, tc);
      auto rep = res.best_dev ? *res.best_dev : evaluate(*res.best, dev_set, tc.subtask, tc.tau, tc.jobs);
      row.r_at_10 += rep.recall_at(10);
      row.mrr += rep.mrr;
      row.average += rep.average;
      row.reports.push_back(std::move(rep));
    }
    const double n = static_cast<double>(seeds.size());
    row.r_at_10 /= n;
    row.mrr /= n;
    row.average /= n;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_markdown(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os << "| Model | R@10 | MRR | Average |\n|:--|--:|--:|--:|\n";
  char buf[128];
  for (const auto& r : rows) {
    const std::string label = r.name == "full" ? "DP-LSTM + f_mcan" : "- " + r.name;
    std::snprintf(buf, sizeof buf, "| %s | %.2f | %.2f | %.2f |\n", label.c_str(), 100 * r.r_at_10, 100 * r.mrr,
                  100 * r.average);
    os << buf;
  }
  return os.str();
}

}  // namespace rapnet
