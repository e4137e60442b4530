#include "rapnet/train.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

namespace rapnet {

namespace {

// Fisher-Yates on raw engine output so the order does not depend on the
// standard library's distribution implementation.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

double mean_loss(const ResponseModel& model, std::span<const EncodedDialogue> corpus) {
  if (corpus.empty()) return 0.0;
  double total = 0.0;
  for (const auto& d : corpus) {
    Tape tape;
    total += model.loss(tape, d).item();
  }
  return total / static_cast<double>(corpus.size());
}

TrainResult train(std::unique_ptr<ResponseModel> model, std::span<const EncodedDialogue> train_set,
                  std::span<const EncodedDialogue> dev_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (!model) throw std::invalid_argument("train: no model");
  if (cfg.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  validate_subtask(cfg.subtask);

  TrainResult res;
  if (cfg.measure_initial_loss) res.initial_train_loss = mean_loss(*model, train_set);
  if (cfg.epochs == 0) {
    res.best = std::move(model);
    return res;
  }
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (dev_set.empty()) throw std::invalid_argument("train: empty dev set");

  auto params = model->parameters();
  AdamState adam(cfg.lr, params);
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eed5eedULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best_avg = -1.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_indices(order, rng);
    double total = 0.0;
    for (std::size_t i : order) {
      for (auto* p : params) p->zero_grad();
      Tape tape;
      auto loss = model->loss(tape, train_set[i]);
      const double l = loss.item();
      if (!std::isfinite(l))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " on dialogue '" +
                             train_set[i].id + "'");
      tape.backward(loss);
      adam_step(adam, params);
      total += l;
    }
    auto dev = evaluate(*model, dev_set, cfg.subtask, cfg.tau, cfg.jobs);
    EpochRecord rec{epoch, total / static_cast<double>(train_set.size()), dev.recall_at(10), dev.mrr, dev.average};
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (dev.average > best_avg) {
      best_avg = dev.average;
      res.best_epoch = epoch;
      res.best = model->clone();
      res.best_dev = std::move(dev);
    }
  }
  return res;
}

TrainResult train(const ModelConfig& model_cfg, std::span<const EncodedDialogue> train_set,
                  std::span<const EncodedDialogue> dev_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  return train(make_model(model_cfg, cfg.seed), train_set, dev_set, cfg, on_epoch);
}

void write_history(std::ostream& out, std::span<const EpochRecord> history) {
  for (const auto& r : history) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["dev_r_at_10"] = r.dev_r_at_10;
    j["dev_mrr"] = r.dev_mrr;
    j["dev_avg"] = r.dev_avg;
    out << j.dump() << '\n';
  }
}

void write_history(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history " + path.string());
  write_history(out, history);
}

std::vector<EpochRecord> read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open history " + path.string());
  std::vector<EpochRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    out.push_back({j.at("epoch").get<int>(), j.at("train_loss").get<double>(), j.at("dev_r_at_10").get<double>(),
                   j.at("dev_mrr").get<double>(), j.at("dev_avg").get<double>()});
  }
  return out;
}

}  // namespace rapnet
