#pragma once

#include "rapnet/adam.hpp"
#include "rapnet/metrics.hpp"
#include "rapnet/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace rapnet {

struct TrainConfig {
  double lr = 0.001;
  int epochs = 10;
  std::uint64_t seed = 1;
  int subtask = 1;
  std::optional<double> tau;  // subtask 4; unset selects on dev every epoch
  int jobs = 1;               // dev evaluation only
  bool measure_initial_loss = false;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-dialogue loss during the epoch
  double dev_r_at_10 = 0.0;
  double dev_mrr = 0.0;
  double dev_avg = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  std::unique_ptr<ResponseModel> best;  // highest dev average, earliest on ties
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0: initialisation
  std::optional<EvalReport> best_dev;
  std::optional<double> initial_train_loss;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mean loss over a corpus, forward only.
double mean_loss(const ResponseModel& model, std::span<const EncodedDialogue> corpus);

/// One Adam update per dialogue in a seeded shuffled order, dev evaluation
/// after each epoch. `model` is consumed and ends at the last epoch.
TrainResult train(std::unique_ptr<ResponseModel> model, std::span<const EncodedDialogue> train_set,
                  std::span<const EncodedDialogue> dev_set, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Builds the model from `model_cfg` seeded with the training seed.
TrainResult train(const ModelConfig& model_cfg, std::span<const EncodedDialogue> train_set,
                  std::span<const EncodedDialogue> dev_set, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// JSON Lines, one object per epoch.
void write_history(std::ostream& out, std::span<const EpochRecord> history);
void write_history(const std::filesystem::path& path, std::span<const EpochRecord> history);
std::vector<EpochRecord> read_history(const std::filesystem::path& path);

}  // namespace rapnet
