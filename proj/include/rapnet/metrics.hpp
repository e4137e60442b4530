#pragma once

#include "rapnet/data.hpp"

#include <optional>
#include <span>
#include <vector>

namespace rapnet {

class ResponseModel;

/// Candidate indices by descending score; equal scores keep index order.
std::vector<int> rank_candidates(std::span<const double> scores);

/// 1-based rank of the best-ranked positive, 0 when there is none.
int best_positive_rank(std::span<const double> scores, std::span<const int> labels);

/// Subtask 4: a no-answer pseudo-candidate scored `tau` sits below every
/// candidate with p >= tau. Returns the rank of the best positive or, for an
/// all-negative dialogue, of the pseudo-candidate.
int best_rank_with_no_answer(std::span<const double> scores, std::span<const int> labels, double tau);

/// Ranks of 0 mark dialogues without a positive and are skipped.
double recall_at_k(std::span<const int> ranks, int k);
double mrr(std::span<const int> ranks);

struct ScoredDialogue {
  std::vector<double> scores;
  std::vector<int> labels;
};

struct EvalReport {
  int subtask = 1;
  std::optional<double> tau;  // set for subtask 4
  /// Ranked candidate ids per dialogue; -1 is the no-answer pseudo-candidate.
  std::vector<std::vector<int>> ranked;
  std::vector<int> ranks;
  std::vector<int> ks{1, 2, 5, 10};
  std::vector<double> recall;  // parallel to ks
  double mrr = 0.0;
  double average = 0.0;  // (R@10 + MRR) / 2
  double no_answer_precision = 0.0;
  double no_answer_recall = 0.0;
  int no_answer_predicted = 0;
  int no_answer_actual = 0;

  double recall_at(int k) const;
};

EvalReport evaluate_scores(std::span<const ScoredDialogue> dialogues, int subtask, std::optional<double> tau = {});

/// Grid 0.05, 0.10, ..., 0.95; highest average wins, ties to the smaller tau.
double select_tau(std::span<const ScoredDialogue> dialogues);
std::vector<double> tau_grid();

/// Probabilities for every dialogue, optionally fanned out over `jobs`
/// threads; results stay in dialogue order.
std::vector<ScoredDialogue> score_corpus(const ResponseModel& model, std::span<const EncodedDialogue> corpus,
                                         int jobs = 1);

/// Subtask 4 without a tau selects one on `corpus` itself.
EvalReport evaluate(const ResponseModel& model, std::span<const EncodedDialogue> corpus, int subtask,
                    std::optional<double> tau = {}, int jobs = 1);

}  // namespace rapnet
