#include "rapnet/metrics.hpp"

#include "rapnet/model.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace rapnet {

std::vector<int> rank_candidates(std::span<const double> scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

int best_positive_rank(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  const auto order = rank_candidates(scores);
  for (std::size_t r = 0; r < order.size(); ++r)
    if (labels[order[r]] == 1) return static_cast<int>(r) + 1;
  return 0;
}

int best_rank_with_no_answer(std::span<const double> scores, std::span<const int> labels, double tau) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  const auto order = rank_candidates(scores);
  int rank = 1;
  bool passed_threshold = false;
  for (int j : order) {
    if (!passed_threshold && scores[j] < tau) {
      passed_threshold = true;
      if (std::find(labels.begin(), labels.end(), 1) == labels.end()) return rank;
      ++rank;
    }
    if (labels[j] == 1) return rank;
    ++rank;
  }
  return rank;  // all-negative, every candidate at or above tau
}

double recall_at_k(std::span<const int> ranks, int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  int n = 0, hit = 0;
  for (int r : ranks) {
    if (r <= 0) continue;
    ++n;
    if (r <= k) ++hit;
  }
  return n ? static_cast<double>(hit) / n : 0.0;
}

double mrr(std::span<const int> ranks) {
  int n = 0;
  double s = 0.0;
  for (int r : ranks) {
    if (r <= 0) continue;
    ++n;
    s += 1.0 / r;
  }
  return n ? s / n : 0.0;
}

double EvalReport::recall_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return recall[i];
  throw std::invalid_argument("recall at " + std::to_string(k) + " not computed");
}

EvalReport evaluate_scores(std::span<const ScoredDialogue> dialogues, int subtask, std::optional<double> tau) {
  validate_subtask(subtask);
  EvalReport rep;
  rep.subtask = subtask;
  if (subtask == 4) rep.tau = tau ? *tau : select_tau(dialogues);
  int correct_none = 0;
  for (const auto& d : dialogues) {
    if (d.scores.size() != d.labels.size()) throw std::invalid_argument("scores and labels differ in length");
    const bool any_positive = std::find(d.labels.begin(), d.labels.end(), 1) != d.labels.end();
    auto order = rank_candidates(d.scores);
    if (subtask == 4) {
      const double t = *rep.tau;
      auto slot = std::find_if(order.begin(), order.end(), [&](int j) { return d.scores[j] < t; });
      order.insert(slot, -1);
      const bool predicted_none = order.front() == -1;
      rep.no_answer_predicted += predicted_none;
      rep.no_answer_actual += !any_positive;
      correct_none += predicted_none && !any_positive;
      rep.ranks.push_back(best_rank_with_no_answer(d.scores, d.labels, t));
    } else {
      if (subtask == 1 && std::count(d.labels.begin(), d.labels.end(), 1) != 1)
        throw std::invalid_argument("subtask 1 expects exactly one positive per dialogue");
      if (subtask == 3 && !any_positive) throw std::invalid_argument("subtask 3 expects at least one positive");
      rep.ranks.push_back(best_positive_rank(d.scores, d.labels));
    }
    rep.ranked.push_back(std::move(order));
  }
  for (int k : rep.ks) rep.recall.push_back(recall_at_k(rep.ranks, k));
  rep.mrr = mrr(rep.ranks);
  rep.average = (rep.recall_at(10) + rep.mrr) / 2.0;
  if (rep.no_answer_predicted) rep.no_answer_precision = static_cast<double>(correct_none) / rep.no_answer_predicted;
  if (rep.no_answer_actual) rep.no_answer_recall = static_cast<double>(correct_none) / rep.no_answer_actual;
  return rep;
}

std::vector<double> tau_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 19; ++i) g.push_back(i * 0.05);
  return g;
}

double select_tau(std::span<const ScoredDialogue> dialogues) {
  double best_tau = 0.05, best = -1.0;
  for (double t : tau_grid()) {
    std::vector<int> ranks;
    ranks.reserve(dialogues.size());
    for (const auto& d : dialogues) ranks.push_back(best_rank_with_no_answer(d.scores, d.labels, t));
    const double avg = (recall_at_k(ranks, 10) + mrr(ranks)) / 2.0;
    if (avg > best) {
      best = avg;
      best_tau = t;
    }
  }
  return best_tau;
}

std::vector<ScoredDialogue> score_corpus(const ResponseModel& model, std::span<const EncodedDialogue> corpus,
                                         int jobs) {
  std::vector<ScoredDialogue> out(corpus.size());
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), corpus.size());
  if (n <= 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) out[i] = {model.score(corpus[i]), corpus[i].labels};
    return out;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < corpus.size(); i += n) out[i] = {model.score(corpus[i]), corpus[i].labels};
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

EvalReport evaluate(const ResponseModel& model, std::span<const EncodedDialogue> corpus, int subtask,
                    std::optional<double> tau, int jobs) {
  const auto scored = score_corpus(model, corpus, jobs);
  return evaluate_scores(scored, subtask, tau);
}

}  // namespace rapnet
