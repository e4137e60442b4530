#pragma once

#include "rapnet/tensor.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rapnet {

template <typename Scalar>
struct GradCheckReport {
  Scalar max_relative_error = 0;
  std::string worst_parameter;
  Index worst_index = -1;
  Scalar worst_analytic = 0;
  Scalar worst_numeric = 0;
  std::size_t checked = 0;
  bool finite = true;
  /// Largest relative error per parameter, in the order checked.
  std::vector<std::pair<std::string, Scalar>> per_parameter;

  bool passed(Scalar tolerance) const { return finite && max_relative_error < tolerance; }
};

/// Compares tape gradients of `loss_fn` against central differences for every
/// element of every parameter. `loss_fn` receives a fresh tape and must return
/// a scalar node; it is re-run twice per element.
///
/// Entries are compared as |a - n| / max(|a|, |n|, floor): below `floor` the
/// difference is judged in absolute terms, since central differences cannot
/// resolve gradients near the rounding noise of the loss.
template <typename Scalar, typename LossFn>
GradCheckReport<Scalar> grad_check(LossFn&& loss_fn, std::span<BasicParameter<Scalar>* const> params, Scalar eps,
                                   Scalar floor = Scalar(1e-6)) {
  GradCheckReport<Scalar> report;
  auto evaluate = [&]() {
    BasicTape<Scalar> tape;
    return loss_fn(tape).item();
  };

  for (auto* p : params) p->zero_grad();
  std::vector<Matrix<Scalar>> analytic;
  {
    BasicTape<Scalar> tape;
    auto loss = loss_fn(tape);
    if (!std::isfinite(loss.item())) report.finite = false;
    tape.backward(loss);
    for (auto* p : params) analytic.push_back(p->grad);
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    report.per_parameter.emplace_back(p.name, Scalar(0));
    for (Index i = 0; i < p.value.size(); ++i) {
      const Scalar saved = p.value.data()[i];
      auto at = [&](Scalar offset) {
        p.value.data()[i] = saved + offset;
        return evaluate();
      };
      const Scalar numeric = (at(eps) - at(-eps)) / (2 * eps);
      p.value.data()[i] = saved;
      Scalar a = analytic[k].data()[i];
      ++report.checked;
      Scalar rel;
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        report.finite = false;
        rel = std::numeric_limits<Scalar>::infinity();
      } else {
        Scalar denom = std::max({std::abs(a), std::abs(numeric), floor});
        rel = std::abs(a - numeric) / denom;
      }
      report.per_parameter.back().second = std::max(report.per_parameter.back().second, rel);
      if (rel > report.max_relative_error || report.worst_index < 0) {
        report.max_relative_error = rel;
        report.worst_parameter = p.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

template <typename Scalar, typename LossFn>
GradCheckReport<Scalar> grad_check(LossFn&& loss_fn, const std::vector<BasicParameter<Scalar>*>& params, Scalar eps,
                                   Scalar floor = Scalar(1e-6)) {
  return grad_check(std::forward<LossFn>(loss_fn), std::span<BasicParameter<Scalar>* const>(params), eps, floor);
}

}  // namespace rapnet
