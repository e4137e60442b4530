#include "rapnet/adam.hpp"

#include <cmath>
#include <string>

namespace rapnet {

AdamState::AdamState(double learning_rate, std::span<Parameter* const> params) : lr(learning_rate) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto* p : params) {
    m.push_back(MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v.push_back(MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

void adam_step(AdamState& s, std::span<Parameter* const> params) {
  if (params.size() != s.m.size()) throw std::invalid_argument("adam_step: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* p = params[i];
    if (p->grad.rows() != s.m[i].rows() || p->grad.cols() != s.m[i].cols())
      throw ShapeError("adam_step: gradient of '" + p->name + "' has shape " + shape_str(p->grad));
    if (!p->grad.allFinite()) throw NumericalError("non-finite gradient in parameter '" + p->name + "'");
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    auto& m = s.m[i];
    auto& v = s.v[i];
    m = s.beta1 * m + (1.0 - s.beta1) * p->grad;
    v = s.beta2 * v + (1.0 - s.beta2) * p->grad.cwiseAbs2();
    p->value.array() -= s.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.eps);
  }
}

}  // namespace rapnet
