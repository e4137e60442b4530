#pragma once

// Highway layer and LSTM building blocks. Inputs follow the row convention:
// a sequence of n vectors of width d is an [n,d] tensor, and a batch of
// independent states is a [B,h] tensor with one row per batch entry.

#include "rapnet/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rapnet {

/// H(w) = sigmoid(W_g w) * relu(W_h w) + (1 - sigmoid(W_g w)) * w, no biases.
template <typename Scalar>
struct HighwayParams {
  BasicParameter<Scalar> gate;
  BasicParameter<Scalar> transform;

  HighwayParams() = default;
  HighwayParams(const std::string& prefix, Index dim)
      : gate(prefix + ".w_gate", dim, dim), transform(prefix + ".w_transform", dim, dim) {}

  Index dim() const { return gate.value.rows(); }
  std::vector<BasicParameter<Scalar>*> parameters() { return {&gate, &transform}; }

  template <typename Rng>
  void init(Rng& rng, Scalar range) {
    uniform_init(gate, rng, -range, range);
    uniform_init(transform, rng, -range, range);
  }
};

template <typename Scalar>
BasicVar<Scalar> highway_forward(BasicTape<Scalar>& tape, const HighwayParams<Scalar>& p, const BasicVar<Scalar>& w) {
  if (w.cols() != p.dim())
    throw ShapeError("highway: input " + shape_str(w.value()) + " does not match layer width " +
                     std::to_string(p.dim()));
  auto gate = sigmoid(matmul_nt(w, tape.parameter(p.gate)));
  auto transformed = relu(matmul_nt(w, tape.parameter(p.transform)));
  // g*t + (1-g)*w == w + g*(t-w)
  return add(w, mul(gate, sub(transformed, w)));
}

/// Gate blocks are stacked in the order input, forget, cell candidate, output.
template <typename Scalar>
struct LstmParams {
  BasicParameter<Scalar> w_input;   // [4h, in]
  BasicParameter<Scalar> w_hidden;  // [4h, h]
  BasicParameter<Scalar> bias;      // [1, 4h]

  LstmParams() = default;
  LstmParams(const std::string& prefix, Index input_dim, Index hidden_dim)
      : w_input(prefix + ".w_input", 4 * hidden_dim, input_dim),
        w_hidden(prefix + ".w_hidden", 4 * hidden_dim, hidden_dim),
        bias(prefix + ".bias", 1, 4 * hidden_dim) {}

  Index input_dim() const { return w_input.value.cols(); }
  Index hidden_dim() const { return w_hidden.value.cols(); }
  std::vector<BasicParameter<Scalar>*> parameters() { return {&w_input, &w_hidden, &bias}; }

  /// Uniform weights and biases, then the forget-gate bias block set to 1.
  template <typename Rng>
  void init(Rng& rng, Scalar range) {
    uniform_init(w_input, rng, -range, range);
    uniform_init(w_hidden, rng, -range, range);
    uniform_init(bias, rng, -range, range);
    bias.value.middleCols(hidden_dim(), hidden_dim()).setConstant(Scalar(1));
  }
};

template <typename Scalar>
struct BiLstmParams {
  LstmParams<Scalar> forward;
  LstmParams<Scalar> backward;

  BiLstmParams() = default;
  BiLstmParams(const std::string& prefix, Index input_dim, Index hidden_dim)
      : forward(prefix + ".fwd", input_dim, hidden_dim), backward(prefix + ".bwd", input_dim, hidden_dim) {}

  Index input_dim() const { return forward.input_dim(); }
  Index hidden_dim() const { return forward.hidden_dim(); }
  std::vector<BasicParameter<Scalar>*> parameters() {
    auto out = forward.parameters();
    for (auto* p : backward.parameters()) out.push_back(p);
    return out;
  }

  template <typename Rng>
  void init(Rng& rng, Scalar range) {
    forward.init(rng, range);
    backward.init(rng, range);
  }
};

template <typename Scalar>
struct LstmState {
  BasicVar<Scalar> h;
  BasicVar<Scalar> c;
};

/// One cell update from already projected input gates `pre_x` = x W_in^T + b.
/// An absent `prev` is the zero state.
template <typename Scalar>
LstmState<Scalar> lstm_cell(BasicTape<Scalar>& tape, const LstmParams<Scalar>& p, const BasicVar<Scalar>& pre_x,
                            const std::optional<LstmState<Scalar>>& prev) {
  const Index h = p.hidden_dim();
  if (pre_x.cols() != 4 * h)
    throw ShapeError("lstm: projected input " + shape_str(pre_x.value()) + " does not match hidden size " +
                     std::to_string(h));
  auto pre = pre_x;
  if (prev) {
    if (prev->h.cols() != h || prev->c.cols() != h || prev->h.rows() != pre_x.rows() || prev->c.rows() != pre_x.rows())
      throw ShapeError("lstm: state " + shape_str(prev->h.value()) + "/" + shape_str(prev->c.value()) +
                       " does not match input batch " + shape_str(pre_x.value()));
    pre = add(pre_x, matmul_nt(prev->h, tape.parameter(p.w_hidden)));
  }
  auto in_gate = sigmoid(slice_cols(pre, 0, h));
  auto forget_gate = sigmoid(slice_cols(pre, h, h));
  auto candidate = tanh(slice_cols(pre, 2 * h, h));
  auto out_gate = sigmoid(slice_cols(pre, 3 * h, h));
  auto c = mul(in_gate, candidate);
  if (prev) c = add(mul(forget_gate, prev->c), c);
  auto hidden = mul(out_gate, tanh(c));
  return {hidden, c};
}

template <typename Scalar>
BasicVar<Scalar> lstm_project(BasicTape<Scalar>& tape, const LstmParams<Scalar>& p, const BasicVar<Scalar>& x) {
  if (x.cols() != p.input_dim())
    throw ShapeError("lstm: input " + shape_str(x.value()) + " does not match input size " +
                     std::to_string(p.input_dim()));
  return add_row(matmul_nt(x, tape.parameter(p.w_input)), tape.parameter(p.bias));
}

/// i,f,o = sigmoid, g = tanh, c = f*c_prev + i*g, h = o*tanh(c).
template <typename Scalar>
LstmState<Scalar> lstm_step(BasicTape<Scalar>& tape, const LstmParams<Scalar>& p, const BasicVar<Scalar>& x,
                            const BasicVar<Scalar>& h_prev, const BasicVar<Scalar>& c_prev) {
  return lstm_cell(tape, p, lstm_project(tape, p, x), std::optional<LstmState<Scalar>>(LstmState<Scalar>{h_prev, c_prev}));
}

/// States of one direction, indexed by sequence position (not visit order).
template <typename Scalar>
struct LstmTrace {
  std::vector<BasicVar<Scalar>> h;
  std::vector<BasicVar<Scalar>> c;

  std::size_t size() const { return h.size(); }
};

/// Runs one direction over a time-major batch [steps*batch, in] (see
/// stack_time_major). `reverse` visits positions steps-1 .. 0.
template <typename Scalar>
LstmTrace<Scalar> lstm_run(BasicTape<Scalar>& tape, const LstmParams<Scalar>& p, const BasicVar<Scalar>& time_major,
                           Index batch, bool reverse, const std::optional<LstmState<Scalar>>& init = std::nullopt) {
  if (batch <= 0 || time_major.rows() == 0 || time_major.rows() % batch != 0)
    throw ShapeError("lstm_run: empty or ragged sequence " + shape_str(time_major.value()) + " for batch " +
                     std::to_string(batch));
  const Index steps = time_major.rows() / batch;
  auto projected = lstm_project(tape, p, time_major);
  LstmTrace<Scalar> trace;
  trace.h.resize(static_cast<std::size_t>(steps));
  trace.c.resize(static_cast<std::size_t>(steps));
  std::optional<LstmState<Scalar>> state = init;
  for (Index k = 0; k < steps; ++k) {
    Index t = reverse ? steps - 1 - k : k;
    auto pre_x = steps == 1 ? projected : slice_rows(projected, t * batch, batch);
    state = lstm_cell(tape, p, pre_x, state);
    trace.h[static_cast<std::size_t>(t)] = state->h;
    trace.c[static_cast<std::size_t>(t)] = state->c;
  }
  return trace;
}

template <typename Scalar>
struct BiLstmState {
  LstmTrace<Scalar> forward;
  LstmTrace<Scalar> backward;

  std::size_t size() const { return forward.size(); }
};

/// Bidirectional run over a time-major batch. `init_forward` seeds position 0
/// of the left-to-right pass and `init_backward` the last position of the
/// right-to-left pass.
template <typename Scalar>
BiLstmState<Scalar> bilstm_run(BasicTape<Scalar>& tape, const BiLstmParams<Scalar>& p,
                               const BasicVar<Scalar>& time_major, Index batch,
                               const std::optional<LstmState<Scalar>>& init_forward = std::nullopt,
                               const std::optional<LstmState<Scalar>>& init_backward = std::nullopt) {
  return {lstm_run(tape, p.forward, time_major, batch, false, init_forward),
          lstm_run(tape, p.backward, time_major, batch, true, init_backward)};
}

/// Single-sequence form: `seq` is [len, in].
template <typename Scalar>
BiLstmState<Scalar> bilstm_run(BasicTape<Scalar>& tape, const BiLstmParams<Scalar>& p, const BasicVar<Scalar>& seq,
                               const std::optional<LstmState<Scalar>>& init_forward = std::nullopt,
                               const std::optional<LstmState<Scalar>>& init_backward = std::nullopt) {
  if (seq.rows() == 0) throw ShapeError("bilstm_run: empty sequence");
  return bilstm_run(tape, p, seq, Index(1), init_forward, init_backward);
}

}  // namespace rapnet
